//! Guaranteed-bracketing eigenvalue approximations for the clamped plate under
//! tension, Δ²u − τΔu = λu with u = ∂u/∂n = 0 on the boundary.
//!
//! The nonconforming Morley element gives lower bounds on triangle meshes
//! (uniform or adaptively refined by newest-vertex bisection driven by a
//! residual estimator), and the conforming Bogner–Fox–Schmit element gives
//! upper bounds on rectangle meshes.

pub mod adapt;
pub mod bfs;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod morley;
pub mod quadrature;
pub mod report;

pub use error::{Error, Result};
pub use mesh::{build_initial_lshape, build_initial_square, build_rect_mesh, Domain, RectMesh, TriMesh};
