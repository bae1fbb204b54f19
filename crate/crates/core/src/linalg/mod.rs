//! Sparse symmetric storage, direct and iterative solves, and eigensolvers.

pub mod cholesky;
pub mod dense;
pub mod eigen;
pub mod ordering;
pub mod sparse;

pub use cholesky::{factorize, factorize_with, FactorOptions, LinearSolver};
pub use eigen::{dense_eig_oracle, smallest_eigs, smallest_eigs_with, EigenOptions, EigenPair};
pub use sparse::SparseSymMatrix;
