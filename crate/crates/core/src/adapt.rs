//! Residual estimator for Morley eigenfunctions, Dörfler marking, and the
//! uniform and adaptive eigenvalue drivers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{smallest_eigs_with, EigenOptions, EigenPair};
use crate::mesh::{build_initial, Domain, TriMesh};
use crate::morley::{canonical_normal, to_physical, Hessian, MorleyField, MorleySpace};
use crate::quadrature::{triangle_degree2, triangle_degree5};
use crate::report::RunRecord;

/// Squared local indicators and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementEstimate {
    pub per_element: Vec<f64>,
    pub total: f64,
}

impl ElementEstimate {
    pub fn from_values(per_element: Vec<f64>) -> Self {
        let total = per_element.iter().sum();
        ElementEstimate { per_element, total }
    }
}

/// η²(κ) = h_κ⁴‖λ_h u_h‖²_κ + τ h_κ² |u_h|²_{1,κ} + Σ_{F⊂∂κ} h_F ‖[D²u_h ν_F]‖²_F,
/// with h_κ the longest edge, ν_F the unit tangent, and the jump replaced by
/// the trace on boundary edges. The tension term is present only for τ > 0.
pub fn eta_local(u_h: &MorleyField, lambda_h: f64, tau: f64) -> ElementEstimate {
    let space = u_h.space();
    let mesh = space.mesh();
    let hessians: Vec<Hessian> = (0..mesh.n_triangles()).into_par_iter().map(|t| u_h.hessian(t)).collect();
    let per_element = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let pts = mesh.triangle_points(t);
            let area = mesh.signed_area(t);
            let h = mesh.diameter(t);
            let mut l2 = 0.0;
            for q in triangle_degree5() {
                let (v, _, _) = u_h.eval_at(t, to_physical(pts, q.bary));
                l2 += q.weight * v * v;
            }
            let mut eta2 = h.powi(4) * lambda_h * lambda_h * area * l2;
            if tau > 0.0 {
                let mut h1 = 0.0;
                for q in triangle_degree2() {
                    let (_, g, _) = u_h.eval_at(t, to_physical(pts, q.bary));
                    h1 += q.weight * (g[0] * g[0] + g[1] * g[1]);
                }
                eta2 += h * h * tau * area * h1;
            }
            let own = &hessians[t];
            debug_assert!((own[0][1] - own[1][0]).abs() <= 1e-9 * (own[0][1].abs() + 1.0));
            for e in mesh.triangle_edges(t) {
                let edge = mesh.edge(e);
                let a = mesh.vertex(edge.vertices[0]);
                let b = mesh.vertex(edge.vertices[1]);
                let normal = canonical_normal(a, b);
                let tangent = [-normal[1], normal[0]];
                let jump = match edge.triangles {
                    (_, None) => *own,
                    (t0, Some(t1)) => {
                        let other = &hessians[if t0 == t { t1 } else { t0 }];
                        [
                            [own[0][0] - other[0][0], own[0][1] - other[0][1]],
                            [own[1][0] - other[1][0], own[1][1] - other[1][1]],
                        ]
                    }
                };
                let jv = [
                    jump[0][0] * tangent[0] + jump[0][1] * tangent[1],
                    jump[1][0] * tangent[0] + jump[1][1] * tangent[1],
                ];
                let len = mesh.edge_length(e);
                // Constant integrand: h_F · |F| · |jump|².
                eta2 += len * len * (jv[0] * jv[0] + jv[1] * jv[1]);
            }
            eta2
        })
        .collect();
    ElementEstimate::from_values(per_element)
}

/// Smallest set of elements whose indicators reach `theta` of the total.
/// Elements are taken by decreasing indicator, ties by ascending index; the
/// result is sorted ascending.
pub fn mark_dorfler(estimate: &ElementEstimate, theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta = {theta} outside (0, 1)")));
    }
    let values = &estimate.per_element;
    if estimate.total <= 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let target = theta * estimate.total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for t in order {
        if acc >= target {
            break;
        }
        acc += values[t];
        marked.push(t);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Solution of one discrete eigenproblem on a Morley mesh.
pub struct MorleySolve<'m> {
    pub space: MorleySpace<'m>,
    pub pairs: Vec<EigenPair>,
}

impl<'m> MorleySolve<'m> {
    pub fn field(&self, j: usize) -> MorleyField<'_, 'm> {
        self.space
            .field(self.pairs[j].x.clone())
            .expect("eigenvector length matches the space")
    }
}

pub fn solve_morley<'m>(mesh: &'m TriMesh, tau: f64, k: usize, opts: &EigenOptions) -> Result<MorleySolve<'m>> {
    let space = MorleySpace::new(mesh)?;
    let (a, b) = space.assemble(tau)?;
    let pairs = smallest_eigs_with(&a, &b, k, opts)?;
    Ok(MorleySolve { space, pairs })
}

/// Morley eigenvalues on uniformly refined meshes h = √2/4, √2/8, …; the
/// estimator column holds η²(Ω) for the first eigenpair.
pub fn morley_eigen_table(domain: Domain, tau: f64, levels: usize, k: usize, opts: &EigenOptions) -> Result<Vec<RunRecord>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    let mut mesh = build_initial(domain, domain.base_subdivisions());
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            mesh = mesh.uniform_refine();
        }
        let start = Instant::now();
        let solve = solve_morley(&mesh, tau, k, opts)?;
        let eta2 = eta_local(&solve.field(0), solve.pairs[0].lambda, tau).total;
        out.push(RunRecord::new(
            "morley",
            domain,
            tau,
            level + 1,
            Some(mesh.mesh_size()),
            solve.space.n_free(),
            &solve.pairs,
            Some(eta2),
            start.elapsed().as_secs_f64(),
        ));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct AdaptiveConfig {
    pub domain: Domain,
    pub tau: f64,
    pub theta: f64,
    /// Eigenpairs computed per iteration.
    pub k: usize,
    /// 1-based index of the eigenpair that drives the estimator.
    pub target: usize,
    /// Stop once a mesh with at least this many DOFs has been solved.
    pub max_dof: usize,
    /// Initial mesh parameter as in [`build_initial`].
    pub initial_n: usize,
    pub eigen: EigenOptions,
    /// Per-iteration mesh dumps as `<stem>_<iter>.<ext>`.
    pub mesh_dump: Option<PathBuf>,
}

impl AdaptiveConfig {
    /// L-shape defaults: θ = 0.25, two eigenpairs, initial h = √2/32.
    pub fn new(domain: Domain, tau: f64, target: usize, max_dof: usize) -> Self {
        AdaptiveConfig {
            domain,
            tau,
            theta: 0.25,
            k: 2,
            target,
            max_dof,
            initial_n: match domain {
                Domain::Square => 32,
                Domain::LShape => 16,
            },
            eigen: EigenOptions::default(),
            mesh_dump: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidArgument(format!("theta = {} outside (0, 1)", self.theta)));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("tau = {} must be nonnegative", self.tau)));
        }
        if self.target == 0 || self.target > self.k {
            return Err(Error::InvalidArgument(format!(
                "target eigenpair {} outside 1..={}",
                self.target, self.k
            )));
        }
        if self.initial_n == 0 {
            return Err(Error::InvalidArgument("initial mesh needs n >= 1".into()));
        }
        Ok(())
    }
}

/// solve → estimate → mark → refine, starting from the initial mesh
/// (iteration 1) until a solved mesh reaches `max_dof` DOFs.
///
/// Adaptive traces count every Morley DOF of the mesh, clamped boundary
/// ones included (vertices + edges), whereas the uniform tables count only
/// the free ones.
pub fn adaptive_loop(config: &AdaptiveConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let method = format!("morley-afem{}", config.target);
    let mut mesh = build_initial(config.domain, config.initial_n);
    let initial_dofs = total_dofs(&mesh);
    if config.max_dof < initial_dofs {
        return Err(Error::InvalidArgument(format!(
            "max_dof {} below the initial {initial_dofs} degrees of freedom",
            config.max_dof
        )));
    }
    let mut records = Vec::new();
    for iteration in 1.. {
        let wrap = |e: Error| Error::Adaptive {
            iteration,
            source: Box::new(e),
        };
        let start = Instant::now();
        if let Some(path) = &config.mesh_dump {
            dump_mesh(&mesh, path, iteration).map_err(wrap)?;
        }
        let solve = solve_morley(&mesh, config.tau, config.k, &config.eigen).map_err(wrap)?;
        let j = config.target - 1;
        let estimate = eta_local(&solve.field(j), solve.pairs[j].lambda, config.tau);
        let ndof = total_dofs(&mesh);
        records.push(RunRecord::new(
            &method,
            config.domain,
            config.tau,
            iteration,
            None,
            ndof,
            &solve.pairs,
            Some(estimate.total),
            start.elapsed().as_secs_f64(),
        ));
        if ndof >= config.max_dof {
            break;
        }
        let marked = mark_dorfler(&estimate, config.theta).map_err(wrap)?;
        if marked.is_empty() {
            break;
        }
        drop(solve);
        mesh = mesh.bisect(&marked);
    }
    Ok(records)
}

/// Morley DOFs before clamping: one per vertex and one per edge.
pub fn total_dofs(mesh: &TriMesh) -> usize {
    mesh.n_vertices() + mesh.n_edges()
}

fn dump_mesh(mesh: &TriMesh, base: &Path, iteration: usize) -> Result<()> {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{iteration}.{ext}"),
        None => format!("{stem}_{iteration}"),
    };
    let file = std::fs::File::create(base.with_file_name(name))?;
    mesh.write_dump(std::io::BufWriter::new(file))
}
