//! Conforming Bogner–Fox–Schmit element: tensor-product cubic Hermite on
//! rectangles with (u, u_x, u_y, u_xy) at every node.
//!
//! Derivative unknowns are stored scaled by the cell size (h_x u_x, h_y u_y,
//! h_x h_y u_xy); [`BfsField::node_derivatives`] returns plain derivatives.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{smallest_eigs_with, EigenOptions, SparseSymMatrix};
use crate::mesh::{build_rect_mesh, Domain, Point, RectMesh};
use crate::morley::{line_normal_mean, Hessian, Probe, SmoothProbe};
use crate::quadrature::gauss_unit;
use crate::report::RunRecord;

/// Value, first and second derivative of the four cubic Hermite functions on [0, 1].
fn hermite(t: f64) -> [[f64; 3]; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        [1.0 - 3.0 * t2 + 2.0 * t3, -6.0 * t + 6.0 * t2, -6.0 + 12.0 * t],
        [t - 2.0 * t2 + t3, 1.0 - 4.0 * t + 3.0 * t2, -4.0 + 6.0 * t],
        [3.0 * t2 - 2.0 * t3, 6.0 * t - 6.0 * t2, 6.0 - 12.0 * t],
        [-t2 + t3, -2.0 * t + 3.0 * t2, -2.0 + 6.0 * t],
    ]
}

/// Local shape function index `4 * corner + kind`; corners counterclockwise
/// from lower-left, kinds (value, x, y, xy).
const CORNER_OFFSET: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// The 16 shape functions at local coordinates (s, t) ∈ [0,1]²: value,
/// physical gradient and physical Hessian.
fn shape_functions(s: f64, t: f64, hx: f64, hy: f64) -> [(f64, [f64; 2], Hessian); 16] {
    let hs = hermite(s);
    let ht = hermite(t);
    std::array::from_fn(|idx| {
        let (cx, cy) = CORNER_OFFSET[idx / 4];
        let kind = idx % 4;
        let fx = 2 * cx + usize::from(kind == 1 || kind == 3);
        let fy = 2 * cy + usize::from(kind == 2 || kind == 3);
        let (a, b) = (hs[fx], ht[fy]);
        let value = a[0] * b[0];
        let grad = [a[1] * b[0] / hx, a[0] * b[1] / hy];
        let hxy = a[1] * b[1] / (hx * hy);
        let hess = [[a[2] * b[0] / (hx * hx), hxy], [hxy, a[0] * b[2] / (hy * hy)]];
        (value, grad, hess)
    })
}

/// 16×16 stiffness and mass of one cell, 4×4 Gauss (exact for these integrands).
pub fn bfs_local_matrices(hx: f64, hy: f64, tau: f64) -> ([[f64; 16]; 16], [[f64; 16]; 16]) {
    let mut k = [[0.0; 16]; 16];
    let mut m = [[0.0; 16]; 16];
    let g = gauss_unit::<4>();
    for &(s, ws) in &g {
        for &(t, wt) in &g {
            let w = ws * wt * hx * hy;
            let phi = shape_functions(s, t, hx, hy);
            for i in 0..16 {
                let (vi, gi, hi) = phi[i];
                for j in i..16 {
                    let (vj, gj, hj) = phi[j];
                    let hess = hi[0][0] * hj[0][0] + 2.0 * hi[0][1] * hj[0][1] + hi[1][1] * hj[1][1];
                    k[i][j] += w * (hess + tau * (gi[0] * gj[0] + gi[1] * gj[1]));
                    m[i][j] += w * vi * vj;
                }
            }
        }
    }
    for i in 0..16 {
        for j in 0..i {
            k[i][j] = k[j][i];
            m[i][j] = m[j][i];
        }
    }
    (k, m)
}

/// Four unknowns per interior node; every unknown at a boundary node is clamped.
#[derive(Clone, Debug)]
pub struct BfsDofMap {
    node_base: Vec<Option<usize>>,
    n_free: usize,
}

impl BfsDofMap {
    pub fn new(mesh: &RectMesh) -> Self {
        let mut next = 0;
        let node_base = (0..mesh.n_nodes())
            .map(|v| {
                if mesh.is_boundary_node(v) {
                    None
                } else {
                    next += 4;
                    Some(next - 4)
                }
            })
            .collect();
        BfsDofMap { node_base, n_free: next }
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// First of the four consecutive ids (value, x, y, xy) of node `v`.
    pub fn node_base(&self, v: usize) -> Option<usize> {
        self.node_base[v]
    }

    fn local_dofs(&self, cell: &[usize; 4]) -> [Option<usize>; 16] {
        std::array::from_fn(|idx| self.node_base[cell[idx / 4]].map(|b| b + idx % 4))
    }
}

pub fn assemble_bfs(mesh: &RectMesh, tau: f64) -> Result<(SparseSymMatrix, SparseSymMatrix, BfsDofMap)> {
    if mesh.n_cells() == 0 {
        return Err(Error::InvalidArgument("empty rectangle mesh".into()));
    }
    let dofs = BfsDofMap::new(mesh);
    if dofs.n_free() == 0 {
        return Err(Error::NoFreeDofs);
    }
    let (hx, hy) = mesh.cell_size();
    let (k, m) = bfs_local_matrices(hx, hy, tau);
    let mut a_triplets = Vec::with_capacity(256 * mesh.n_cells());
    let mut b_triplets = Vec::with_capacity(256 * mesh.n_cells());
    for cell in mesh.cells() {
        let local = dofs.local_dofs(cell);
        for i in 0..16 {
            let Some(gi) = local[i] else { continue };
            for j in 0..16 {
                let Some(gj) = local[j] else { continue };
                a_triplets.push((gi, gj, k[i][j]));
                b_triplets.push((gi, gj, m[i][j]));
            }
        }
    }
    Ok((
        SparseSymMatrix::from_triplets(dofs.n_free(), &a_triplets),
        SparseSymMatrix::from_triplets(dofs.n_free(), &b_triplets),
        dofs,
    ))
}

/// C¹ piecewise bicubic given by free BFS coefficients.
pub struct BfsField<'m> {
    mesh: &'m RectMesh,
    dofs: BfsDofMap,
    coeffs: Vec<f64>,
    /// Pieces per segment when averaging normal derivatives along lines.
    pub segments: usize,
}

impl<'m> BfsField<'m> {
    pub fn new(mesh: &'m RectMesh, dofs: BfsDofMap, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dofs.n_free() {
            return Err(Error::DimensionMismatch {
                expected: dofs.n_free(),
                got: coeffs.len(),
            });
        }
        Ok(BfsField {
            mesh,
            dofs,
            coeffs,
            segments: 1,
        })
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }

    /// (u, u_x, u_y, u_xy) at node `v`.
    pub fn node_derivatives(&self, v: usize) -> [f64; 4] {
        let (hx, hy) = self.mesh.cell_size();
        match self.dofs.node_base(v) {
            None => [0.0; 4],
            Some(b) => [
                self.coeffs[b],
                self.coeffs[b + 1] / hx,
                self.coeffs[b + 2] / hy,
                self.coeffs[b + 3] / (hx * hy),
            ],
        }
    }

    /// Value, gradient and Hessian inside cell `c` at physical point `p`.
    pub fn eval_in_cell(&self, c: usize, p: Point) -> (f64, [f64; 2], Hessian) {
        let cell = &self.mesh.cells()[c];
        let (hx, hy) = self.mesh.cell_size();
        let ll = self.mesh.nodes()[cell[0]];
        let phi = shape_functions((p[0] - ll[0]) / hx, (p[1] - ll[1]) / hy, hx, hy);
        let local = self.dofs.local_dofs(cell);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for (idx, d) in local.iter().enumerate() {
            let Some(d) = d else { continue };
            let c = self.coeffs[*d];
            let (pv, pg, ph) = phi[idx];
            v += c * pv;
            g[0] += c * pg[0];
            g[1] += c * pg[1];
            for r in 0..2 {
                for s in 0..2 {
                    h[r][s] += c * ph[r][s];
                }
            }
        }
        (v, g, h)
    }

    /// Evaluation at any point of the closed domain; `None` outside.
    pub fn eval(&self, p: Point) -> Option<(f64, [f64; 2], Hessian)> {
        self.mesh.locate(p).map(|c| self.eval_in_cell(c, p))
    }
}

impl Probe for BfsField<'_> {
    fn value(&self, p: Point) -> f64 {
        self.eval(p).map_or(0.0, |e| e.0)
    }

    fn normal_derivative_mean(&self, a: Point, b: Point, normal: Point) -> f64 {
        line_normal_mean(|p| self.gradient(p), a, b, normal, self.segments)
    }
}

impl SmoothProbe for BfsField<'_> {
    fn gradient(&self, p: Point) -> [f64; 2] {
        self.eval(p).map_or([0.0; 2], |e| e.1)
    }

    fn hessian(&self, p: Point) -> Hessian {
        self.eval(p).map_or([[0.0; 2]; 2], |e| e.2)
    }
}

/// Uniform BFS eigenvalues on `levels` meshes with h = √2/4, √2/8, …
pub fn bfs_eigen_table(domain: Domain, tau: f64, levels: usize, k: usize) -> Result<Vec<RunRecord>> {
    bfs_eigen_table_with(domain, tau, levels, k, &EigenOptions::default())
}

pub fn bfs_eigen_table_with(domain: Domain, tau: f64, levels: usize, k: usize, opts: &EigenOptions) -> Result<Vec<RunRecord>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let start = Instant::now();
        let n = domain.base_subdivisions() << level;
        let mesh = build_rect_mesh(domain, n);
        let (a, b, dofs) = assemble_bfs(&mesh, tau)?;
        let pairs = smallest_eigs_with(&a, &b, k, opts)?;
        let (hx, hy) = mesh.cell_size();
        out.push(RunRecord::new(
            "bfs",
            domain,
            tau,
            level + 1,
            Some(hx.hypot(hy)),
            dofs.n_free(),
            &pairs,
            None,
            start.elapsed().as_secs_f64(),
        ));
    }
    Ok(out)
}
