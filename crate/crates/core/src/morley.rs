//! Morley element: quadratics on triangles with vertex values and edge
//! normal derivatives as degrees of freedom.
//!
//! The edge functional is the mean of ∂v/∂n over the edge. For a quadratic
//! the normal derivative is linear along the edge, so the mean equals the
//! midpoint value, which is what the basis construction uses. Normals are
//! global per edge: the low-to-high vertex tangent rotated by −90°.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::dense::{lu_solve, DenseMatrix};
use crate::linalg::SparseSymMatrix;
use crate::mesh::{midpoint, Point, TriMesh};
use crate::quadrature::{gauss_unit, triangle_degree2, triangle_degree5};

pub type Hessian = [[f64; 2]; 2];

/// Canonical unit normal of the segment from `a` (low vertex) to `b` (high vertex).
pub fn canonical_normal(a: Point, b: Point) -> Point {
    let t = [b[0] - a[0], b[1] - a[1]];
    let len = t[0].hypot(t[1]);
    [t[1] / len, -t[0] / len]
}

/// Local basis on one triangle in centroid-centred, diameter-scaled monomials
/// {1, ξ, η, ξ², ξη, η²}.
#[derive(Clone, Debug)]
pub struct MorleyBasis {
    centroid: Point,
    h: f64,
    coeffs: [[f64; 6]; 6],
}

impl MorleyBasis {
    /// `normals[i]` is the unit normal used for the edge opposite vertex `i`.
    pub fn new(points: [Point; 3], normals: [Point; 3]) -> Result<Self> {
        let centroid = [
            (points[0][0] + points[1][0] + points[2][0]) / 3.0,
            (points[0][1] + points[1][1] + points[2][1]) / 3.0,
        ];
        let h = (0..3)
            .map(|i| crate::mesh::dist(points[i], points[(i + 1) % 3]))
            .fold(0.0, f64::max);
        let area = 0.5
            * ((points[1][0] - points[0][0]) * (points[2][1] - points[0][1])
                - (points[1][1] - points[0][1]) * (points[2][0] - points[0][0]));
        let threshold = 1e-14 * h * h;
        if !(area.abs() >= threshold) || h == 0.0 {
            return Err(Error::DegenerateTriangle { index: usize::MAX, area, threshold });
        }
        let mut basis = MorleyBasis {
            centroid,
            h,
            coeffs: [[0.0; 6]; 6],
        };
        // Row j: functional j applied to each monomial; then coefficients = V^{-T}.
        let mut vt = DenseMatrix::zeros(6);
        for j in 0..3 {
            let m = basis.monomials(points[j]);
            for k in 0..6 {
                vt[(k, j)] = m[k];
            }
            let mid = midpoint(points[(j + 1) % 3], points[(j + 2) % 3]);
            let g = basis.monomial_gradients(mid);
            for k in 0..6 {
                vt[(k, 3 + j)] = g[k][0] * normals[j][0] + g[k][1] * normals[j][1];
            }
        }
        let identity = DenseMatrix::identity(6);
        let x = lu_solve(&vt, identity.as_slice(), 6)?;
        for i in 0..6 {
            for k in 0..6 {
                basis.coeffs[i][k] = x[i * 6 + k];
            }
        }
        Ok(basis)
    }

    /// Row `i` holds the monomial coefficients of basis function `i`
    /// (three vertex functions, then the edge functions opposite vertices 0, 1, 2).
    pub fn coefficients(&self) -> &[[f64; 6]; 6] {
        &self.coeffs
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    pub fn scale(&self) -> f64 {
        self.h
    }

    pub fn monomials(&self, p: Point) -> [f64; 6] {
        let x = (p[0] - self.centroid[0]) / self.h;
        let y = (p[1] - self.centroid[1]) / self.h;
        [1.0, x, y, x * x, x * y, y * y]
    }

    pub fn monomial_gradients(&self, p: Point) -> [[f64; 2]; 6] {
        let x = (p[0] - self.centroid[0]) / self.h;
        let y = (p[1] - self.centroid[1]) / self.h;
        let s = 1.0 / self.h;
        [
            [0.0, 0.0],
            [s, 0.0],
            [0.0, s],
            [2.0 * x * s, 0.0],
            [y * s, x * s],
            [0.0, 2.0 * y * s],
        ]
    }

    fn monomial_hessians(&self) -> [Hessian; 6] {
        let s = 1.0 / (self.h * self.h);
        [
            [[0.0; 2]; 2],
            [[0.0; 2]; 2],
            [[0.0; 2]; 2],
            [[2.0 * s, 0.0], [0.0, 0.0]],
            [[0.0, s], [s, 0.0]],
            [[0.0, 0.0], [0.0, 2.0 * s]],
        ]
    }

    pub fn values(&self, p: Point) -> [f64; 6] {
        let m = self.monomials(p);
        std::array::from_fn(|i| (0..6).map(|k| self.coeffs[i][k] * m[k]).sum())
    }

    pub fn gradients(&self, p: Point) -> [[f64; 2]; 6] {
        let g = self.monomial_gradients(p);
        std::array::from_fn(|i| {
            let mut out = [0.0; 2];
            for k in 0..6 {
                out[0] += self.coeffs[i][k] * g[k][0];
                out[1] += self.coeffs[i][k] * g[k][1];
            }
            out
        })
    }

    /// Constant Hessians of the six basis functions.
    pub fn hessians(&self) -> [Hessian; 6] {
        let h = self.monomial_hessians();
        std::array::from_fn(|i| {
            let mut out = [[0.0; 2]; 2];
            for k in 3..6 {
                for r in 0..2 {
                    for c in 0..2 {
                        out[r][c] += self.coeffs[i][k] * h[k][r][c];
                    }
                }
            }
            out
        })
    }
}

/// Basis for triangle `t` of `mesh` with the canonical edge normals.
pub fn morley_basis(mesh: &TriMesh, t: usize) -> Result<MorleyBasis> {
    let points = mesh.triangle_points(t);
    let te = mesh.triangle_edges(t);
    let normals = std::array::from_fn(|i| {
        let [a, b] = mesh.edge(te[i]).vertices;
        canonical_normal(mesh.vertex(a), mesh.vertex(b))
    });
    MorleyBasis::new(points, normals).map_err(|e| match e {
        Error::DegenerateTriangle { area, threshold, .. } => Error::DegenerateTriangle { index: t, area, threshold },
        other => other,
    })
}

pub fn frobenius(a: &Hessian, b: &Hessian) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Local stiffness (Hessian plus tension) and mass matrices.
#[derive(Clone, Debug)]
pub struct ElementMatrices {
    pub stiffness: [[f64; 6]; 6],
    pub mass: [[f64; 6]; 6],
}

pub fn local_matrices(basis: &MorleyBasis, points: [Point; 3], tau: f64) -> ElementMatrices {
    let area = 0.5
        * ((points[1][0] - points[0][0]) * (points[2][1] - points[0][1])
            - (points[1][1] - points[0][1]) * (points[2][0] - points[0][0]));
    let hess = basis.hessians();
    let mut stiffness = [[0.0; 6]; 6];
    let mut mass = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in i..6 {
            stiffness[i][j] = area * frobenius(&hess[i], &hess[j]);
        }
    }
    if tau != 0.0 {
        for q in triangle_degree2() {
            let g = basis.gradients(to_physical(points, q.bary));
            for i in 0..6 {
                for j in i..6 {
                    stiffness[i][j] += tau * area * q.weight * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
    }
    for q in triangle_degree5() {
        let v = basis.values(to_physical(points, q.bary));
        for i in 0..6 {
            for j in i..6 {
                mass[i][j] += area * q.weight * v[i] * v[j];
            }
        }
    }
    for i in 0..6 {
        for j in 0..i {
            stiffness[i][j] = stiffness[j][i];
            mass[i][j] = mass[j][i];
        }
    }
    ElementMatrices { stiffness, mass }
}

pub fn to_physical(points: [Point; 3], bary: [f64; 3]) -> Point {
    [
        bary[0] * points[0][0] + bary[1] * points[1][0] + bary[2] * points[2][0],
        bary[0] * points[0][1] + bary[1] * points[1][1] + bary[2] * points[2][1],
    ]
}

/// Global numbering of Morley degrees of freedom. Boundary vertex values and
/// boundary edge normal derivatives are clamped to zero and get no id.
#[derive(Clone, Debug)]
pub struct DofMap {
    vertex_dof: Vec<Option<usize>>,
    edge_dof: Vec<Option<usize>>,
    n_free: usize,
}

impl DofMap {
    pub fn clamped(mesh: &TriMesh) -> Self {
        Self::build(mesh, true)
    }

    /// Every functional free; used for patch tests on the full broken space.
    pub fn unconstrained(mesh: &TriMesh) -> Self {
        Self::build(mesh, false)
    }

    fn build(mesh: &TriMesh, clamp: bool) -> Self {
        let mut next = 0;
        let mut take = |constrained: bool| {
            if clamp && constrained {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        };
        let vertex_dof = (0..mesh.n_vertices()).map(|v| take(mesh.is_boundary_vertex(v))).collect();
        let edge_dof = mesh.edges().iter().map(|e| take(e.is_boundary())).collect();
        DofMap {
            vertex_dof,
            edge_dof,
            n_free: next,
        }
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn vertex_dof(&self, v: usize) -> Option<usize> {
        self.vertex_dof[v]
    }

    pub fn edge_dof(&self, e: usize) -> Option<usize> {
        self.edge_dof[e]
    }

    /// Global ids in local order: three vertices, then edges opposite vertices 0, 1, 2.
    pub fn local_dofs(&self, mesh: &TriMesh, t: usize) -> [Option<usize>; 6] {
        let tri = mesh.triangle(t);
        let te = mesh.triangle_edges(t);
        [
            self.vertex_dof[tri[0]],
            self.vertex_dof[tri[1]],
            self.vertex_dof[tri[2]],
            self.edge_dof[te[0]],
            self.edge_dof[te[1]],
            self.edge_dof[te[2]],
        ]
    }
}

/// Mesh together with its DOF map and per-element bases.
pub struct MorleySpace<'m> {
    mesh: &'m TriMesh,
    dofs: DofMap,
    bases: Vec<MorleyBasis>,
}

impl<'m> MorleySpace<'m> {
    pub fn new(mesh: &'m TriMesh) -> Result<Self> {
        Self::with_dofs(mesh, DofMap::clamped(mesh))
    }

    pub fn with_dofs(mesh: &'m TriMesh, dofs: DofMap) -> Result<Self> {
        let bases = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| morley_basis(mesh, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(MorleySpace { mesh, dofs, bases })
    }

    pub fn mesh(&self) -> &'m TriMesh {
        self.mesh
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn basis(&self, t: usize) -> &MorleyBasis {
        &self.bases[t]
    }

    pub fn n_free(&self) -> usize {
        self.dofs.n_free()
    }

    /// Stiffness and mass with constrained functionals eliminated.
    pub fn assemble(&self, tau: f64) -> Result<(SparseSymMatrix, SparseSymMatrix)> {
        let n = self.dofs.n_free();
        if n == 0 {
            return Err(Error::NoFreeDofs);
        }
        let locals: Vec<ElementMatrices> = (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| local_matrices(&self.bases[t], self.mesh.triangle_points(t), tau))
            .collect();
        let mut a_triplets = Vec::with_capacity(36 * locals.len());
        let mut b_triplets = Vec::with_capacity(36 * locals.len());
        for (t, local) in locals.iter().enumerate() {
            let dofs = self.dofs.local_dofs(self.mesh, t);
            for i in 0..6 {
                let Some(gi) = dofs[i] else { continue };
                for j in 0..6 {
                    let Some(gj) = dofs[j] else { continue };
                    a_triplets.push((gi, gj, local.stiffness[i][j]));
                    b_triplets.push((gi, gj, local.mass[i][j]));
                }
            }
        }
        Ok((
            SparseSymMatrix::from_triplets(n, &a_triplets),
            SparseSymMatrix::from_triplets(n, &b_triplets),
        ))
    }

    /// Morley interpolant: vertex values and edge means of ∂u/∂n taken from the probe.
    pub fn interpolate<P: Probe + ?Sized>(&self, probe: &P) -> MorleyField<'_, 'm> {
        let mesh = self.mesh;
        let mut coeffs = vec![0.0; self.dofs.n_free()];
        for v in 0..mesh.n_vertices() {
            if let Some(d) = self.dofs.vertex_dof(v) {
                coeffs[d] = probe.value(mesh.vertex(v));
            }
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            if let Some(d) = self.dofs.edge_dof(e) {
                let a = mesh.vertex(edge.vertices[0]);
                let b = mesh.vertex(edge.vertices[1]);
                coeffs[d] = probe.normal_derivative_mean(a, b, canonical_normal(a, b));
            }
        }
        MorleyField { space: self, coeffs }
    }

    pub fn field(&self, coeffs: Vec<f64>) -> Result<MorleyField<'_, 'm>> {
        if coeffs.len() != self.dofs.n_free() {
            return Err(Error::DimensionMismatch {
                expected: self.dofs.n_free(),
                got: coeffs.len(),
            });
        }
        Ok(MorleyField { space: self, coeffs })
    }
}

/// Convenience wrapper: clamped assembly on `mesh`.
pub fn assemble(mesh: &TriMesh, tau: f64) -> Result<(SparseSymMatrix, SparseSymMatrix, DofMap)> {
    let space = MorleySpace::new(mesh)?;
    let (a, b) = space.assemble(tau)?;
    Ok((a, b, space.dofs))
}

/// Piecewise quadratic given by its free Morley coefficients.
#[derive(Clone)]
pub struct MorleyField<'s, 'm> {
    space: &'s MorleySpace<'m>,
    coeffs: Vec<f64>,
}

impl<'s, 'm> MorleyField<'s, 'm> {
    pub fn space(&self) -> &'s MorleySpace<'m> {
        self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Local DOF values of element `t`; constrained functionals read as zero.
    pub fn local_values(&self, t: usize) -> [f64; 6] {
        let dofs = self.space.dofs.local_dofs(self.space.mesh, t);
        dofs.map(|d| d.map_or(0.0, |d| self.coeffs[d]))
    }

    /// Value, gradient and Hessian at a physical point of element `t`.
    pub fn eval_at(&self, t: usize, p: Point) -> (f64, [f64; 2], Hessian) {
        let basis = &self.space.bases[t];
        let d = self.local_values(t);
        let v = basis.values(p);
        let g = basis.gradients(p);
        let mut value = 0.0;
        let mut grad = [0.0; 2];
        for i in 0..6 {
            value += d[i] * v[i];
            grad[0] += d[i] * g[i][0];
            grad[1] += d[i] * g[i][1];
        }
        (value, grad, self.hessian(t))
    }

    pub fn hessian(&self, t: usize) -> Hessian {
        let d = self.local_values(t);
        let h = self.space.bases[t].hessians();
        let mut out = [[0.0; 2]; 2];
        for i in 0..6 {
            for r in 0..2 {
                for c in 0..2 {
                    out[r][c] += d[i] * h[i][r][c];
                }
            }
        }
        out
    }

    pub fn evaluate(&self, t: usize, bary: [f64; 3]) -> Result<(f64, [f64; 2], Hessian)> {
        let nt = self.space.mesh.n_triangles();
        if t >= nt {
            return Err(Error::IndexOutOfRange { index: t, len: nt });
        }
        Ok(self.eval_at(t, to_physical(self.space.mesh.triangle_points(t), bary)))
    }

    /// CSV dump `dof_id,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "dof_id,value")?;
        for (i, v) in self.coeffs.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        Ok(())
    }
}

/// Source of the data the Morley interpolant needs.
pub trait Probe {
    fn value(&self, p: Point) -> f64;
    /// Mean over segment a→b of the derivative along the unit `normal`.
    fn normal_derivative_mean(&self, a: Point, b: Point, normal: Point) -> f64;
}

/// Probe that can also be differentiated twice pointwise.
pub trait SmoothProbe: Probe {
    fn gradient(&self, p: Point) -> [f64; 2];
    fn hessian(&self, p: Point) -> Hessian;
}

/// Mean of `grad·normal` over a→b: five-point Gauss on `segments` equal pieces.
pub fn line_normal_mean(grad: impl Fn(Point) -> [f64; 2], a: Point, b: Point, normal: Point, segments: usize) -> f64 {
    let segments = segments.max(1);
    let mut sum = 0.0;
    for s in 0..segments {
        for (x, w) in gauss_unit::<5>() {
            let t = (s as f64 + x) / segments as f64;
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let g = grad(p);
            sum += w * (g[0] * normal[0] + g[1] * normal[1]);
        }
    }
    sum / segments as f64
}

/// Probe built from closures for the value, gradient and Hessian.
pub struct FnProbe<V, G, H> {
    pub value: V,
    pub gradient: G,
    pub hessian: H,
    pub segments: usize,
}

impl<V, G, H> FnProbe<V, G, H>
where
    V: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
    H: Fn(Point) -> Hessian,
{
    pub fn new(value: V, gradient: G, hessian: H) -> Self {
        FnProbe {
            value,
            gradient,
            hessian,
            segments: 1,
        }
    }
}

impl<V, G, H> Probe for FnProbe<V, G, H>
where
    V: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
    H: Fn(Point) -> Hessian,
{
    fn value(&self, p: Point) -> f64 {
        (self.value)(p)
    }

    fn normal_derivative_mean(&self, a: Point, b: Point, normal: Point) -> f64 {
        line_normal_mean(&self.gradient, a, b, normal, self.segments)
    }
}

impl<V, G, H> SmoothProbe for FnProbe<V, G, H>
where
    V: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
    H: Fn(Point) -> Hessian,
{
    fn gradient(&self, p: Point) -> [f64; 2] {
        (self.gradient)(p)
    }

    fn hessian(&self, p: Point) -> Hessian {
        (self.hessian)(p)
    }
}

/// The four terms of the eigenvalue error identity
/// λ − λ_h = ‖u−u_h‖²_h − λ_h‖u−u_h‖²_b − 2λ_h b(u−I_h u, u_h) + 2a_h(u−I_h u, u_h).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityTerms {
    pub energy_error: f64,
    pub mass_error: f64,
    pub interpolation_mass: f64,
    pub interpolation_energy: f64,
    /// λ_ref − λ_h, for comparison with the sum of the terms.
    pub eigenvalue_gap: f64,
}

impl IdentityTerms {
    pub fn sum(&self) -> f64 {
        self.energy_error + self.mass_error + self.interpolation_mass + self.interpolation_energy
    }
}

/// Evaluates the identity terms with `u_ref` standing in for the exact
/// eigenfunction. Each element is split `refine` times into four similar
/// sub-triangles, each integrated with the seven-point rule.
pub fn identity_terms<P: SmoothProbe + Sync + ?Sized>(
    u_h: &MorleyField,
    lambda_h: f64,
    u_ref: &P,
    lambda_ref: f64,
    tau: f64,
    refine: usize,
) -> Result<IdentityTerms> {
    let space = u_h.space();
    let mesh = space.mesh();
    let interp = space.interpolate(u_ref);
    let subs = sub_triangles(refine);
    let rule = triangle_degree5();

    let per_element: Vec<[f64; 5]> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let pts = mesh.triangle_points(t);
            let area = mesh.signed_area(t);
            let hh = u_h.hessian(t);
            let hi = interp.hessian(t);
            let mut acc = [0.0; 5];
            for sub in &subs {
                for q in &rule {
                    let bary: [f64; 3] = std::array::from_fn(|k| (0..3).map(|c| q.bary[c] * sub[c][k]).sum());
                    let p = to_physical(pts, bary);
                    let w = q.weight * area / subs.len() as f64;
                    let (vh, gh, _) = u_h.eval_at(t, p);
                    let (vi, gi, _) = interp.eval_at(t, p);
                    let v = u_ref.value(p);
                    let g = u_ref.gradient(p);
                    let h = u_ref.hessian(p);
                    let e = v - vh;
                    let ge = [g[0] - gh[0], g[1] - gh[1]];
                    let he = sub_hessian(&h, &hh);
                    let ei = v - vi;
                    let gei = [g[0] - gi[0], g[1] - gi[1]];
                    let hei = sub_hessian(&h, &hi);
                    acc[0] += w * (frobenius(&he, &he) + tau * (ge[0] * ge[0] + ge[1] * ge[1]));
                    acc[1] += w * e * e;
                    acc[2] += w * ei * vh;
                    acc[3] += w * (frobenius(&hei, &hh) + tau * (gei[0] * gh[0] + gei[1] * gh[1]));
                    acc[4] += w * v * v;
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; 5];
    for acc in &per_element {
        for k in 0..5 {
            total[k] += acc[k];
        }
    }
    let norm = total[4].sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Normalization(norm));
    }
    Ok(IdentityTerms {
        energy_error: total[0],
        mass_error: -lambda_h * total[1],
        interpolation_mass: -2.0 * lambda_h * total[2],
        interpolation_energy: 2.0 * total[3],
        eigenvalue_gap: lambda_ref - lambda_h,
    })
}

fn sub_hessian(a: &Hessian, b: &Hessian) -> Hessian {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

/// Barycentric corners of the 4^levels sub-triangles of regular subdivision.
pub(crate) fn sub_triangles(levels: usize) -> Vec<[[f64; 3]; 3]> {
    let mut tris = vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(4 * tris.len());
        for [a, b, c] in tris {
            let mid = |p: [f64; 3], q: [f64; 3]| -> [f64; 3] { std::array::from_fn(|k| 0.5 * (p[k] + q[k])) };
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [bc, ca, ab]]);
        }
        tris = next;
    }
    tris
}
