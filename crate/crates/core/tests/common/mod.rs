#![allow(dead_code)]

use clamped_plate::bfs::{assemble_bfs, BfsField};
use clamped_plate::linalg::smallest_eigs;
use clamped_plate::mesh::Point;
use clamped_plate::morley::{line_normal_mean, to_physical, Hessian, MorleyField, Probe, SmoothProbe};
use clamped_plate::quadrature::triangle_degree5;
use clamped_plate::RectMesh;

/// First BFS eigenpair on `mesh` as a field, with its eigenvalue.
pub fn bfs_first_mode(mesh: &RectMesh, tau: f64) -> (BfsField<'_>, f64) {
    let (a, b, dofs) = assemble_bfs(mesh, tau).unwrap();
    let pairs = smallest_eigs(&a, &b, 1).unwrap();
    let lambda = pairs[0].lambda;
    let mut field = BfsField::new(mesh, dofs, pairs[0].x.clone()).unwrap();
    field.segments = 8;
    (field, lambda)
}

/// ∫ u_h · p over the Morley mesh, seven-point rule on each element.
pub fn cross_mass<P: Probe + ?Sized>(u_h: &MorleyField, p: &P) -> f64 {
    let mesh = u_h.space().mesh();
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        let pts = mesh.triangle_points(t);
        for q in triangle_degree5() {
            let x = to_physical(pts, q.bary);
            s += q.weight * mesh.signed_area(t) * u_h.eval_at(t, x).0 * p.value(x);
        }
    }
    s
}

/// A Morley field viewed as a pointwise function: each point is evaluated on
/// the lowest-index element containing it.
pub struct MorleyProbe<'a, 's, 'm> {
    pub field: &'a MorleyField<'s, 'm>,
}

impl MorleyProbe<'_, '_, '_> {
    fn locate(&self, p: Point) -> usize {
        let mesh = self.field.space().mesh();
        (0..mesh.n_triangles())
            .find(|&t| {
                let [a, b, c] = mesh.triangle_points(t);
                let cross = |u: Point, v: Point, w: Point| (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0]);
                let tol = -1e-12;
                cross(a, b, p) >= tol && cross(b, c, p) >= tol && cross(c, a, p) >= tol
            })
            .expect("point inside the mesh")
    }
}

impl Probe for MorleyProbe<'_, '_, '_> {
    fn value(&self, p: Point) -> f64 {
        self.field.eval_at(self.locate(p), p).0
    }

    fn normal_derivative_mean(&self, a: Point, b: Point, normal: Point) -> f64 {
        let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let t = self.locate(m);
        line_normal_mean(|p| self.field.eval_at(t, p).1, a, b, normal, 1)
    }
}

impl SmoothProbe for MorleyProbe<'_, '_, '_> {
    fn gradient(&self, p: Point) -> [f64; 2] {
        self.field.eval_at(self.locate(p), p).1
    }

    fn hessian(&self, p: Point) -> Hessian {
        self.field.hessian(self.locate(p))
    }
}
