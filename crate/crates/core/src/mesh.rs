//! Triangular and rectangular meshes of the unit square and the L-shaped domain.
//!
//! Triangle meshes carry a refinement-edge label per triangle so they can be
//! refined by newest-vertex bisection. Uniform refinement splits every
//! triangle into four similar children and keeps the labels, so a refined
//! initial mesh is the same pattern at half the mesh size.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    /// (0,1)²
    Square,
    /// (0,1)×(0,1/2) ∪ (0,1/2)×(1/2,1)
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::Square => 1.0,
            Domain::LShape => 0.75,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Square => "square",
            Domain::LShape => "lshape",
        }
    }

    /// Grid cells per unit length for the coarsest mesh of the uniform tables (h = √2/4).
    pub fn base_subdivisions(self) -> usize {
        match self {
            Domain::Square => 4,
            Domain::LShape => 2,
        }
    }

    /// Cells per unit length when the initial construction parameter is `n`.
    pub fn cells_per_unit(self, n: usize) -> usize {
        match self {
            Domain::Square => n,
            Domain::LShape => 2 * n,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Domain::Square),
            "lshape" | "l-shape" => Ok(Domain::LShape),
            other => Err(Error::InvalidArgument(format!("unknown domain '{other}'"))),
        }
    }
}

/// Mesh edge with canonical orientation `vertices[0] < vertices[1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// First entry is always present; the second is `None` on the boundary.
    pub triangles: (usize, Option<usize>),
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles.1.is_none()
    }
}

/// Conforming triangulation with edge topology and refinement-edge labels.
///
/// Local edge `i` of a triangle is the edge opposite its local vertex `i`.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    refinement_edge: Vec<u8>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
}

impl TriMesh {
    /// Builds the edge topology for a list of counterclockwise triangles.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, refinement_edge: Vec<u8>) -> Result<Self> {
        if triangles.len() != refinement_edge.len() {
            return Err(Error::DimensionMismatch {
                expected: triangles.len(),
                got: refinement_edge.len(),
            });
        }
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + 2);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            if refinement_edge[t] > 2 {
                return Err(Error::InvalidMesh(format!("triangle {t} has refinement label {}", refinement_edge[t])));
            }
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = match edge_ids.get(&key) {
                    Some(&id) => {
                        let edge = &mut edges[id];
                        if edge.triangles.1.is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({}, {}) shared by more than two triangles",
                                key.0, key.1
                            )));
                        }
                        edge.triangles.1 = Some(t);
                        id
                    }
                    None => {
                        let id = edges.len();
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            triangles: (t, None),
                        });
                        edge_ids.insert(key, id);
                        id
                    }
                };
                *slot = id;
            }
            triangle_edges.push(local);
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for e in edges.iter().filter(|e| e.is_boundary()) {
            boundary_vertex[e.vertices[0]] = true;
            boundary_vertex[e.vertices[1]] = true;
        }
        Ok(TriMesh {
            vertices,
            triangles,
            refinement_edge,
            edges,
            triangle_edges,
            boundary_vertex,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Local index (0..3) of the refinement edge of triangle `t`.
    pub fn refinement_edge(&self, t: usize) -> usize {
        self.refinement_edge[t] as usize
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Global edge ids of triangle `t`; entry `i` is opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn n_boundary_vertices(&self) -> usize {
        self.boundary_vertex.iter().filter(|&&b| b).count()
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p, q, r] = self.triangle_points(t);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
    }

    /// Largest triangle diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.triangle_points(t);
            for i in 0..3 {
                let o = p[i];
                let u = [p[(i + 1) % 3][0] - o[0], p[(i + 1) % 3][1] - o[1]];
                let w = [p[(i + 2) % 3][0] - o[0], p[(i + 2) % 3][1] - o[1]];
                let cos = (u[0] * w[0] + u[1] * w[1]) / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Checks orientation, conformity, edge/adjacency consistency and the
    /// Euler relation for a simply connected domain.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            let area = self.signed_area(t);
            if area <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} has signed area {area:e}")));
            }
        }
        let mut uses = vec![0usize; self.n_edges()];
        for (t, te) in self.triangle_edges.iter().enumerate() {
            let tri = self.triangles[t];
            for i in 0..3 {
                let e = &self.edges[te[i]];
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                if e.vertices != [a.min(b), a.max(b)] {
                    return Err(Error::InvalidMesh(format!("triangle {t} local edge {i} mismatches edge {}", te[i])));
                }
                if e.vertices[0] >= e.vertices[1] {
                    return Err(Error::InvalidMesh(format!("edge {} not stored low-index first", te[i])));
                }
                if e.triangles.0 != t && e.triangles.1 != Some(t) {
                    return Err(Error::InvalidMesh(format!("edge {} does not list adjacent triangle {t}", te[i])));
                }
                uses[te[i]] += 1;
            }
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let expected = if edge.is_boundary() { 1 } else { 2 };
            if uses[e] != expected {
                return Err(Error::InvalidMesh(format!("edge {e} used by {} triangles", uses[e])));
            }
            // An interior edge shared by two triangles must be traversed in opposite directions.
            if let Some(t1) = edge.triangles.1 {
                let t0 = edge.triangles.0;
                if direction(self.triangles[t0], edge.vertices) == direction(self.triangles[t1], edge.vertices) {
                    return Err(Error::InvalidMesh(format!("edge {e} has inconsistent winding")));
                }
            }
        }
        self.check_hanging_vertices()?;
        let euler = self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64;
        if euler != 1 {
            return Err(Error::InvalidMesh(format!("Euler characteristic {euler}, expected 1")));
        }
        Ok(())
    }

    fn check_hanging_vertices(&self) -> Result<()> {
        // Vertices are only ever created at edge midpoints, so a hanging vertex
        // would show up as a vertex at the midpoint of an existing edge.
        let mut lookup: HashMap<(i64, i64), usize> = HashMap::with_capacity(self.n_vertices());
        for (i, p) in self.vertices.iter().enumerate() {
            lookup.insert(quantize(*p), i);
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let a = self.vertices[edge.vertices[0]];
            let b = self.vertices[edge.vertices[1]];
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            if let Some(&v) = lookup.get(&quantize(mid)) {
                return Err(Error::InvalidMesh(format!("vertex {v} hangs on edge {e}")));
            }
        }
        Ok(())
    }

    /// Regular refinement: every triangle is split through its edge midpoints
    /// into four similar children that inherit the parent's refinement label.
    pub fn uniform_refine(&self) -> TriMesh {
        let nv = self.n_vertices();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|e| midpoint(self.vertices[e.vertices[0]], self.vertices[e.vertices[1]])));
        let mut triangles = Vec::with_capacity(4 * self.n_triangles());
        let mut labels = Vec::with_capacity(4 * self.n_triangles());
        for (t, &[v0, v1, v2]) in self.triangles.iter().enumerate() {
            let te = self.triangle_edges[t];
            let m0 = nv + te[0];
            let m1 = nv + te[1];
            let m2 = nv + te[2];
            let label = self.refinement_edge[t];
            for child in [[v0, m2, m1], [m2, v1, m0], [m1, m0, v2], [m0, m1, m2]] {
                triangles.push(child);
                labels.push(label);
            }
        }
        TriMesh::new(vertices, triangles, labels).expect("uniform refinement of a valid mesh is valid")
    }

    /// Newest-vertex bisection of the marked triangles followed by closure
    /// until the mesh is conforming.
    ///
    /// Panics if a marked index is out of range.
    pub fn bisect(&self, marked: &[usize]) -> TriMesh {
        let mut edge_marked = vec![false; self.n_edges()];
        let mut queue = Vec::new();
        for &t in marked {
            assert!(t < self.n_triangles(), "marked triangle {t} out of range");
            let e = self.triangle_edges[t][self.refinement_edge(t)];
            if !edge_marked[e] {
                edge_marked[e] = true;
                queue.push(e);
            }
        }
        if queue.is_empty() {
            return self.clone();
        }
        // Closure: a triangle with any marked edge must also bisect its refinement edge.
        while let Some(e) = queue.pop() {
            let edge = &self.edges[e];
            for t in std::iter::once(edge.triangles.0).chain(edge.triangles.1) {
                let r = self.triangle_edges[t][self.refinement_edge(t)];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    queue.push(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut mid = vec![usize::MAX; self.n_edges()];
        for (e, edge) in self.edges.iter().enumerate() {
            if edge_marked[e] {
                mid[e] = vertices.len();
                vertices.push(midpoint(self.vertices[edge.vertices[0]], self.vertices[edge.vertices[1]]));
            }
        }

        let n_new = vertices.len() - self.n_vertices();
        let mut triangles = Vec::with_capacity(self.n_triangles() + 2 * n_new);
        let mut labels = Vec::with_capacity(self.n_triangles() + 2 * n_new);
        for t in 0..self.n_triangles() {
            let tri = self.triangles[t];
            let te = self.triangle_edges[t];
            let r = self.refinement_edge(t);
            let e_ab = te[r];
            if !edge_marked[e_ab] {
                triangles.push(tri);
                labels.push(r as u8);
                continue;
            }
            let c = tri[r];
            let a = tri[(r + 1) % 3];
            let b = tri[(r + 2) % 3];
            let e_ca = te[(r + 2) % 3];
            let e_bc = te[(r + 1) % 3];
            let m = mid[e_ab];
            // Children (c, a, m) and (c, m, b); the new vertex m is opposite each child's refinement edge.
            if edge_marked[e_ca] {
                let m1 = mid[e_ca];
                triangles.push([m, c, m1]);
                labels.push(2);
                triangles.push([m, m1, a]);
                labels.push(1);
            } else {
                triangles.push([c, a, m]);
                labels.push(2);
            }
            if edge_marked[e_bc] {
                let m2 = mid[e_bc];
                triangles.push([m, b, m2]);
                labels.push(2);
                triangles.push([m, m2, c]);
                labels.push(1);
            } else {
                triangles.push([c, m, b]);
                labels.push(1);
            }
        }
        TriMesh::new(vertices, triangles, labels).expect("bisection of a valid mesh is valid")
    }

    /// Plain-text dump: header `V E T`, vertex coordinates, then 0-based triangles.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.n_vertices(), self.n_edges(), self.n_triangles())?;
        for p in &self.vertices {
            writeln!(out, "{} {}", p[0], p[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn direction(tri: [usize; 3], edge: [usize; 2]) -> bool {
    (0..3).any(|i| tri[i] == edge[0] && tri[(i + 1) % 3] == edge[1])
}

fn quantize(p: Point) -> (i64, i64) {
    const SCALE: f64 = (1u64 << 40) as f64;
    ((p[0] * SCALE).round() as i64, (p[1] * SCALE).round() as i64)
}

pub(crate) fn dist(p: Point, q: Point) -> f64 {
    (q[0] - p[0]).hypot(q[1] - p[1])
}

pub(crate) fn midpoint(p: Point, q: Point) -> Point {
    [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
}

/// Grid of `cells × cells` squares of side `1/cells`, restricted to the domain.
/// Returns vertex coordinates, a lookup from grid index to vertex id, and the kept cells.
fn grid(domain: Domain, cells: usize) -> (Vec<Point>, Vec<Option<usize>>, Vec<(usize, usize)>) {
    let half = cells / 2;
    let in_domain_cell = |i: usize, j: usize| match domain {
        Domain::Square => true,
        Domain::LShape => !(i >= half && j >= half),
    };
    let in_domain_node = |i: usize, j: usize| match domain {
        Domain::Square => true,
        Domain::LShape => i <= half || j <= half,
    };
    let h = 1.0 / cells as f64;
    let mut ids = vec![None; (cells + 1) * (cells + 1)];
    let mut points = Vec::new();
    for j in 0..=cells {
        for i in 0..=cells {
            if in_domain_node(i, j) {
                ids[j * (cells + 1) + i] = Some(points.len());
                points.push([i as f64 * h, j as f64 * h]);
            }
        }
    }
    let mut kept = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            if in_domain_cell(i, j) {
                kept.push((i, j));
            }
        }
    }
    (points, ids, kept)
}

fn diagonal_mesh(domain: Domain, cells: usize) -> TriMesh {
    let (vertices, ids, kept) = grid(domain, cells);
    let id = |i: usize, j: usize| ids[j * (cells + 1) + i].expect("cell corner inside the domain");
    let mut triangles = Vec::with_capacity(2 * kept.len());
    let mut labels = Vec::with_capacity(2 * kept.len());
    for (i, j) in kept {
        let ll = id(i, j);
        let lr = id(i + 1, j);
        let ur = id(i + 1, j + 1);
        let ul = id(i, j + 1);
        // Hypotenuse ll-ur is the refinement edge of both halves.
        triangles.push([ll, lr, ur]);
        labels.push(1);
        triangles.push([ll, ur, ul]);
        labels.push(2);
    }
    TriMesh::new(vertices, triangles, labels).expect("structured mesh is valid")
}

/// Unit square split into `n × n` squares, each cut along its lower-left to
/// upper-right diagonal; h = √2/n.
pub fn build_initial_square(n: usize) -> TriMesh {
    assert!(n >= 1, "need at least one subdivision");
    diagonal_mesh(Domain::Square, n)
}

/// L-shaped domain tiled by squares of side 1/(2n), each cut along its
/// lower-left to upper-right diagonal; h = √2/(2n).
pub fn build_initial_lshape(n: usize) -> TriMesh {
    assert!(n >= 1, "need at least one subdivision");
    diagonal_mesh(Domain::LShape, 2 * n)
}

pub fn build_initial(domain: Domain, n: usize) -> TriMesh {
    match domain {
        Domain::Square => build_initial_square(n),
        Domain::LShape => build_initial_lshape(n),
    }
}

/// Uniform axis-aligned rectangle mesh.
#[derive(Clone, Debug)]
pub struct RectMesh {
    nodes: Vec<Point>,
    cells: Vec<[usize; 4]>,
    hx: f64,
    hy: f64,
    boundary: Vec<bool>,
    cells_per_unit: usize,
    cell_lookup: Vec<Option<usize>>,
}

impl RectMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Node ids counterclockwise from the lower-left corner.
    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn is_boundary_node(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn n_interior_nodes(&self) -> usize {
        self.boundary.iter().filter(|&&b| !b).count()
    }

    /// Cell in grid column `i`, row `j`, if it belongs to the domain.
    pub fn cell_at(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.cells_per_unit || j >= self.cells_per_unit {
            return None;
        }
        self.cell_lookup[j * self.cells_per_unit + i]
    }

    /// Cell containing `p`; points on shared cell sides go to the cell above/right when it exists.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let m = self.cells_per_unit;
        let i = ((p[0] / self.hx).floor().max(0.0) as usize).min(m - 1);
        let j = ((p[1] / self.hy).floor().max(0.0) as usize).min(m - 1);
        self.cell_at(i, j)
            .or_else(|| i.checked_sub(1).and_then(|i| self.cell_at(i, j)))
            .or_else(|| j.checked_sub(1).and_then(|j| self.cell_at(i, j)))
    }
}

/// Uniform square grid: side 1/n on the square, 1/(2n) on the L-shape.
pub fn build_rect_mesh(domain: Domain, n: usize) -> RectMesh {
    assert!(n >= 1, "need at least one subdivision");
    let cells_per_unit = domain.cells_per_unit(n);
    let (nodes, ids, kept) = grid(domain, cells_per_unit);
    let id = |i: usize, j: usize| ids[j * (cells_per_unit + 1) + i].expect("cell corner inside the domain");
    let mut incident = vec![0u8; nodes.len()];
    let mut cells = Vec::with_capacity(kept.len());
    let mut cell_lookup = vec![None; cells_per_unit * cells_per_unit];
    for (i, j) in kept {
        cell_lookup[j * cells_per_unit + i] = Some(cells.len());
        let c = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
        for &v in &c {
            incident[v] += 1;
        }
        cells.push(c);
    }
    let h = 1.0 / cells_per_unit as f64;
    RectMesh {
        boundary: incident.iter().map(|&k| k < 4).collect(),
        nodes,
        cells,
        hx: h,
        hy: h,
        cells_per_unit,
        cell_lookup,
    }
}
