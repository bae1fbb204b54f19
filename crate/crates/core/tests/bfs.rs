use clamped_plate::bfs::{assemble_bfs, bfs_eigen_table, BfsDofMap, BfsField};
use clamped_plate::mesh::{build_rect_mesh, Domain, Point};
use proptest::prelude::*;

#[test]
fn free_dof_counts() {
    let counts = |domain: Domain| -> Vec<usize> {
        (0..4)
            .map(|l| BfsDofMap::new(&build_rect_mesh(domain, domain.base_subdivisions() << l)).n_free())
            .collect()
    };
    assert_eq!(counts(Domain::Square), [36, 196, 900, 3844]);
    assert_eq!(counts(Domain::LShape), [20, 132, 644, 2820]);
    let mesh = build_rect_mesh(Domain::LShape, 3);
    assert_eq!(BfsDofMap::new(&mesh).n_free(), 4 * mesh.n_interior_nodes());
}

#[test]
fn empty_space_is_an_error() {
    assert!(assemble_bfs(&build_rect_mesh(Domain::Square, 1), 0.0).is_err());
}

#[test]
fn square_table_values() {
    let rows = bfs_eigen_table(Domain::Square, 0.0, 2, 2).unwrap();
    assert!((rows[1].lambda1.unwrap() - 1295.340).abs() <= 0.01);
    let rows = bfs_eigen_table(Domain::Square, 100.0, 3, 2).unwrap();
    assert!((rows[2].lambda2.unwrap() - 11014.525).abs() <= 0.5);
}

#[test]
fn lshape_tension_value() {
    let rows = bfs_eigen_table(Domain::LShape, 10.0, 4, 2).unwrap();
    assert!((rows[3].lambda1.unwrap() - 7252.764).abs() <= 0.5);
}

#[test]
fn nested_spaces_give_nonincreasing_eigenvalues() {
    for domain in [Domain::Square, Domain::LShape] {
        let rows = bfs_eigen_table(domain, 10.0, 4, 2).unwrap();
        for w in rows.windows(2) {
            for j in 1..=2 {
                assert!(w[1].lambda(j).unwrap() <= w[0].lambda(j).unwrap() + 1e-8);
            }
        }
    }
}

/// Interpolant of a smooth function: nodal value, first and mixed derivatives.
fn interpolate<'m>(mesh: &'m clamped_plate::RectMesh, f: impl Fn(Point) -> [f64; 4]) -> BfsField<'m> {
    let dofs = BfsDofMap::new(mesh);
    let (hx, hy) = mesh.cell_size();
    let mut coeffs = vec![0.0; dofs.n_free()];
    for (v, &p) in mesh.nodes().iter().enumerate() {
        if let Some(b) = dofs.node_base(v) {
            let d = f(p);
            coeffs[b] = d[0];
            coeffs[b + 1] = d[1] * hx;
            coeffs[b + 2] = d[2] * hy;
            coeffs[b + 3] = d[3] * hx * hy;
        }
    }
    BfsField::new(mesh, dofs, coeffs).unwrap()
}

#[test]
fn interpolant_is_c1_across_cells() {
    let mesh = build_rect_mesh(Domain::LShape, 3);
    let field = interpolate(&mesh, |p| {
        let (x, y) = (p[0], p[1]);
        [x * x * y * (1.0 - y), 2.0 * x * y * (1.0 - y), x * x * (1.0 - 2.0 * y), 2.0 * x * (1.0 - 2.0 * y)]
    });
    let (hx, _) = mesh.cell_size();
    let mut checked = 0;
    for c in 0..mesh.n_cells() {
        let ll = mesh.nodes()[mesh.cells()[c][0]];
        // Right neighbour shares the vertical edge x = ll.x + hx.
        let right = (0..mesh.n_cells()).find(|&d| mesh.nodes()[mesh.cells()[d][0]] == [ll[0] + hx, ll[1]]);
        let Some(d) = right else { continue };
        for s in [0.1, 0.37, 0.8] {
            let p = [ll[0] + hx, ll[1] + s * hx];
            let (v0, g0, _) = field.eval_in_cell(c, p);
            let (v1, g1, _) = field.eval_in_cell(d, p);
            assert!((v0 - v1).abs() < 1e-10);
            assert!((g0[0] - g1[0]).abs() < 1e-10 && (g0[1] - g1[1]).abs() < 1e-10);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn nodal_data_round_trips() {
    let mesh = build_rect_mesh(Domain::Square, 4);
    let field = interpolate(&mesh, |p| [p[0] * p[1], p[1], p[0], 1.0]);
    for v in 0..mesh.n_nodes() {
        let d = field.node_derivatives(v);
        let p = mesh.nodes()[v];
        if mesh.is_boundary_node(v) {
            assert_eq!(d, [0.0; 4]);
        } else {
            assert!((d[0] - p[0] * p[1]).abs() < 1e-14);
            assert!((d[1] - p[1]).abs() < 1e-14 && (d[2] - p[0]).abs() < 1e-14 && (d[3] - 1.0).abs() < 1e-14);
            let (val, g, h) = field.eval(p).unwrap();
            assert!((val - p[0] * p[1]).abs() < 1e-13);
            assert!((g[0] - p[1]).abs() < 1e-12 && (g[1] - p[0]).abs() < 1e-12);
            assert!(h[0][1].is_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn assembled_forms_are_positive(
        lshape in any::<bool>(),
        tau in 0.0f64..200.0,
        seed in proptest::collection::vec(-1.0f64..1.0, 20),
    ) {
        let domain = if lshape { Domain::LShape } else { Domain::Square };
        let (a, b, dofs) = assemble_bfs(&build_rect_mesh(domain, domain.base_subdivisions()), tau).unwrap();
        let v: Vec<f64> = (0..dofs.n_free()).map(|i| seed[i % seed.len()] + 1e-3 * i as f64).collect();
        prop_assert!(a.quad_form(&v) > 0.0);
        prop_assert!(b.quad_form(&v) > 0.0);
        prop_assert_eq!(a.max_asymmetry(), 0.0);
    }
}
