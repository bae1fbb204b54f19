//! Quadrature rules on triangles (barycentric, weights summing to one) and on [0, 1].

/// Barycentric point and weight relative to the triangle area.
#[derive(Clone, Copy, Debug)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Edge midpoints, exact for degree 2.
pub fn triangle_degree2() -> [TriPoint; 3] {
    let w = 1.0 / 3.0;
    [
        TriPoint { bary: [0.0, 0.5, 0.5], weight: w },
        TriPoint { bary: [0.5, 0.0, 0.5], weight: w },
        TriPoint { bary: [0.5, 0.5, 0.0], weight: w },
    ]
}

/// Seven-point rule exact for degree 5.
pub fn triangle_degree5() -> [TriPoint; 7] {
    let s = 15f64.sqrt();
    let a1 = (6.0 - s) / 21.0;
    let b1 = (9.0 + 2.0 * s) / 21.0;
    let w1 = (155.0 - s) / 1200.0;
    let a2 = (6.0 + s) / 21.0;
    let b2 = (9.0 - 2.0 * s) / 21.0;
    let w2 = (155.0 + s) / 1200.0;
    [
        TriPoint { bary: [1.0 / 3.0; 3], weight: 9.0 / 40.0 },
        TriPoint { bary: [b1, a1, a1], weight: w1 },
        TriPoint { bary: [a1, b1, a1], weight: w1 },
        TriPoint { bary: [a1, a1, b1], weight: w1 },
        TriPoint { bary: [b2, a2, a2], weight: w2 },
        TriPoint { bary: [a2, b2, a2], weight: w2 },
        TriPoint { bary: [a2, a2, b2], weight: w2 },
    ]
}

/// Gauss–Legendre rule with `N` points mapped to [0, 1]; returns (node, weight) pairs
/// with weights summing to one. Supported: N = 1..=5.
pub fn gauss_unit<const N: usize>() -> [(f64, f64); N] {
    let (x, w): (&[f64], &[f64]) = match N {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
        ),
        4 => (
            &[
                -0.861_136_311_594_052_6,
                -0.339_981_043_584_856_3,
                0.339_981_043_584_856_3,
                0.861_136_311_594_052_6,
            ],
            &[
                0.347_854_845_137_453_9,
                0.652_145_154_862_546_1,
                0.652_145_154_862_546_1,
                0.347_854_845_137_453_9,
            ],
        ),
        5 => (
            &[
                -0.906_179_845_938_664,
                -0.538_469_310_105_683_1,
                0.0,
                0.538_469_310_105_683_1,
                0.906_179_845_938_664,
            ],
            &[
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ],
        ),
        _ => panic!("Gauss rule with {N} points not tabulated"),
    };
    std::array::from_fn(|i| (0.5 * (x[i] + 1.0), 0.5 * w[i]))
}
