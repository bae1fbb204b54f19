//! Smallest eigenpairs of `A x = λ B x` for SPD `A`, `B`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cholesky::{factorize_with, FactorOptions};
use super::dense::{self, DenseMatrix};
use super::sparse::{dot, norm2, SparseSymMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// B-normalized; largest-magnitude entry positive.
    pub x: Vec<f64>,
    /// ‖A x − λ B x‖₂ / (λ ‖B x‖₂)
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Extra vectors carried beyond the `k` targets.
    pub guard_vectors: usize,
    /// Relative eigenvalue change between sweeps regarded as settled.
    pub stagnation: f64,
    pub factor: FactorOptions,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tolerance: 1e-9,
            max_iterations: 500,
            seed: 42,
            guard_vectors: 3,
            stagnation: 1e-11,
            factor: FactorOptions::default(),
        }
    }
}

/// The `k` smallest eigenpairs by shift-invert (shift 0) block subspace
/// iteration with Rayleigh–Ritz projection. Ascending order.
///
/// The residual target is `tolerance`, raised to a small multiple of the
/// double-precision floor when that floor is larger (very fine meshes).
pub fn smallest_eigs(a: &SparseSymMatrix, b: &SparseSymMatrix, k: usize) -> Result<Vec<EigenPair>> {
    smallest_eigs_with(a, b, k, &EigenOptions::default())
}

pub fn smallest_eigs_with(a: &SparseSymMatrix, b: &SparseSymMatrix, k: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.n() });
    }
    if k == 0 || k > n {
        return Err(Error::TooManyEigenpairs { k, n });
    }
    let p = (k + opts.guard_vectors).min(n);
    let solver = factorize_with(a, &opts.factor)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut block: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    b_orthonormalize(b, &mut block)?;

    let mut previous = vec![f64::NAN; k];
    let mut residuals = vec![f64::INFINITY; k];
    for iteration in 1..=opts.max_iterations {
        let mut y = Vec::with_capacity(p);
        for x in &block {
            y.push(solver.solve(&b.mul_vec(x))?);
        }
        let ay: Vec<Vec<f64>> = y.iter().map(|v| a.mul_vec(v)).collect();
        let by: Vec<Vec<f64>> = y.iter().map(|v| b.mul_vec(v)).collect();
        let mut ar = DenseMatrix::zeros(p);
        let mut br = DenseMatrix::zeros(p);
        for i in 0..p {
            for j in 0..=i {
                let av = 0.5 * (dot(&y[i], &ay[j]) + dot(&y[j], &ay[i]));
                let bv = 0.5 * (dot(&y[i], &by[j]) + dot(&y[j], &by[i]));
                ar[(i, j)] = av;
                ar[(j, i)] = av;
                br[(i, j)] = bv;
                br[(j, i)] = bv;
            }
        }
        let (theta, q) = dense::generalized_eigen(&ar, &br)?;

        let combine = |src: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (i, v) in src.iter().enumerate() {
                let c = q[(i, col)];
                out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
            }
            out
        };
        block = (0..p).map(|c| combine(&y, c)).collect();

        let mut settled = true;
        for j in 0..k {
            let ax = combine(&ay, j);
            let bx = combine(&by, j);
            let r: Vec<f64> = ax.iter().zip(&bx).map(|(u, v)| u - theta[j] * v).collect();
            let bx_norm = norm2(&bx);
            residuals[j] = norm2(&r) / (theta[j] * bx_norm);
            let change = ((theta[j] - previous[j]) / theta[j]).abs();
            let reachable = opts.tolerance.max(FLOOR_FACTOR * rounding_floor(a, b, &block[j], theta[j], bx_norm));
            if !(change <= opts.stagnation && residuals[j] <= reachable) {
                settled = false;
            }
            previous[j] = theta[j];
        }
        if settled {
            let mut out = Vec::with_capacity(k);
            for (j, mut x) in block.into_iter().take(k).enumerate() {
                let scale = 1.0 / b.quad_form(&x).sqrt();
                x.iter_mut().for_each(|v| *v *= scale);
                fix_sign(&mut x);
                out.push(EigenPair {
                    lambda: theta[j],
                    x,
                    residual: residuals[j],
                    iterations: iteration,
                });
            }
            return Ok(out);
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residuals,
    })
}

/// Headroom over the rounding floor before the residual test is relaxed.
const FLOOR_FACTOR: f64 = 4.0;

/// Residual attainable in double precision: ε ‖|A||x| + λ|B||x|‖₂ / (λ ‖Bx‖₂).
fn rounding_floor(a: &SparseSymMatrix, b: &SparseSymMatrix, x: &[f64], lambda: f64, bx_norm: f64) -> f64 {
    let ax = a.abs_mul_vec(x);
    let bx = b.abs_mul_vec(x);
    let s: Vec<f64> = ax.iter().zip(&bx).map(|(p, q)| p + lambda * q).collect();
    f64::EPSILON * norm2(&s) / (lambda * bx_norm)
}

/// Two passes of modified Gram–Schmidt in the B inner product.
fn b_orthonormalize(b: &SparseSymMatrix, block: &mut [Vec<f64>]) -> Result<()> {
    for _pass in 0..2 {
        for i in 0..block.len() {
            for j in 0..i {
                let bj = b.mul_vec(&block[j]);
                let c = dot(&block[i], &bj);
                let (head, tail) = block.split_at_mut(i);
                tail[0].iter_mut().zip(&head[j]).for_each(|(x, y)| *x -= c * y);
            }
            let norm = b.quad_form(&block[i]);
            if !(norm > 0.0) {
                return Err(Error::NotPositiveDefinite { index: i, value: norm });
            }
            let s = 1.0 / norm.sqrt();
            block[i].iter_mut().for_each(|x| *x *= s);
        }
    }
    Ok(())
}

/// Largest-magnitude entry made positive; ties go to the lowest index.
fn fix_sign(x: &mut [f64]) {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() {
            best = i;
        }
    }
    if x.get(best).is_some_and(|&v| v < 0.0) {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Upper size limit of the dense oracle.
pub const DENSE_ORACLE_MAX: usize = 2000;

/// All eigenvalues of `A x = λ B x` via dense Cholesky of `B` and cyclic Jacobi.
pub fn dense_eig_oracle(a: &SparseSymMatrix, b: &SparseSymMatrix) -> Result<Vec<f64>> {
    let n = a.n();
    if n > DENSE_ORACLE_MAX {
        return Err(Error::TooLarge { n, max: DENSE_ORACLE_MAX });
    }
    if b.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.n() });
    }
    let ad = DenseMatrix::from_row_major(n, a.to_dense());
    let bd = DenseMatrix::from_row_major(n, b.to_dense());
    Ok(dense::generalized_eigen(&ad, &bd)?.0)
}
