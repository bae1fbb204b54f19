//! Small dense kernels: LU and Cholesky solves, cyclic Jacobi for symmetric
//! eigenproblems, and the generalized problem reduced through Cholesky.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        DenseMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Solves `M X = B` for several right-hand sides by Gaussian elimination with
/// partial pivoting. `rhs` holds `M.n()` rows of `ncols` entries, row-major.
pub fn lu_solve(m: &DenseMatrix, rhs: &[f64], ncols: usize) -> Result<Vec<f64>> {
    let n = m.n;
    let mut a = m.data.clone();
    let mut x = rhs.to_vec();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))
            .unwrap();
        if a[pivot * n + col].abs() <= 1e-14 * scale {
            return Err(Error::InvalidArgument(format!("singular matrix at column {col}")));
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            for j in 0..ncols {
                x.swap(col * ncols + j, pivot * ncols + j);
            }
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] -= f * a[col * n + j];
            }
            for j in 0..ncols {
                x[r * ncols + j] -= f * x[col * ncols + j];
            }
        }
    }
    for col in (0..n).rev() {
        let d = a[col * n + col];
        for j in 0..ncols {
            let mut s = x[col * ncols + j];
            for k in col + 1..n {
                s -= a[col * n + k] * x[k * ncols + j];
            }
            x[col * ncols + j] = s / d;
        }
    }
    Ok(x)
}

/// Lower Cholesky factor of an SPD matrix.
pub fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.n;
    let mut l = DenseMatrix::zeros(n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Cyclic Jacobi rotations on a symmetric matrix. Returns eigenvalues in
/// ascending order and the matching orthonormal eigenvectors as columns.
pub fn symmetric_eigen(m: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = m.n;
    let mut a = m.clone();
    a.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let total: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * total * 1e-2 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()).max(f64::MIN_POSITIVE) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    (values, vectors)
}

/// Generalized problem `A x = λ B x` with `B` SPD. Eigenvectors (columns) are
/// B-orthonormal; eigenvalues ascending.
pub fn generalized_eigen(a: &DenseMatrix, b: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.n;
    let l = cholesky(b)?;
    // C = L^{-1} A L^{-T}
    let mut w = a.clone();
    for j in 0..n {
        forward_column(&l, &mut w, j);
    }
    let mut c = w.transpose();
    for j in 0..n {
        forward_column(&l, &mut c, j);
    }
    let (values, y) = symmetric_eigen(&c);
    // x = L^{-T} y
    let mut x = y;
    for j in 0..n {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, j)];
            }
            x[(i, j)] = s / l[(i, i)];
        }
    }
    Ok((values, x))
}

fn forward_column(l: &DenseMatrix, w: &mut DenseMatrix, j: usize) {
    let n = l.n;
    for i in 0..n {
        let mut s = w[(i, j)];
        for k in 0..i {
            s -= l[(i, k)] * w[(k, j)];
        }
        w[(i, j)] = s / l[(i, i)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_permuted_system() {
        let m = DenseMatrix::from_row_major(3, vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let x = lu_solve(&m, &[5.0, 3.0, 6.0], 1).unwrap();
        let r = m.mul_vec(&x);
        for (a, b) in r.iter().zip([5.0, 3.0, 6.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_on_known_spectrum() {
        let m = DenseMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = symmetric_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-15 && (vals[1] - 3.0).abs() < 1e-15);
        assert!((vecs[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DenseMatrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky(&m), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }
}
