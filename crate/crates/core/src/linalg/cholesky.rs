//! Sparse Cholesky factorization (up-looking, elimination-tree driven) under
//! a nested-dissection ordering, with a conjugate-gradient fallback when the
//! predicted factor would not fit the memory budget.

use super::ordering::{nested_dissection, Graph};
use super::sparse::{dot, norm2, SparseSymMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct FactorOptions {
    /// Largest number of factor nonzeros accepted before switching to CG.
    pub max_factor_nnz: usize,
    /// Relative residual target of the CG fallback.
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions {
            max_factor_nnz: 250_000_000,
            cg_tolerance: 1e-12,
            cg_max_iterations: 100_000,
        }
    }
}

/// Linear-solve handle for an SPD matrix.
pub enum LinearSolver {
    Cholesky(CholeskyFactor),
    Cg(JacobiCg),
}

impl LinearSolver {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            LinearSolver::Cholesky(f) => Ok(f.solve(rhs)),
            LinearSolver::Cg(cg) => cg.solve(rhs),
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, LinearSolver::Cholesky(_))
    }
}

pub fn factorize(a: &SparseSymMatrix) -> Result<LinearSolver> {
    factorize_with(a, &FactorOptions::default())
}

pub fn factorize_with(a: &SparseSymMatrix, options: &FactorOptions) -> Result<LinearSolver> {
    let symbolic = SymbolicCholesky::analyze(a);
    if symbolic.factor_nnz() > options.max_factor_nnz {
        return Ok(LinearSolver::Cg(JacobiCg::new(a.clone(), options)?));
    }
    Ok(LinearSolver::Cholesky(symbolic.factor(a)?))
}

/// Ordering, elimination tree and column counts of `P A Pᵀ`.
pub struct SymbolicCholesky {
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    parent: Vec<usize>,
    col_ptr: Vec<usize>,
    // Strictly lower part of row k of P A Pᵀ, columns ascending.
    lower_ptr: Vec<usize>,
    lower_col: Vec<usize>,
    lower_src: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl SymbolicCholesky {
    pub fn analyze(a: &SparseSymMatrix) -> Self {
        let n = a.n();
        let graph = pattern_graph(a);
        let perm = nested_dissection(&graph);
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }

        // Permuted lower rows, remembering where each value lives in `a`.
        let mut lower_ptr = Vec::with_capacity(n + 1);
        let mut lower_col = Vec::with_capacity(a.nnz() / 2 + n);
        let mut lower_src = Vec::with_capacity(a.nnz() / 2 + n);
        lower_ptr.push(0);
        let mut row_buf: Vec<(usize, usize)> = Vec::new();
        let row_offsets = row_offsets(a);
        for k in 0..n {
            let old = perm[k];
            let (cols, _) = a.row(old);
            row_buf.clear();
            for (p, &j) in cols.iter().enumerate() {
                let jn = inv_perm[j];
                if jn <= k {
                    row_buf.push((jn, row_offsets[old] + p));
                }
            }
            row_buf.sort_unstable_by_key(|&(j, _)| j);
            for &(j, src) in &row_buf {
                lower_col.push(j);
                lower_src.push(src);
            }
            lower_ptr.push(lower_col.len());
        }

        // Elimination tree with path compression.
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &i0 in &lower_col[lower_ptr[k]..lower_ptr[k + 1]] {
                let mut i = i0;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        // Column counts from row subtrees.
        let mut counts = vec![1usize; n];
        let mut mark = vec![NONE; n];
        for k in 0..n {
            mark[k] = k;
            for &i0 in &lower_col[lower_ptr[k]..lower_ptr[k + 1]] {
                let mut i = i0;
                while i != NONE && mark[i] != k {
                    counts[i] += 1;
                    mark[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        for c in counts {
            col_ptr.push(col_ptr.last().unwrap() + c);
        }

        SymbolicCholesky {
            perm,
            inv_perm,
            parent,
            col_ptr,
            lower_ptr,
            lower_col,
            lower_src,
        }
    }

    pub fn factor_nnz(&self) -> usize {
        *self.col_ptr.last().unwrap()
    }

    pub fn factor(self, a: &SparseSymMatrix) -> Result<CholeskyFactor> {
        let n = self.perm.len();
        let values = flat_values(a);
        let nnz = self.factor_nnz();
        let mut row_idx = vec![0usize; nnz];
        let mut lx = vec![0.0f64; nnz];
        let mut next = self.col_ptr[..n].to_vec();
        let mut x = vec![0.0f64; n];
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];
        let mut pattern = vec![0usize; n];

        for k in 0..n {
            // Nonzero pattern of row k of L in topological order: pattern[top..n].
            let mut top = n;
            mark[k] = k;
            let row = self.lower_ptr[k]..self.lower_ptr[k + 1];
            for p in row.clone() {
                let mut i = self.lower_col[p];
                x[i] = values[self.lower_src[p]];
                let mut len = 0;
                while mark[i] != k {
                    stack[len] = i;
                    len += 1;
                    mark[i] = k;
                    i = self.parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = stack[len];
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &pattern[top..n] {
                let start = self.col_ptr[i];
                let lki = x[i] / lx[start];
                x[i] = 0.0;
                for p in start + 1..next[i] {
                    x[row_idx[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                row_idx[next[i]] = k;
                lx[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    index: self.perm[k],
                    value: d,
                });
            }
            row_idx[next[k]] = k;
            lx[next[k]] = d.sqrt();
            next[k] += 1;
        }

        Ok(CholeskyFactor {
            perm: self.perm,
            inv_perm: self.inv_perm,
            col_ptr: self.col_ptr,
            row_idx,
            values: lx,
        })
    }
}

fn pattern_graph(a: &SparseSymMatrix) -> Graph {
    let n = a.n();
    let mut adj_ptr = Vec::with_capacity(n + 1);
    let mut adj = Vec::with_capacity(a.nnz());
    adj_ptr.push(0);
    for i in 0..n {
        adj.extend(a.row(i).0.iter().copied().filter(|&j| j != i));
        adj_ptr.push(adj.len());
    }
    Graph { adj_ptr, adj }
}

fn row_offsets(a: &SparseSymMatrix) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(a.n() + 1);
    let mut acc = 0;
    for i in 0..a.n() {
        offsets.push(acc);
        acc += a.row(i).0.len();
    }
    offsets
}

fn flat_values(a: &SparseSymMatrix) -> Vec<f64> {
    (0..a.n()).flat_map(|i| a.row(i).1.iter().copied()).collect()
}

/// `P A Pᵀ = L Lᵀ` with `L` stored by columns, diagonal first.
pub struct CholeskyFactor {
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(rhs.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for j in 0..n {
            let start = self.col_ptr[j];
            let yj = y[j] / self.values[start];
            y[j] = yj;
            for p in start + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let start = self.col_ptr[j];
            let mut s = y[j];
            for p in start + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * y[self.row_idx[p]];
            }
            y[j] = s / self.values[start];
        }
        (0..n).map(|old| y[self.inv_perm[old]]).collect()
    }
}

/// Diagonally preconditioned conjugate gradients.
pub struct JacobiCg {
    a: SparseSymMatrix,
    inv_diag: Vec<f64>,
    tolerance: f64,
    max_iterations: usize,
}

impl JacobiCg {
    pub fn new(a: SparseSymMatrix, options: &FactorOptions) -> Result<Self> {
        let diag = a.diagonal();
        if let Some((i, &d)) = diag.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
            return Err(Error::NotPositiveDefinite { index: i, value: d });
        }
        Ok(JacobiCg {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
            a,
            tolerance: options.cg_tolerance,
            max_iterations: options.cg_max_iterations,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let bnorm = norm2(rhs);
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut q = vec![0.0; n];
        for it in 0..self.max_iterations {
            self.a.mul_vec_into(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                return Err(Error::NotPositiveDefinite { index: it, value: pq });
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if norm2(&r) <= self.tolerance * bnorm {
                // Confirm with a true residual to guard against drift.
                let true_r: Vec<f64> = self.a.mul_vec(&x).iter().zip(rhs).map(|(ax, b)| b - ax).collect();
                if norm2(&true_r) <= self.tolerance * bnorm * 10.0 {
                    return Ok(x);
                }
                r = true_r;
            }
            for i in 0..n {
                z[i] = r[i] * self.inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let res: Vec<f64> = self.a.mul_vec(&x).iter().zip(rhs).map(|(ax, b)| b - ax).collect();
        Err(Error::CgNotConverged {
            iterations: self.max_iterations,
            residual: norm2(&res) / bnorm,
        })
    }
}
