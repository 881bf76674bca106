//! Compressed sparse row storage for the symmetric stiffness matrix, and
//! Cholesky factorizations of its Dirichlet-masked variants.
//!
//! A masked matrix keeps the full sparsity pattern of `K` but replaces every
//! row and column of a fixed node by the corresponding identity row and
//! column. The pattern never changes, so one symbolic factorization (with
//! its fill-reducing ordering) serves every contact set the active-set
//! solver visits.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Square sparse matrix in CSR form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given per-row column sets.
    pub fn from_pattern(n: usize, mut rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for cols in &mut rows {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Builds a matrix summing duplicate entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let mut m = Self::from_pattern(n, rows);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|p| lo + p)
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max |A_ij - A_ji|` over the pattern.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Symbolic Cholesky analysis of a symmetric pattern, reusable across masks.
#[derive(Debug, Clone)]
pub struct MaskedCholesky {
    symbolic: SymbolicLlt<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    // CSR value index backing each lower-triangular CSC entry.
    source: Vec<usize>,
}

impl MaskedCholesky {
    /// Analyzes the lower triangle of the (structurally symmetric) matrix `k`.
    pub fn new(k: &CsrMatrix) -> Result<Self> {
        // For a symmetric pattern, CSC column j of the lower triangle is
        // CSR row j restricted to columns >= j.
        let mut col_ptr = Vec::with_capacity(k.n + 1);
        let mut row_idx = Vec::new();
        let mut source = Vec::new();
        col_ptr.push(0);
        for j in 0..k.n {
            for p in k.row_ptr[j]..k.row_ptr[j + 1] {
                if k.col_idx[p] >= j {
                    row_idx.push(k.col_idx[p]);
                    source.push(p);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let pattern = SymbolicSparseColMatRef::new_checked(k.n, k.n, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLlt::try_new(pattern, Side::Lower)
            .map_err(|e| Error::Factorization(format!("symbolic analysis: {e:?}")))?;
        Ok(Self {
            symbolic,
            col_ptr,
            row_idx,
            source,
        })
    }

    /// Numeric factorization of `k` with the nodes flagged in `fixed`
    /// replaced by identity rows and columns.
    pub fn factor(&self, k: &CsrMatrix, fixed: &[bool]) -> Result<MaskedFactor> {
        assert_eq!(fixed.len(), k.n);
        let mut values = Vec::with_capacity(self.row_idx.len());
        for j in 0..k.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = if !fixed[i] && !fixed[j] {
                    k.values[self.source[p]]
                } else if i == j {
                    1.0
                } else {
                    0.0
                };
                values.push(v);
            }
        }
        let pattern =
            SymbolicSparseColMatRef::new_checked(k.n, k.n, &self.col_ptr, None, &self.row_idx);
        let mat = SparseColMatRef::new(pattern, &values);
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), mat, Side::Lower)
            .map_err(|e| Error::Factorization(format!("numeric factorization: {e:?}")))?;
        Ok(MaskedFactor {
            llt,
            fixed: fixed.to_vec(),
        })
    }
}

/// Cholesky factor of a masked matrix.
#[derive(Debug, Clone)]
pub struct MaskedFactor {
    llt: Llt<usize, f64>,
    fixed: Vec<bool>,
}

impl MaskedFactor {
    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    /// Solves the masked system in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.llt.solve_in_place(&mut b);
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = b[(i, 0)];
        }
    }

    /// Solves `K_FF x_F = load_F - K_FX x_X` on the free nodes `F`, with
    /// `x_X` taken from `values` on the fixed nodes `X`. Returns the full
    /// vector (fixed entries copied from `values`).
    pub fn solve_dirichlet(&self, k: &CsrMatrix, load: &[f64], values: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; k.n];
        for i in 0..k.n {
            if self.fixed[i] {
                rhs[i] = values[i];
                continue;
            }
            let (cols, vals) = k.row(i);
            let mut b = load[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if self.fixed[j] {
                    b -= v * values[j];
                }
            }
            rhs[i] = b;
        }
        self.solve_in_place(&mut rhs);
        // Pin fixed entries exactly; the identity rows reproduce them only
        // up to round-off in the triangular solves.
        for i in 0..k.n {
            if self.fixed[i] {
                rhs[i] = values[i];
            }
        }
        rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn masked_solve_reproduces_linear_interpolant() {
        // -u'' = 0 with u(0) = 1, u(n-1) = 3 is linear.
        let n = 9;
        let k = laplacian_1d(n);
        let chol = MaskedCholesky::new(&k).unwrap();
        let mut fixed = vec![false; n];
        fixed[0] = true;
        fixed[n - 1] = true;
        let factor = chol.factor(&k, &fixed).unwrap();
        let mut values = vec![0.0; n];
        values[0] = 1.0;
        values[n - 1] = 3.0;
        let x = factor.solve_dirichlet(&k, &vec![0.0; n], &values);
        for (i, xi) in x.iter().enumerate() {
            let exact = 1.0 + 2.0 * i as f64 / (n - 1) as f64;
            assert!((xi - exact).abs() < 1e-13, "{i}: {xi} vs {exact}");
        }
    }

    #[test]
    fn refactoring_with_different_masks_reuses_symbolic() {
        let n = 6;
        let k = laplacian_1d(n);
        let chol = MaskedCholesky::new(&k).unwrap();
        for mask in [[true, false, false, false, false, true], [true, false, true, false, false, true]] {
            let f = chol.factor(&k, &mask).unwrap();
            let x = f.solve_dirichlet(&k, &vec![1.0; n], &vec![0.0; n]);
            let r = k.matvec(&x);
            for i in 0..n {
                if !mask[i] {
                    assert!((r[i] - 1.0).abs() < 1e-12);
                } else {
                    assert_eq!(x[i], 0.0);
                }
            }
        }
    }
}
