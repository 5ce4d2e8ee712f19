use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Compressed-row sparsity pattern with sorted column indices. Shared between all
/// operators assembled on one mesh so that linear combinations are entrywise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsePattern {
    /// Builds a symmetric pattern from a list of (row, col) couplings; the diagonal is
    /// always included.
    pub fn from_couplings(n: usize, couplings: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (i, j) in couplings {
            rows[i].push(j);
            rows[j].push(i);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Storage index of entry (i, j), if present.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let row = self.row(i);
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }
}

/// Sparse square matrix on a shared pattern.
#[derive(Debug, Clone)]
pub struct SparseMatrix<T> {
    pattern: Arc<SparsePattern>,
    values: Vec<T>,
}

impl<T: ComplexField<RealField = f64> + Copy> SparseMatrix<T> {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let values = vec![T::zero(); pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        let k = self
            .pattern
            .index_of(i, j)
            .expect("entry outside the assembled pattern");
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.pattern
            .index_of(i, j)
            .map_or(T::zero(), |k| self.values[k])
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.pattern.row_range(i) {
                s += self.values[k] * x[self.pattern.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Largest |A − Aᵀ| entry.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            for k in self.pattern.row_range(i) {
                let j = self.pattern.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).modulus());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.n();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in self.pattern.row_range(i) {
                d[(i, self.pattern.col_idx[k])] = self.values[k];
            }
        }
        d
    }
}

impl SparseMatrix<f64> {
    pub fn from_parts(pattern: Arc<SparsePattern>, values: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        Self { pattern, values }
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n() {
            let mut r = 0.0;
            for k in self.pattern.row_range(i) {
                r += self.values[k] * x[self.pattern.col_idx[k]];
            }
            s += x[i] * r;
        }
        s
    }

    /// `xᵀ A y` for real symmetric A and complex vectors (bilinear, no conjugation).
    pub fn bilinear_complex(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..self.n() {
            let mut r = Complex64::new(0.0, 0.0);
            for k in self.pattern.row_range(i) {
                r += y[self.pattern.col_idx[k]] * self.values[k];
            }
            s += x[i] * r;
        }
        s
    }

    pub fn mul_complex_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in self.pattern.row_range(i) {
                s += x[self.pattern.col_idx[k]] * self.values[k];
            }
            *yi = s;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// `Σ c_k A_k` over real matrices sharing one pattern.
pub fn combine<T>(terms: &[(T, &SparseMatrix<f64>)]) -> Result<SparseMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let first = terms
        .first()
        .ok_or_else(|| Error::Argument("empty linear combination".into()))?;
    let pattern = first.1.pattern.clone();
    let mut values = vec![T::zero(); pattern.nnz()];
    for (c, m) in terms {
        if !Arc::ptr_eq(&m.pattern, &pattern) && *m.pattern != *pattern {
            return Err(Error::Argument("matrices do not share a pattern".into()));
        }
        for (v, &a) in values.iter_mut().zip(&m.values) {
            *v += *c * T::from_real(a);
        }
    }
    Ok(SparseMatrix { pattern, values })
}
