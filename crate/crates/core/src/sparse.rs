//! Complex sparse operators on a truncated Hilbert space.
//!
//! Thin newtype over [`nalgebra_sparse::CsrMatrix`] with the handful of
//! kernels the solvers need (sparse x dense from either side, accumulating
//! forms, block extraction).

use std::ops::{Add, Mul, Sub};

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator(CsrMatrix<C64>);

impl SparseOperator {
    /// Builds a square operator from `(row, col, value)` triplets; duplicate
    /// positions are summed.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut coo = CooMatrix::new(dim, dim);
        for (i, j, v) in triplets {
            coo.push(i, j, v);
        }
        SparseOperator(CsrMatrix::from(&coo))
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut trip = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..dim {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dim, trip)
    }

    pub fn zeros(dim: usize) -> Self {
        SparseOperator(CsrMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SparseOperator(CsrMatrix::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.0.nnz()
    }

    pub fn csr(&self) -> &CsrMatrix<C64> {
        &self.0
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.0.triplet_iter().map(|(i, j, v)| (i, j, *v))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0
            .get_entry(i, j)
            .map(|e| e.into_value())
            .unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut t = self.0.transpose();
        for v in t.values_mut() {
            *v = v.conj();
        }
        SparseOperator(t)
    }

    pub fn scale(&self, c: C64) -> Self {
        SparseOperator(&self.0 * c)
    }

    /// `self + c * I`.
    pub fn add_identity(&self, c: C64) -> Self {
        self + &SparseOperator::identity(self.dim()).scale(c)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.0.triplet_iter() {
            m[(i, j)] += *v;
        }
        m
    }

    pub fn matvec(&self, x: &CVector) -> CVector {
        let mut y = CVector::zeros(self.dim());
        for (i, row) in self.0.row_iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// `out += alpha * self * x`.
    pub fn mul_dense_acc(&self, x: &CMatrix, alpha: C64, out: &mut CMatrix) {
        let n = x.nrows();
        let (offsets, cols, vals) = self.0.csr_data();
        for c in 0..x.ncols() {
            let xc = &x.as_slice()[c * n..(c + 1) * n];
            let oc = &mut out.as_mut_slice()[c * n..(c + 1) * n];
            for i in 0..self.dim() {
                let mut acc = C64::new(0.0, 0.0);
                for k in offsets[i]..offsets[i + 1] {
                    acc += vals[k] * xc[cols[k]];
                }
                oc[i] += alpha * acc;
            }
        }
    }

    /// `self * x`.
    pub fn mul_dense(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), x.ncols());
        self.mul_dense_acc(x, C64::new(1.0, 0.0), &mut out);
        out
    }

    /// `out += alpha * x * self`.
    pub fn dense_mul_acc(&self, x: &CMatrix, alpha: C64, out: &mut CMatrix) {
        let n = x.nrows();
        let (offsets, cols, vals) = self.0.csr_data();
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        // (X B)[:, j] += B[k, j] * X[:, k] for every stored B[k, j].
        for k in 0..self.dim() {
            let xk = &xs[k * n..(k + 1) * n];
            for p in offsets[k]..offsets[k + 1] {
                let j = cols[p];
                let w = alpha * vals[p];
                let oj = &mut os[j * n..(j + 1) * n];
                for (o, &xv) in oj.iter_mut().zip(xk) {
                    *o += w * xv;
                }
            }
        }
    }

    /// `x * self`.
    pub fn dense_mul(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), self.dim());
        self.dense_mul_acc(x, C64::new(1.0, 0.0), &mut out);
        out
    }

    /// Dense sub-block `self[rows, cols]`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        let mut col_pos = vec![usize::MAX; self.dim()];
        for (k, &c) in cols.iter().enumerate() {
            col_pos[c] = k;
        }
        let mut m = CMatrix::zeros(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            let row = self.0.row(i);
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                if col_pos[j] != usize::MAX {
                    m[(r, col_pos[j])] += v;
                }
            }
        }
        m
    }

    /// `max |A_ij - B_ij|`.
    pub fn max_abs_diff(&self, other: &SparseOperator) -> f64 {
        let d = self - other;
        d.0.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl<'a> Add<&'a SparseOperator> for &'a SparseOperator {
    type Output = SparseOperator;
    fn add(self, rhs: &'a SparseOperator) -> SparseOperator {
        SparseOperator(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a SparseOperator> for &'a SparseOperator {
    type Output = SparseOperator;
    fn sub(self, rhs: &'a SparseOperator) -> SparseOperator {
        SparseOperator(&self.0 - &rhs.0)
    }
}

impl<'a> Mul<&'a SparseOperator> for &'a SparseOperator {
    type Output = SparseOperator;
    fn mul(self, rhs: &'a SparseOperator) -> SparseOperator {
        SparseOperator(&self.0 * &rhs.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseOperator {
        SparseOperator::from_triplets(
            3,
            vec![
                (0, 1, C64::new(1.0, 2.0)),
                (2, 0, C64::new(-0.5, 0.0)),
                (1, 1, C64::new(0.0, 3.0)),
                (1, 1, C64::new(1.0, 0.0)),
            ],
        )
    }

    fn dense_sample() -> CMatrix {
        CMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 + 0.5, j as f64 - 1.0))
    }

    #[test]
    fn kernels_match_dense_products() {
        let a = sample();
        let x = dense_sample();
        let ad = a.to_dense();
        assert!((a.mul_dense(&x) - &ad * &x).norm() < 1e-14);
        assert!((a.dense_mul(&x) - &x * &ad).norm() < 1e-14);
        assert!((a.adjoint().to_dense() - ad.adjoint()).norm() < 1e-14);
        let v = CVector::from_fn(3, |i, _| C64::new(1.0, i as f64));
        assert!((a.matvec(&v) - &ad * &v).norm() < 1e-14);
    }

    #[test]
    fn duplicates_are_summed() {
        assert_eq!(sample().get(1, 1), C64::new(1.0, 3.0));
    }

    #[test]
    fn block_extraction() {
        let a = sample();
        let b = a.block(&[2, 0], &[0, 1]);
        assert_eq!(b[(0, 0)], C64::new(-0.5, 0.0));
        assert_eq!(b[(1, 1)], C64::new(1.0, 2.0));
    }
}
