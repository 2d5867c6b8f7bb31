//! Row-major dense matrix with the handful of operations the solver needs.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::{real, Scalar};

use super::{NumericsError, NumericsResult};

/// Dense real matrix, entries stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from a flat row-major slice.
    pub fn from_rows(rows: usize, cols: usize, entries: &[S]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        Self {
            rows,
            cols,
            data: entries.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Mutable access to two distinct rows at once.
    pub fn two_rows_mut(&mut self, p: usize, q: usize) -> (&mut [S], &mut [S]) {
        assert!(p < q && q < self.rows);
        let (head, tail) = self.data.split_at_mut(q * self.cols);
        (
            &mut head[p * self.cols..(p + 1) * self.cols],
            &mut tail[..self.cols],
        )
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&mut self, s: S) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: S, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += s * *y;
        }
    }

    /// `self * b`
    pub fn matmul(&self, b: &Self) -> Self {
        let mut out = Self::zeros(self.rows, b.cols);
        out.matmul_acc(self, b);
        out
    }

    /// `self += a * b`, the cache-friendly i-k-j kernel everything reduces to.
    pub fn matmul_acc(&mut self, a: &Self, b: &Self) {
        assert_eq!(a.cols, b.rows, "matmul inner dimension mismatch");
        assert_eq!((self.rows, self.cols), (a.rows, b.cols));
        for i in 0..a.rows {
            let arow = a.row(i);
            let orow = &mut self.data[i * b.cols..(i + 1) * b.cols];
            for (k, &aik) in arow.iter().enumerate() {
                if aik == S::zero() {
                    continue;
                }
                let brow = b.row(k);
                for (o, &bkj) in orow.iter_mut().zip(brow) {
                    *o += aik * bkj;
                }
            }
        }
    }

    /// `self^T * b`
    pub fn matmul_transa(&self, b: &Self) -> Self {
        assert_eq!(self.rows, b.rows, "matmul_transa dimension mismatch");
        let mut out = Self::zeros(self.cols, b.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = b.row(k);
            for (i, &aki) in arow.iter().enumerate() {
                if aki == S::zero() {
                    continue;
                }
                let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
                for (o, &bkj) in orow.iter_mut().zip(brow) {
                    *o += aki * bkj;
                }
            }
        }
        out
    }

    /// `self * v` for a vector `v`.
    pub fn matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &x)| a * x).sum())
            .collect()
    }

    /// Kronecker product, row index composed as `(i_self, i_other)`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let aij = self[(i, j)];
                if aij == S::zero() {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        out[(i * other.rows + p, j * other.cols + q)] = aij * other[(p, q)];
                    }
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> S {
        self.data.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn check_finite(&self) -> NumericsResult<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(NumericsError::NonFinite)
        }
    }

    /// Relative asymmetry `max|M - M^T|` over `max|M|` (zero matrix counts as
    /// symmetric).
    pub fn asymmetry(&self) -> S {
        assert!(self.is_square());
        let scale = self.max_abs();
        if scale == S::zero() {
            return S::zero();
        }
        let mut worst = S::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub fn is_symmetric_within(&self, rel_tol: S) -> bool {
        self.is_square() && self.asymmetry() <= rel_tol
    }

    /// Forces exact symmetry by averaging with the transpose.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let half = real::<S>(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// `|| self^T self - I ||_F`, the column-orthonormality defect.
    pub fn orthonormality_defect(&self) -> S {
        let gram = self.matmul_transa(self);
        let mut sum = S::zero();
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let target = if i == j { S::one() } else { S::zero() };
                let d = gram[(i, j)] - target;
                sum += d * d;
            }
        }
        sum.sqrt()
    }
}

impl<S: Scalar> Index<(usize, usize)> for DenseMatrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S: Scalar> IndexMut<(usize, usize)> for DenseMatrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: Scalar> fmt::Debug for DenseMatrix<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                write!(f, "{:>12.5e} ", self[(i, j)])?;
            }
            writeln!(f, "{}", if self.cols > 8 { "..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

/// Dot product of two equal-length slices.
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Euclidean norm of a slice.
pub(crate) fn norm2<S: Scalar>(v: &[S]) -> S {
    dot(v, v).sqrt()
}

/// `v /= ||v||`; returns the original norm.
pub(crate) fn normalize<S: Scalar>(v: &mut [S]) -> S {
    let n = norm2(v);
    if n > S::zero() {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// `y += s * x`
pub(crate) fn axpy<S: Scalar>(y: &mut [S], s: S, x: &[S]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_against_hand_result() {
        let a = DenseMatrix::from_rows(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = DenseMatrix::from_rows(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transa_matches_explicit_transpose() {
        let a = DenseMatrix::from_rows(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = DenseMatrix::from_rows(3, 2, &[-1.0, 0.5, 2.0, 1.0, 0.0, 3.0]);
        let fast = a.matmul_transa(&b);
        let slow = a.transpose().matmul(&b);
        assert_eq!(fast.data(), slow.data());
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = DenseMatrix::from_rows(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DenseMatrix::identity(2);
        let k = a.kron(&b);
        assert_eq!((k.rows(), k.cols()), (4, 4));
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(3, 3)], -1.0);
        assert_eq!(k[(1, 2)], 0.0);
    }

    #[test]
    fn asymmetry_detects_perturbation() {
        let mut m = DenseMatrix::<f64>::identity(3);
        assert_eq!(m.asymmetry(), 0.0);
        m[(0, 1)] = 1e-6;
        assert!(m.asymmetry() > 1e-7);
        m.symmetrize();
        assert_eq!(m.asymmetry(), 0.0);
    }

    #[test]
    fn works_in_f32() {
        let a = Mat32Local::identity(4);
        assert_eq!(a.frobenius_norm(), 2.0f32);
    }

    type Mat32Local = DenseMatrix<f32>;
}
