//! Dense row-major 2-D tensors.
//!
//! Vectors are 1xN or Nx1 tensors; scalars are 1x1. The multiply kernels
//! below are the hot path of the whole trainer, so they stay slice-based
//! and accumulate in a fixed order for bit-reproducible runs.

use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<R> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Tensor<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<R>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length mismatch");
        Tensor { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> R) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor { rows, cols, data }
    }

    pub fn scalar(v: R) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn row_vec(data: Vec<R>) -> Self {
        Tensor {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> R {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: R) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[R] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [R] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    /// The single element of a 1x1 tensor.
    pub fn item(&self) -> R {
        assert_eq!(self.data.len(), 1, "item() requires a 1x1 tensor");
        self.data[0]
    }

    pub fn transpose(&self) -> Tensor<R> {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Tensor<R> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<S: Real>(&self) -> Tensor<S> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| S::from_f64(Real::to_f64(*x))).collect(),
        }
    }
}

/// c = a * b, (m x k)(k x n) -> (m x n).
pub fn matmul<R: Real>(a: &Tensor<R>, b: &Tensor<R>) -> Tensor<R> {
    assert_eq!(a.cols, b.rows, "matmul inner dims");
    let mut out = Tensor::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (k, &aik) in a_row.iter().enumerate() {
            let b_row = b.row(k);
            for (o, &bkj) in out_row.iter_mut().zip(b_row.iter()) {
                *o = *o + aik * bkj;
            }
        }
    }
    out
}

/// c = a * b^T, (m x n)(p x n) -> (m x p). Row-dot-row, cache friendly.
pub fn matmul_nt<R: Real>(a: &Tensor<R>, b: &Tensor<R>) -> Tensor<R> {
    assert_eq!(a.cols, b.cols, "matmul_nt inner dims");
    let mut out = Tensor::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let a_row = a.row(i);
        for j in 0..b.rows {
            let b_row = b.row(j);
            let mut acc = R::zero();
            for (&x, &y) in a_row.iter().zip(b_row.iter()) {
                acc = acc + x * y;
            }
            out.data[i * b.rows + j] = acc;
        }
    }
    out
}

/// c = a^T * b, (m x n)(m x p) -> (n x p). Outer-product accumulation.
pub fn matmul_tn<R: Real>(a: &Tensor<R>, b: &Tensor<R>) -> Tensor<R> {
    assert_eq!(a.rows, b.rows, "matmul_tn inner dims");
    let mut out = Tensor::zeros(a.cols, b.cols);
    for m in 0..a.rows {
        let a_row = a.row(m);
        let b_row = b.row(m);
        for (i, &ami) in a_row.iter().enumerate() {
            let out_row = out.row_mut(i);
            for (o, &bmj) in out_row.iter_mut().zip(b_row.iter()) {
                *o = *o + ami * bmj;
            }
        }
    }
    out
}

pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = R::zero();
    for (&x, &y) in a.iter().zip(b.iter()) {
        acc = acc + x * y;
    }
    acc
}

pub fn norm2<R: Real>(a: &[R]) -> R {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(rows, cols, v.to_vec())
    }

    #[test]
    fn matmul_small() {
        let a = t(2, 3, &[1., 2., 3., 4., 5., 6.]);
        let b = t(3, 2, &[7., 8., 9., 10., 11., 12.]);
        let c = matmul(&a, &b);
        assert_eq!(c.data(), &[58., 64., 139., 154.]);
    }

    #[test]
    fn matmul_variants_agree() {
        let a = t(2, 3, &[1., -2., 3., 0.5, 5., -6.]);
        let b = t(4, 3, &[7., 8., 9., 1., -1., 2., 0., 3., 1., 2., 2., 2.]);
        let nt = matmul_nt(&a, &b);
        let reference = matmul(&a, &b.transpose());
        assert_eq!(nt.data(), reference.data());

        let c = t(2, 4, &[1., 2., 3., 4., 5., 6., 7., 8.]);
        let tn = matmul_tn(&a, &c);
        let reference = matmul(&a.transpose(), &c);
        assert_eq!(tn.data(), reference.data());
    }

    #[test]
    fn transpose_round_trip() {
        let a = t(2, 3, &[1., 2., 3., 4., 5., 6.]);
        assert_eq!(a.transpose().transpose(), a);
    }
}
