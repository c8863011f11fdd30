//! Row-major 2-D tensors used for batches of activations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor2")]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawTensor2> for Tensor2 {
    type Error = Error;

    fn try_from(raw: RawTensor2) -> Result<Self> {
        Tensor2::from_vec(raw.rows, raw.cols, raw.data)
    }
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values cannot fill a {rows}x{cols} tensor", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a tensor from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!("ragged rows: {} vs {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Column slice `[start, start + width)` as a new tensor.
    pub fn cols_range(&self, start: usize, width: usize) -> Self {
        let mut out = Self::zeros(self.rows, width);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[start..start + width]);
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Tensor2) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!("hcat row mismatch: {} vs {}", self.rows, other.rows)));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Self { rows: self.rows, cols, data })
    }
}

/// `out = a · b` (overwrites `out`).
pub(crate) fn matmul_into(a: &Tensor2, b: &Tensor2, out: &mut Tensor2) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!(out.shape(), (a.rows, b.cols));
    gemm(a.rows, a.cols, b.cols, 1.0, &a.data, (a.cols as isize, 1), &b.data, (b.cols as isize, 1), 0.0, &mut out.data);
}

/// `out += aᵀ · b`.
pub(crate) fn matmul_tn_acc(a: &Tensor2, b: &Tensor2, out: &mut [f64]) {
    debug_assert_eq!(a.rows, b.rows);
    debug_assert_eq!(out.len(), a.cols * b.cols);
    // aᵀ has shape (a.cols, a.rows) with strides (1, a.cols).
    gemm(a.cols, a.rows, b.cols, 1.0, &a.data, (1, a.cols as isize), &b.data, (b.cols as isize, 1), 1.0, out);
}

/// `out = a · bᵀ`.
pub(crate) fn matmul_nt_into(a: &Tensor2, b: &Tensor2, out: &mut Tensor2) {
    debug_assert_eq!(a.cols, b.cols);
    debug_assert_eq!(out.shape(), (a.rows, b.rows));
    gemm(a.rows, a.cols, b.rows, 1.0, &a.data, (a.cols as isize, 1), &b.data, (1, b.cols as isize), 0.0, &mut out.data);
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c.fill(0.0);
        }
        return;
    }
    assert!(c.len() >= m * n);
    // SAFETY: the slices cover every index reachable through the given
    // dimensions and strides, checked by the asserts above and the
    // callers' shape invariants.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Tensor2, b: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn sample(rows: usize, cols: usize, seed: f64) -> Tensor2 {
        let data = (0..rows * cols).map(|i| ((i as f64 + seed) * 0.37).sin()).collect();
        Tensor2::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Tensor2::from_vec(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn gemm_variants_match_naive() {
        let a = sample(5, 3, 0.0);
        let b = sample(3, 4, 1.0);
        let mut out = Tensor2::zeros(5, 4);
        matmul_into(&a, &b, &mut out);
        let want = naive(&a, &b);
        for (x, y) in out.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }

        // aᵀ·c with c (5x4) -> (3x4)
        let c = sample(5, 4, 2.0);
        let mut acc = vec![0.0; 12];
        matmul_tn_acc(&a, &c, &mut acc);
        let at = Tensor2::from_vec(3, 5, (0..15).map(|i| a.get(i % 5, i / 5)).collect()).unwrap();
        let want = naive(&at, &c);
        for (x, y) in acc.iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }

        // c·bᵀ with c (5x4), b (3x4)ᵀ -> (5x3)
        let b2 = sample(3, 4, 3.0);
        let mut out = Tensor2::zeros(5, 3);
        matmul_nt_into(&c, &b2, &mut out);
        let b2t = Tensor2::from_vec(4, 3, (0..12).map(|i| b2.get(i % 3, i / 3)).collect()).unwrap();
        let want = naive(&c, &b2t);
        for (x, y) in out.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn hcat_and_cols_range_invert() {
        let a = sample(4, 2, 0.5);
        let b = sample(4, 3, 1.5);
        let ab = a.hcat(&b).unwrap();
        assert_eq!(ab.cols_range(0, 2), a);
        assert_eq!(ab.cols_range(2, 3), b);
    }
}
