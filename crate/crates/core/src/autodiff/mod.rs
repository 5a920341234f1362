//! Minimal reverse-mode automatic differentiation over dense matrices.
//!
//! Values are row-major [`Tensor`]s of rank at most two (scalars are `1×1`,
//! column vectors `n×1`). A [`Tape`] records every operation in execution
//! order; [`Tape::backward`] walks the record in reverse and accumulates
//! gradients into every node that depends on a trainable leaf.
//!
//! Hypergraph structure enters through [`Segments`]: precomputed index lists
//! that drive gather and segment-sum operations, so no sparse autodiff is
//! needed.

mod adam;
pub mod gradcheck;
mod tape;

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use tape::{Segments, Tape, Var};

/// Slope of `leaky_relu` for negative inputs.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Guard added under the square root of each norm in `cosine_rows`.
pub const COSINE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("backward has already been run on this tape")]
    BackwardTwice,
    #[error("index {index} out of range for {len} rows in {op}")]
    Index { op: &'static str, index: usize, len: usize },
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AutodiffError> {
        if data.len() != rows * cols {
            return Err(AutodiffError::Shape { op: "tensor", left: (rows, cols), right: (data.len(), 1) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![value] }
    }

    pub fn column(values: Vec<f64>) -> Self {
        Self { rows: values.len(), cols: 1, data: values }
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Value of a `1×1` tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `c = a · b` where `a` is `n×k` and `b` is `k×m`, each given with its
/// row and column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(n: usize, k: usize, m: usize, a: &[f64], rsa: isize, csa: isize, b: &[f64], rsb: isize, csb: isize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    if n == 0 || m == 0 || k == 0 {
        return out;
    }
    // SAFETY: the strides describe in-bounds views of `a` (n×k) and `b`
    // (k×m), and `out` is a distinct, contiguous n×m buffer.
    unsafe {
        matrixmultiply::dgemm(
            n, k, m, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, 0.0, out.as_mut_ptr(), m as isize, 1,
        );
    }
    out
}

pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let data = gemm(n, k, m, &a.data, k as isize, 1, &b.data, m as isize, 1);
    Tensor { rows: n, cols: m, data }
}

/// `a · bᵀ` for `a` (n×m) and `b` (k×m).
pub(crate) fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, m, k) = (a.rows, a.cols, b.rows);
    let data = gemm(n, m, k, &a.data, m as isize, 1, &b.data, 1, m as isize);
    Tensor { rows: n, cols: k, data }
}

/// `aᵀ · b` for `a` (n×k) and `b` (n×m).
pub(crate) fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let data = gemm(k, n, m, &a.data, 1, k as isize, &b.data, m as isize, 1);
    Tensor { rows: k, cols: m, data }
}
