//! Compressed sparse row matrices and dense vectors.
//!
//! Every [`SparseMatrix`] is kept in canonical form: column indices strictly
//! increase within a row and no explicit zeros are stored. All operations
//! re-establish that form, so structural equality (`==`) is value equality.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparseError {
    #[error("entry ({row}, {col}) out of range for {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("non-finite value {value} at position {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("invalid CSR structure: {0}")]
    Structure(&'static str),
}

/// Dense real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SparseError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SparseError::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    /// Unit basis vector `e_j` of length `n`.
    pub fn basis(n: usize, j: usize) -> Self {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64, SparseError> {
        self.check_len("l1_distance", other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| libm::fabs(a - b)).sum())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SparseError> {
        self.check_len("add", other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SparseError> {
        self.check_len("sub", other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    fn check_len(&self, op: &'static str, other: &Self) -> Result<(), SparseError> {
        if self.len() != other.len() {
            return Err(SparseError::DimensionMismatch {
                op,
                left: (self.len(), 1),
                right: (other.len(), 1),
            });
        }
        Ok(())
    }
}

impl core::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Real matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a canonical matrix from `(row, col, value)` triplets.
    ///
    /// Duplicates are summed and entries that end up exactly zero are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        for &(row, col, value) in entries {
            if row >= n_rows || col >= n_cols {
                return Err(SparseError::IndexOutOfRange { row, col, n_rows, n_cols });
            }
            if !value.is_finite() {
                return Err(SparseError::NonFinite { index: row * n_cols + col, value });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        // stable: duplicates are summed in input order
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let (r, c, mut v) = sorted[i];
            i += 1;
            while i < sorted.len() && sorted[i].0 == r && sorted[i].1 == c {
                v += sorted[i].2;
                i += 1;
            }
            if v != 0.0 {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self { n_rows, n_cols, row_offsets, col_indices, values })
    }

    /// Builds a canonical matrix from a row-major dense slice.
    pub fn from_dense(n_rows: usize, n_cols: usize, dense: &[f64]) -> Result<Self, SparseError> {
        if dense.len() != n_rows * n_cols {
            return Err(SparseError::DimensionMismatch {
                op: "from_dense",
                left: (n_rows, n_cols),
                right: (dense.len(), 1),
            });
        }
        let entries: Vec<_> = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, &v)| (k / n_cols, k % n_cols, v))
            .collect();
        Self::from_triplets(n_rows, n_cols, &entries)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates stored entries as `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for (i, j, v) in self.iter() {
            out[i * self.n_cols + j] = v;
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Checks the canonical CSR invariants.
    pub fn validate(&self) -> Result<(), SparseError> {
        if self.row_offsets.len() != self.n_rows + 1 {
            return Err(SparseError::Structure("row_offsets length"));
        }
        if self.row_offsets[0] != 0 || self.row_offsets[self.n_rows] != self.values.len() {
            return Err(SparseError::Structure("row_offsets endpoints"));
        }
        if self.col_indices.len() != self.values.len() {
            return Err(SparseError::Structure("col_indices/values length"));
        }
        for i in 0..self.n_rows {
            if self.row_offsets[i] > self.row_offsets[i + 1] {
                return Err(SparseError::Structure("row_offsets decreasing"));
            }
            let (cols, vals) = self.row(i);
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SparseError::Structure("columns not strictly increasing"));
            }
            if cols.iter().any(|&c| c >= self.n_cols) {
                return Err(SparseError::Structure("column out of range"));
            }
            if vals.iter().any(|&v| v == 0.0) {
                return Err(SparseError::Structure("explicit zero stored"));
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.iter() {
            let slot = next[j];
            col_indices[slot] = i;
            values[slot] = v;
            next[j] += 1;
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Sparse product `self · other`.
    ///
    /// Each output entry is accumulated in ascending order of the inner index.
    pub fn spmm(&self, other: &Self) -> Result<Self, SparseError> {
        if self.n_cols != other.n_rows {
            return Err(self.mismatch("spmm", other));
        }
        let n_out = other.n_cols;
        let mut acc = vec![0.0f64; n_out];
        let mut occupied = vec![false; n_out];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.n_rows {
            let (a_cols, a_vals) = self.row(i);
            for (&k, &a) in a_cols.iter().zip(a_vals) {
                let (b_cols, b_vals) = other.row(k);
                for (&j, &b) in b_cols.iter().zip(b_vals) {
                    if !occupied[j] {
                        occupied[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    col_indices.push(j);
                    values.push(acc[j]);
                }
                acc[j] = 0.0;
                occupied[j] = false;
            }
            touched.clear();
            row_offsets.push(values.len());
        }
        Ok(Self { n_rows: self.n_rows, n_cols: n_out, row_offsets, col_indices, values })
    }

    /// Entrywise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self, SparseError> {
        self.check_same_shape("hadamard", other)?;
        Ok(self.merge(other, |a, b| a * b, true))
    }

    pub fn add(&self, other: &Self) -> Result<Self, SparseError> {
        self.check_same_shape("add", other)?;
        Ok(self.merge(other, |a, b| a + b, false))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SparseError> {
        self.check_same_shape("sub", other)?;
        Ok(self.merge(other, |a, b| a - b, false))
    }

    /// `alpha · self + beta · other`.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self, SparseError> {
        self.check_same_shape("linear_combination", other)?;
        Ok(self.merge(other, |a, b| alpha * a + beta * b, false))
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out.prune()
    }

    /// Copy with the main diagonal removed.
    pub fn without_diagonal(&self) -> Self {
        let entries: Vec<_> = self.iter().filter(|&(i, j, _)| i != j).collect();
        Self::from_triplets(self.n_rows, self.n_cols, &entries).expect("entries come from a valid matrix")
    }

    /// Scales row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self, SparseError> {
        if factors.len() != self.n_rows {
            return Err(SparseError::DimensionMismatch {
                op: "scale_rows",
                left: self.shape(),
                right: (factors.len(), 1),
            });
        }
        let mut out = self.clone();
        for (i, f) in factors.iter().enumerate() {
            for v in &mut out.values[self.row_offsets[i]..self.row_offsets[i + 1]] {
                *v *= f;
            }
        }
        Ok(out.prune())
    }

    /// Scales column `j` by `factors[j]`.
    pub fn scale_cols(&self, factors: &[f64]) -> Result<Self, SparseError> {
        if factors.len() != self.n_cols {
            return Err(SparseError::DimensionMismatch {
                op: "scale_cols",
                left: self.shape(),
                right: (factors.len(), 1),
            });
        }
        let mut out = self.clone();
        for (v, &c) in out.values.iter_mut().zip(&self.col_indices) {
            *v *= factors[c];
        }
        Ok(out.prune())
    }

    pub fn spmv(&self, x: &DenseVector) -> Result<DenseVector, SparseError> {
        if self.n_cols != x.len() {
            return Err(SparseError::DimensionMismatch {
                op: "spmv",
                left: self.shape(),
                right: (x.len(), 1),
            });
        }
        let out = (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect();
        Ok(DenseVector(out))
    }

    /// Product with a row-major dense matrix of `cols` columns.
    pub fn mul_dense(&self, dense: &[f64], cols: usize) -> Result<Vec<f64>, SparseError> {
        if dense.len() != self.n_cols * cols {
            return Err(SparseError::DimensionMismatch {
                op: "mul_dense",
                left: self.shape(),
                right: (dense.len() / cols.max(1), cols),
            });
        }
        let mut out = vec![0.0; self.n_rows * cols];
        for (i, k, a) in self.iter() {
            let src = &dense[k * cols..(k + 1) * cols];
            let dst = &mut out[i * cols..(i + 1) * cols];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
        Ok(out)
    }

    fn prune(mut self) -> Self {
        if self.values.iter().all(|&v| v != 0.0) {
            return self;
        }
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut w = 0;
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                if self.values[k] != 0.0 {
                    self.values[w] = self.values[k];
                    self.col_indices[w] = self.col_indices[k];
                    w += 1;
                }
            }
            row_offsets.push(w);
        }
        self.values.truncate(w);
        self.col_indices.truncate(w);
        self.row_offsets = row_offsets;
        self
    }

    /// Merges two same-shape matrices entry by entry. With `intersect`, only
    /// positions stored in both are visited.
    fn merge(&self, other: &Self, f: impl Fn(f64, f64) -> f64, intersect: bool) -> Self {
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        fn push(cols: &mut Vec<usize>, vals: &mut Vec<f64>, c: usize, v: f64) {
            if v != 0.0 {
                cols.push(c);
                vals.push(v);
            }
        }
        for i in 0..self.n_rows {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                let take_a = q >= bc.len() || (p < ac.len() && ac[p] < bc[q]);
                let take_b = p >= ac.len() || (q < bc.len() && bc[q] < ac[p]);
                if take_a {
                    if !intersect {
                        push(&mut col_indices, &mut values, ac[p], f(av[p], 0.0));
                    }
                    p += 1;
                } else if take_b {
                    if !intersect {
                        push(&mut col_indices, &mut values, bc[q], f(0.0, bv[q]));
                    }
                    q += 1;
                } else {
                    push(&mut col_indices, &mut values, ac[p], f(av[p], bv[q]));
                    p += 1;
                    q += 1;
                }
            }
            row_offsets.push(values.len());
        }
        Self { n_rows: self.n_rows, n_cols: self.n_cols, row_offsets, col_indices, values }
    }

    fn check_same_shape(&self, op: &'static str, other: &Self) -> Result<(), SparseError> {
        if self.shape() != other.shape() {
            return Err(self.mismatch(op, other));
        }
        Ok(())
    }

    fn mismatch(&self, op: &'static str, other: &Self) -> SparseError {
        SparseError::DimensionMismatch { op, left: self.shape(), right: other.shape() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                for t in 0..k {
                    out[i * m + j] += a[i * k + t] * b[t * m + j];
                }
            }
        }
        out
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.values(), &[3.0]);
        m.validate().unwrap();
    }

    #[test]
    fn empty_triplets_give_zero_matrix() {
        let m = SparseMatrix::from_triplets(3, 3, &[]).unwrap();
        assert_eq!(m.row_offsets(), &[0, 0, 0, 0]);
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn direct_construction_keeps_both_entries() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 1, 5.0), (1, 0, -5.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.get(1, 0), -5.0);
    }

    #[test]
    fn cancelling_duplicates_are_dropped() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 1, 5.0), (0, 1, -5.0)]).unwrap();
        assert_eq!(m.nnz(), 0);
        m.validate().unwrap();
    }

    #[test]
    fn out_of_range_is_rejected() {
        let err = SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, SparseError::IndexOutOfRange { row: 2, .. }));
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let a = SparseMatrix::zeros(2, 3);
        let b = SparseMatrix::zeros(2, 3);
        assert!(a.spmm(&b).is_err());
        assert!(a.hadamard(&SparseMatrix::zeros(3, 2)).is_err());
        assert!(a.spmv(&DenseVector::zeros(2)).is_err());
        assert!(a.add(&SparseMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn rectangular_transpose_swaps_indices() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 4.0), (1, 1, 2.0)]).unwrap();
        let t = m.transpose();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.get(2, 0), 1.0);
        assert_eq!(t.get(0, 1), 4.0);
        assert_eq!(t.get(1, 1), 2.0);
        t.validate().unwrap();
    }

    #[test]
    fn symmetric_transpose_is_identity() {
        let m = SparseMatrix::from_triplets(3, 3, &[(0, 1, 2.0), (1, 0, 2.0), (2, 2, 1.0)]).unwrap();
        assert_eq!(m.transpose(), m);
    }

    #[test]
    fn spmv_with_basis_extracts_column() {
        let m = SparseMatrix::from_triplets(3, 3, &[(0, 1, 2.0), (2, 1, 7.0), (1, 0, 3.0)]).unwrap();
        let col = m.spmv(&DenseVector::basis(3, 1)).unwrap();
        assert_eq!(col.as_slice(), &[2.0, 0.0, 7.0]);
    }

    #[test]
    fn linear_combination_endpoint() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 2, &[(1, 0, 3.0)]).unwrap();
        assert_eq!(a.linear_combination(1.0, &b, 0.0).unwrap(), a);
    }

    #[test]
    fn dense_vector_rejects_nan() {
        assert!(DenseVector::new(vec![1.0, f64::NAN]).is_err());
    }

    fn small_matrix(max_n: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (1..=max_n, 1..=max_n).prop_flat_map(|(r, c)| {
            (Just(r), Just(c), prop::collection::vec(-3i32..=3, r * c))
                .prop_map(|(r, c, v)| (r, c, v.into_iter().map(f64::from).collect()))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn spmm_matches_dense_oracle(
            (n, k, a) in small_matrix(10),
            m in 1usize..=10,
            seed in prop::collection::vec(-3i32..=3, 100),
        ) {
            let b: Vec<f64> = (0..k * m).map(|t| f64::from(seed[t % seed.len()] * if t % 3 == 0 { 0 } else { 1 })).collect();
            let sa = SparseMatrix::from_dense(n, k, &a).unwrap();
            let sb = SparseMatrix::from_dense(k, m, &b).unwrap();
            let c = sa.spmm(&sb).unwrap();
            c.validate().unwrap();
            prop_assert_eq!(c.to_dense(), dense_matmul(&a, &b, n, k, m));
        }

        #[test]
        fn hadamard_and_add_match_dense_oracle((n, m, a) in small_matrix(10), shift in 0usize..7) {
            let b: Vec<f64> = a.iter().enumerate().map(|(t, v)| if (t + shift) % 2 == 0 { v - 1.0 } else { 0.0 }).collect();
            let sa = SparseMatrix::from_dense(n, m, &a).unwrap();
            let sb = SparseMatrix::from_dense(n, m, &b).unwrap();
            let h = sa.hadamard(&sb).unwrap();
            h.validate().unwrap();
            let expect: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
            prop_assert_eq!(h.to_dense(), expect);
            let s = sa.sub(&sb).unwrap();
            s.validate().unwrap();
            let expect: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            prop_assert_eq!(s.to_dense(), expect);
        }

        #[test]
        fn spmv_matches_dense_oracle((n, m, a) in small_matrix(10), x in prop::collection::vec(-3i32..=3, 10)) {
            let sa = SparseMatrix::from_dense(n, m, &a).unwrap();
            let xv: Vec<f64> = x[..m].iter().map(|&v| f64::from(v)).collect();
            let y = sa.spmv(&DenseVector::new(xv.clone()).unwrap()).unwrap();
            let expect: Vec<f64> = (0..n).map(|i| (0..m).map(|j| a[i * m + j] * xv[j]).sum()).collect();
            prop_assert_eq!(y.as_slice(), &expect[..]);
        }

        #[test]
        fn double_transpose_is_identity((n, m, a) in small_matrix(10)) {
            let sa = SparseMatrix::from_dense(n, m, &a).unwrap();
            let t = sa.transpose();
            t.validate().unwrap();
            prop_assert_eq!(t.transpose(), sa);
        }

        #[test]
        fn identity_and_zero_products((n, _m, a) in small_matrix(10)) {
            let sa = SparseMatrix::from_dense(n, n, &a[..n * n.min(_m)].iter().chain(core::iter::repeat(&0.0)).take(n * n).copied().collect::<Vec<_>>()).unwrap();
            prop_assert_eq!(SparseMatrix::identity(n).spmm(&sa).unwrap(), sa.clone());
            prop_assert_eq!(sa.spmm(&SparseMatrix::zeros(n, n)).unwrap().nnz(), 0);
            let diag: Vec<_> = (0..n).filter(|&i| sa.get(i, i) != 0.0).map(|i| (i, i, sa.get(i, i))).collect();
            prop_assert_eq!(sa.hadamard(&SparseMatrix::identity(n)).unwrap(), SparseMatrix::from_triplets(n, n, &diag).unwrap());
        }
    }
}
