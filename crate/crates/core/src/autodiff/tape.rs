use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use super::{matmul, matmul_nt, matmul_tn, AutodiffError, Tensor, COSINE_EPS};
use crate::sparse::SparseMatrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Grouped index lists: group `g` covers `indices[offsets[g]..offsets[g+1]]`
/// with per-entry constant weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Segments {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl Segments {
    /// Builds segments from index groups; every entry has weight 1.
    pub fn from_groups(groups: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(groups.len() + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        for g in groups {
            indices.extend_from_slice(g);
            offsets.push(indices.len());
        }
        let weights = vec![1.0; indices.len()];
        Self { offsets, indices, weights }
    }

    /// Like [`Segments::from_groups`], each entry weighted by `1/|group|`.
    pub fn means(groups: &[Vec<usize>]) -> Self {
        let mut s = Self::from_groups(groups);
        for g in 0..s.n_groups() {
            let span = s.offsets[g]..s.offsets[g + 1];
            let w = 1.0 / span.len().max(1) as f64;
            s.weights[span].iter_mut().for_each(|x| *x = w);
        }
        s
    }

    pub fn n_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of entries across all groups.
    pub fn n_entries(&self) -> usize {
        self.indices.len()
    }

    pub fn group(&self, g: usize) -> core::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn max_index(&self) -> Option<usize> {
        self.indices.iter().copied().max()
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    AddRow(Var, Var),
    ScaleRows(Var, Rc<[f64]>),
    ConcatCols(Vec<Var>),
    RowSoftmax(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Log(Var),
    Exp(Var),
    Sum(Var),
    Mean(Var),
    RowMean(Var),
    GatherRows(Var, Rc<[usize]>),
    SegmentSum(Var, Rc<Segments>),
    WeightedSegmentSum(Var, Var, Rc<Segments>),
    SegmentSoftmax(Var, Rc<Segments>),
    CosineRows(Var, Var),
    SparseLeft(Rc<SparseMatrix>, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recording of one forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

fn check_finite(op: &'static str, t: &Tensor) -> Result<(), AutodiffError> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(AutodiffError::NonFinite { op })
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), AutodiffError> {
    if a.shape() != b.shape() {
        return Err(AutodiffError::Shape { op, left: a.shape(), right: b.shape() });
    }
    Ok(())
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor { rows: t.rows, cols: t.cols, data: t.data.iter().map(|&v| f(v)).collect() }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor { rows: a.rows, cols: a.cols, data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss with respect to `v`, if any
    /// gradient reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, zero-filled when nothing reached it.
    pub fn grad_or_zero(&self, v: Var) -> Tensor {
        self.grad(v).cloned().unwrap_or_else(|| {
            let (r, c) = self.value(v).shape();
            Tensor::zeros(r, c)
        })
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var, AutodiffError> {
        check_finite(name, &value)?;
        let rg = inputs.iter().any(|&v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, op, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols != vb.rows {
            return Err(AutodiffError::Shape { op: "matmul", left: va.shape(), right: vb.shape() });
        }
        let out = matmul(va, vb);
        self.record("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        same_shape("add", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x + y);
        self.record("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        same_shape("sub", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x - y);
        self.record("sub", out, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        same_shape("mul", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x * y);
        self.record("mul", out, Op::Mul(a, b), &[a, b])
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        same_shape("div", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x / y);
        self.record("div", out, Op::Div(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, AutodiffError> {
        let out = map(self.value(a), |x| x * factor);
        self.record("scale", out, Op::Scale(a, factor), &[a])
    }

    /// Multiplies every entry of `a` by the `1×1` tensor `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var, AutodiffError> {
        let vs = self.value(s);
        if vs.shape() != (1, 1) {
            return Err(AutodiffError::Shape { op: "scale_by", left: self.value(a).shape(), right: vs.shape() });
        }
        let f = vs.item();
        let out = map(self.value(a), |x| x * f);
        self.record("scale_by", out, Op::ScaleBy(a, s), &[a, s])
    }

    /// Adds the `1×d` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, AutodiffError> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.rows != 1 || vb.cols != va.cols {
            return Err(AutodiffError::Shape { op: "add_row", left: va.shape(), right: vb.shape() });
        }
        let mut out = va.clone();
        for r in 0..out.rows {
            for (d, b) in out.row_mut(r).iter_mut().zip(&vb.data) {
                *d += b;
            }
        }
        self.record("add_row", out, Op::AddRow(a, bias), &[a, bias])
    }

    /// Multiplies row `i` of `a` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Var, factors: &[f64]) -> Result<Var, AutodiffError> {
        let va = self.value(a);
        if factors.len() != va.rows {
            return Err(AutodiffError::Shape { op: "scale_rows", left: va.shape(), right: (factors.len(), 1) });
        }
        let mut out = va.clone();
        for (r, &f) in factors.iter().enumerate() {
            out.row_mut(r).iter_mut().for_each(|x| *x *= f);
        }
        self.record("scale_rows", out, Op::ScaleRows(a, factors.into()), &[a])
    }

    /// Column-wise concatenation `[a ‖ b ‖ …]`.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows);
        for &p in parts {
            let v = self.value(p);
            if v.rows != rows {
                return Err(AutodiffError::Shape { op: "concat", left: (rows, 0), right: v.shape() });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.row_mut(r)[c0..c0 + src.len()].copy_from_slice(src);
                c0 += src.len();
            }
        }
        self.record("concat", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Softmax across the columns of each row.
    pub fn row_softmax(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let mut out = self.value(a).clone();
        for r in 0..out.rows {
            softmax_in_place(out.row_mut(r));
        }
        self.record("row_softmax", out, Op::RowSoftmax(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = map(self.value(a), |x| if x > 0.0 { x } else { 0.0 });
        self.record("relu", out, Op::Relu(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, AutodiffError> {
        let out = map(self.value(a), |x| if x > 0.0 { x } else { slope * x });
        self.record("leaky_relu", out, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = map(self.value(a), libm::log);
        self.record("log", out, Op::Log(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = map(self.value(a), libm::exp);
        self.record("exp", out, Op::Exp(a), &[a])
    }

    /// Sum of all entries, as a `1×1` tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let s = self.value(a).data.iter().sum();
        self.record("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Mean of all entries, as a `1×1` tensor; zero for an empty tensor.
    pub fn mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = self.value(a);
        let m = if v.is_empty() { 0.0 } else { v.data.iter().sum::<f64>() / v.len() as f64 };
        self.record("mean", Tensor::scalar(m), Op::Mean(a), &[a])
    }

    /// Mean across the columns of each row, as an `n×1` column.
    pub fn row_mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = self.value(a);
        let cols = v.cols.max(1) as f64;
        let out = Tensor::column((0..v.rows).map(|r| v.row(r).iter().sum::<f64>() / cols).collect());
        self.record("row_mean", out, Op::RowMean(a), &[a])
    }

    /// Rows `indices[k]` of `a`, stacked.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var, AutodiffError> {
        let va = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= va.rows) {
            return Err(AutodiffError::Index { op: "gather_rows", index: bad, len: va.rows });
        }
        let mut out = Tensor::zeros(indices.len(), va.cols);
        for (k, &i) in indices.iter().enumerate() {
            out.row_mut(k).copy_from_slice(va.row(i));
        }
        self.record("gather_rows", out, Op::GatherRows(a, indices.into()), &[a])
    }

    /// Row `g` of the output is `Σ_k weight_k · a[index_k]` over group `g`.
    pub fn segment_sum(&mut self, a: Var, seg: &Rc<Segments>) -> Result<Var, AutodiffError> {
        let va = self.value(a);
        check_segments("segment_sum", seg, va.rows)?;
        let mut out = Tensor::zeros(seg.n_groups(), va.cols);
        for g in 0..seg.n_groups() {
            for k in seg.group(g) {
                let (i, w) = (seg.indices[k], seg.weights[k]);
                for (d, s) in out.row_mut(g).iter_mut().zip(va.row(i)) {
                    *d += w * s;
                }
            }
        }
        self.record("segment_sum", out, Op::SegmentSum(a, seg.clone()), &[a])
    }

    /// Row `g` of the output is `Σ_k weights[k] · a[index_k]` over group `g`,
    /// where `weights` is an `n_entries×1` tape value.
    pub fn weighted_segment_sum(&mut self, a: Var, weights: Var, seg: &Rc<Segments>) -> Result<Var, AutodiffError> {
        let (va, vw) = (self.value(a), self.value(weights));
        check_segments("weighted_segment_sum", seg, va.rows)?;
        if vw.shape() != (seg.n_entries(), 1) {
            return Err(AutodiffError::Shape { op: "weighted_segment_sum", left: (seg.n_entries(), 1), right: vw.shape() });
        }
        let mut out = Tensor::zeros(seg.n_groups(), va.cols);
        for g in 0..seg.n_groups() {
            for k in seg.group(g) {
                let (i, w) = (seg.indices[k], vw.data[k]);
                for (d, s) in out.row_mut(g).iter_mut().zip(va.row(i)) {
                    *d += w * s;
                }
            }
        }
        self.record("weighted_segment_sum", out, Op::WeightedSegmentSum(a, weights, seg.clone()), &[a, weights])
    }

    /// Softmax of the `n_entries×1` column `a` within each group.
    pub fn segment_softmax(&mut self, a: Var, seg: &Rc<Segments>) -> Result<Var, AutodiffError> {
        let va = self.value(a);
        if va.shape() != (seg.n_entries(), 1) {
            return Err(AutodiffError::Shape { op: "segment_softmax", left: (seg.n_entries(), 1), right: va.shape() });
        }
        let mut out = va.clone();
        for g in 0..seg.n_groups() {
            softmax_in_place(&mut out.data[seg.group(g)]);
        }
        self.record("segment_softmax", out, Op::SegmentSoftmax(a, seg.clone()), &[a])
    }

    /// Cosine similarity of matching rows, as an `n×1` column. Each norm is
    /// `sqrt(‖x‖² + COSINE_EPS)`.
    pub fn cosine_rows(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("cosine_rows", va, vb)?;
        let out = Tensor::column(
            (0..va.rows)
                .map(|r| {
                    let (x, y) = (va.row(r), vb.row(r));
                    let (dot, nx, ny) = cosine_parts(x, y);
                    dot / (nx * ny)
                })
                .collect(),
        );
        self.record("cosine_rows", out, Op::CosineRows(a, b), &[a, b])
    }

    /// `m · a` for a constant sparse matrix `m`.
    pub fn sparse_left(&mut self, m: &Rc<SparseMatrix>, a: Var) -> Result<Var, AutodiffError> {
        let va = self.value(a);
        if m.n_cols() != va.rows {
            return Err(AutodiffError::Shape { op: "sparse_left", left: m.shape(), right: va.shape() });
        }
        let data = m.mul_dense(&va.data, va.cols).expect("shape checked");
        let out = Tensor { rows: m.n_rows(), cols: va.cols, data };
        self.record("sparse_left", out, Op::SparseLeft(m.clone(), a), &[a])
    }

    /// Reverse sweep from the scalar `loss`. May run once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        if self.backward_done {
            return Err(AutodiffError::BackwardTwice);
        }
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NotScalar(shape));
        }
        self.backward_done = true;
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::scalar(1.0));
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(g) = self.grads[id].take() else { continue };
            self.propagate(id, &g);
            self.grads[id] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, delta: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&mut self, id: usize, g: &Tensor) {
        let node = &self.nodes[id];
        let out = &node.value;
        let mut updates: Vec<(Var, Tensor)> = Vec::new();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                if self.wants(a) {
                    updates.push((a, matmul_nt(g, self.value(b))));
                }
                if self.wants(b) {
                    updates.push((b, matmul_tn(self.value(a), g)));
                }
            }
            &Op::Add(a, b) => {
                updates.push((a, g.clone()));
                updates.push((b, g.clone()));
            }
            &Op::Sub(a, b) => {
                updates.push((a, g.clone()));
                updates.push((b, map(g, |x| -x)));
            }
            &Op::Mul(a, b) => {
                updates.push((a, zip(g, self.value(b), |x, y| x * y)));
                updates.push((b, zip(g, self.value(a), |x, y| x * y)));
            }
            &Op::Div(a, b) => {
                let vb = self.value(b);
                updates.push((a, zip(g, vb, |x, y| x / y)));
                let ga = zip(g, out, |x, q| x * q);
                updates.push((b, zip(&ga, vb, |x, y| -x / y)));
            }
            &Op::Scale(a, f) => updates.push((a, map(g, |x| x * f))),
            &Op::ScaleBy(a, s) => {
                let f = self.value(s).item();
                updates.push((a, map(g, |x| x * f)));
                let ds: f64 = g.data.iter().zip(&self.value(a).data).map(|(x, y)| x * y).sum();
                updates.push((s, Tensor::scalar(ds)));
            }
            &Op::AddRow(a, bias) => {
                updates.push((a, g.clone()));
                let mut gb = Tensor::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (d, s) in gb.data.iter_mut().zip(g.row(r)) {
                        *d += s;
                    }
                }
                updates.push((bias, gb));
            }
            Op::ScaleRows(a, factors) => {
                let mut ga = g.clone();
                for (r, &f) in factors.iter().enumerate() {
                    ga.row_mut(r).iter_mut().for_each(|x| *x *= f);
                }
                updates.push((*a, ga));
            }
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for &p in parts {
                    let cols = self.value(p).cols;
                    let mut gp = Tensor::zeros(g.rows, cols);
                    for r in 0..g.rows {
                        gp.row_mut(r).copy_from_slice(&g.row(r)[c0..c0 + cols]);
                    }
                    c0 += cols;
                    updates.push((p, gp));
                }
            }
            &Op::RowSoftmax(a) => {
                let mut ga = Tensor::zeros(g.rows, g.cols);
                for r in 0..g.rows {
                    softmax_backward(out.row(r), g.row(r), ga.row_mut(r));
                }
                updates.push((a, ga));
            }
            &Op::Relu(a) => {
                updates.push((a, zip(g, self.value(a), |x, v| if v > 0.0 { x } else { 0.0 })));
            }
            &Op::LeakyRelu(a, slope) => {
                updates.push((a, zip(g, self.value(a), |x, v| if v > 0.0 { x } else { slope * x })));
            }
            &Op::Log(a) => updates.push((a, zip(g, self.value(a), |x, v| x / v))),
            &Op::Exp(a) => updates.push((a, zip(g, out, |x, e| x * e))),
            &Op::Sum(a) => {
                let (r, c) = self.value(a).shape();
                updates.push((a, Tensor::filled(r, c, g.item())));
            }
            &Op::Mean(a) => {
                let (r, c) = self.value(a).shape();
                let n = (r * c).max(1) as f64;
                updates.push((a, Tensor::filled(r, c, g.item() / n)));
            }
            &Op::RowMean(a) => {
                let (r, c) = self.value(a).shape();
                let mut ga = Tensor::zeros(r, c);
                for i in 0..r {
                    let v = g.data[i] / c.max(1) as f64;
                    ga.row_mut(i).iter_mut().for_each(|x| *x = v);
                }
                updates.push((a, ga));
            }
            Op::GatherRows(a, indices) => {
                let (r, c) = self.value(*a).shape();
                let mut ga = Tensor::zeros(r, c);
                for (k, &i) in indices.iter().enumerate() {
                    for (d, s) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                        *d += s;
                    }
                }
                updates.push((*a, ga));
            }
            Op::SegmentSum(a, seg) => {
                let (r, c) = self.value(*a).shape();
                let mut ga = Tensor::zeros(r, c);
                for grp in 0..seg.n_groups() {
                    for k in seg.group(grp) {
                        let (i, w) = (seg.indices[k], seg.weights[k]);
                        for (d, s) in ga.row_mut(i).iter_mut().zip(g.row(grp)) {
                            *d += w * s;
                        }
                    }
                }
                updates.push((*a, ga));
            }
            Op::WeightedSegmentSum(a, weights, seg) => {
                let va = self.value(*a);
                let vw = self.value(*weights);
                let mut ga = Tensor::zeros(va.rows, va.cols);
                let mut gw = Tensor::zeros(vw.rows, 1);
                for grp in 0..seg.n_groups() {
                    let grow = g.row(grp);
                    for k in seg.group(grp) {
                        let i = seg.indices[k];
                        let w = vw.data[k];
                        for (d, s) in ga.row_mut(i).iter_mut().zip(grow) {
                            *d += w * s;
                        }
                        gw.data[k] = grow.iter().zip(va.row(i)).map(|(x, y)| x * y).sum();
                    }
                }
                updates.push((*a, ga));
                updates.push((*weights, gw));
            }
            Op::SegmentSoftmax(a, seg) => {
                let mut ga = Tensor::zeros(g.rows, 1);
                for grp in 0..seg.n_groups() {
                    let span = seg.group(grp);
                    softmax_backward(&out.data[span.clone()], &g.data[span.clone()], &mut ga.data[span]);
                }
                updates.push((*a, ga));
            }
            &Op::CosineRows(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                let mut ga = Tensor::zeros(va.rows, va.cols);
                let mut gb = Tensor::zeros(vb.rows, vb.cols);
                for r in 0..va.rows {
                    let (x, y) = (va.row(r), vb.row(r));
                    let (dot, nx, ny) = cosine_parts(x, y);
                    let c = dot / (nx * ny);
                    let up = g.data[r];
                    for k in 0..x.len() {
                        ga.row_mut(r)[k] = up * (y[k] / (nx * ny) - c * x[k] / (nx * nx));
                        gb.row_mut(r)[k] = up * (x[k] / (nx * ny) - c * y[k] / (ny * ny));
                    }
                }
                updates.push((a, ga));
                updates.push((b, gb));
            }
            Op::SparseLeft(m, a) => {
                let data = m.transpose().mul_dense(&g.data, g.cols).expect("shape checked");
                updates.push((*a, Tensor { rows: m.n_cols(), cols: g.cols, data }));
            }
        }
        for (v, delta) in updates {
            self.accumulate(v, delta);
        }
    }
}

fn check_segments(op: &'static str, seg: &Segments, rows: usize) -> Result<(), AutodiffError> {
    match seg.max_index() {
        Some(i) if i >= rows => Err(AutodiffError::Index { op, index: i, len: rows }),
        _ => Ok(()),
    }
}

fn cosine_parts(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = libm::sqrt(x.iter().map(|a| a * a).sum::<f64>() + COSINE_EPS);
    let ny = libm::sqrt(y.iter().map(|a| a * a).sum::<f64>() + COSINE_EPS);
    (dot, nx, ny)
}

fn softmax_in_place(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = libm::exp(*x - max);
        total += *x;
    }
    xs.iter_mut().for_each(|x| *x /= total);
}

/// `dx_i = y_i (g_i − Σ_j g_j y_j)`.
fn softmax_backward(y: &[f64], g: &[f64], dx: &mut [f64]) {
    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((d, &yi), &gi) in dx.iter_mut().zip(y).zip(g) {
        *d = yi * (gi - dot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn relu_forward() {
        let mut tape = Tape::new();
        let x = tape.constant(t(1, 2, &[-1.0, 2.0]));
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 2.0]);
    }

    #[test]
    fn uniform_softmax() {
        let mut tape = Tape::new();
        let x = tape.constant(t(1, 3, &[0.0, 0.0, 0.0]));
        let y = tape.row_softmax(x).unwrap();
        for &v in tape.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn self_cosine_is_one() {
        let mut tape = Tape::new();
        let x = tape.constant(t(2, 3, &[1.0, -2.0, 3.0, 0.5, 0.5, 0.0]));
        let c = tape.cosine_rows(x, x).unwrap();
        for &v in tape.value(c).data() {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_vectors_do_not_nan_cosine() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(1, 3));
        let c = tape.cosine_rows(x, x).unwrap();
        assert_eq!(tape.value(c).item(), 0.0);
        let s = tape.sum(c).unwrap();
        tape.backward(s).unwrap();
        assert!(tape.grad(x).unwrap().is_finite());
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap().item(), 6.0);
    }

    #[test]
    fn duplicated_inputs_accumulate() {
        let mut tape = Tape::new();
        let x = tape.param(t(1, 2, &[1.0, 2.0]));
        let y = tape.add(x, x).unwrap();
        let z = tape.add(y, x).unwrap();
        let s = tape.sum(z).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn backward_twice_is_an_error() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(1.0));
        let y = tape.exp(x).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.backward(y), Err(AutodiffError::BackwardTwice));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(2, 1));
        assert_eq!(tape.backward(x), Err(AutodiffError::NotScalar((2, 1))));
    }

    #[test]
    fn nan_names_the_op() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(-1.0));
        assert_eq!(tape.log(x), Err(AutodiffError::NonFinite { op: "log" }));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        assert!(matches!(tape.matmul(a, b), Err(AutodiffError::Shape { op: "matmul", .. })));
        let c = tape.constant(Tensor::zeros(3, 2));
        assert!(matches!(tape.add(a, c), Err(AutodiffError::Shape { op: "add", .. })));
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut tape = Tape::new();
        let x = tape.param(t(1, 2, &[0.0, 1.0]));
        let y = tape.relu(x).unwrap();
        let s = tape.sum(y).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn segment_softmax_groups_sum_to_one() {
        let seg = Rc::new(Segments::from_groups(&[vec![0, 1, 2], vec![0], vec![1, 2]]));
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::column(alloc::vec![0.3, -1.0, 2.0, 5.0, 0.1, 0.1]));
        let y = tape.segment_softmax(x, &seg).unwrap();
        let v = tape.value(y).data();
        assert!((v[0] + v[1] + v[2] - 1.0).abs() < 1e-15);
        assert_eq!(v[3], 1.0);
        assert_eq!((v[4], v[5]), (0.5, 0.5));
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(2.0));
        let p = tape.param(Tensor::scalar(3.0));
        let y = tape.mul(c, p).unwrap();
        tape.backward(y).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(p).unwrap().item(), 2.0);
    }
}
