//! Recording tape and reverse pass.

use rand::Rng as _;

use super::params::{Gradients, ParamId, ParamSet};
use super::tensor::{matmul_at_acc, matmul_bt_acc, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

type Derivative = Box<dyn Fn(f64) -> f64 + Send + Sync>;

enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softmax(Var, usize),
    LogSoftmax(Var, usize),
    Concat(Vec<Var>, usize),
    MaskedFill(Var, Vec<bool>),
    Sum(Var),
    Mean(Var),
    SquaredError(Var, Var),
    GatherRows(Var, Vec<usize>),
    SliceRows(Var, usize),
    Dropout(Var, Vec<f64>),
    Unary(Var, Derivative),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// A single-use computation graph. Nodes are appended in evaluation order, so
/// the graph is acyclic by construction and the reverse pass is a reverse
/// sweep over the node list.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Index arithmetic for a reduction along `axis` of a `rows × cols` matrix:
/// returns (number of slices, slice length, stride between slice elements,
/// offset of slice `s`).
fn axis_layout(rows: usize, cols: usize, axis: usize) -> (usize, usize, usize, impl Fn(usize) -> usize) {
    if axis == 0 {
        (cols, rows, cols, Box::new(move |s: usize| s) as Box<dyn Fn(usize) -> usize>)
    } else {
        (rows, cols, 1, Box::new(move |s: usize| s * cols) as Box<dyn Fn(usize) -> usize>)
    }
}

fn softmax_into(x: &[f64], out: &mut [f64], rows: usize, cols: usize, axis: usize, log: bool) {
    let (n_slices, len, stride, offset) = axis_layout(rows, cols, axis);
    for s in 0..n_slices {
        let base = offset(s);
        let idx = |j: usize| base + j * stride;
        let max = (0..len).map(|j| x[idx(j)]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = (0..len).map(|j| (x[idx(j)] - max).exp()).sum();
        let log_z = max + z.ln();
        for j in 0..len {
            out[idx(j)] = if log {
                x[idx(j)] - log_z
            } else {
                (x[idx(j)] - max).exp() / z
            };
        }
    }
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<[usize; 2]> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(sa)
    }

    /// A non-trainable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// A trainable leaf holding a copy of parameter `id`.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        self.push(params.get(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = super::tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    /// Adds the row vector `b` (1×c) to every row of `x` (r×c).
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let [r, c] = self.shape(x);
        if self.shape(b) != [1, c] {
            return Err(Error::Shape {
                op: "add_row",
                lhs: vec![r, c],
                rhs: self.shape(b).to_vec(),
            });
        }
        let bv = self.data(b).to_vec();
        let mut out = self.value(x).clone();
        for row in out.data_mut().chunks_mut(c) {
            for (o, bb) in row.iter_mut().zip(&bv) {
                *o += bb;
            }
        }
        Ok(self.push(out, Op::AddRow(x, b)))
    }

    /// `x · w + b`, with `b` broadcast over rows when given.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, w)?;
        match b {
            Some(b) => self.add_row(y, b),
            None => Ok(y),
        }
    }

    /// Kernel-size-1 convolution over a sequence of `n` positions: the same
    /// linear map applied to every row of `x` (n × in_channels).
    pub fn pointwise(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.linear(x, w, Some(b))
    }

    fn zip_with(&mut self, op_name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let [r, c] = self.same_shape(op_name, a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(self.push(Tensor::new(r, c, data)?, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, f: f64) -> Var {
        let value = self.value(a).map(|x| x * f);
        self.push(value, Op::Scale(a, f))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(value, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    fn check_axis(&self, op: &'static str, axis: usize) -> Result<()> {
        if axis > 1 {
            return Err(Error::Autodiff(format!("{op}: axis {axis} out of range for a matrix")));
        }
        Ok(())
    }

    /// Softmax along `axis` (0: over rows within each column, 1: over columns
    /// within each row).
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.check_axis("softmax", axis)?;
        let [r, c] = self.shape(a);
        let mut out = vec![0.0; r * c];
        softmax_into(self.data(a), &mut out, r, c, axis, false);
        Ok(self.push(Tensor::new(r, c, out)?, Op::Softmax(a, axis)))
    }

    pub fn log_softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.check_axis("log_softmax", axis)?;
        let [r, c] = self.shape(a);
        let mut out = vec![0.0; r * c];
        softmax_into(self.data(a), &mut out, r, c, axis, true);
        Ok(self.push(Tensor::new(r, c, out)?, Op::LogSoftmax(a, axis)))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        self.check_axis("concat", axis)?;
        let first = *parts
            .first()
            .ok_or_else(|| Error::Autodiff("concat of zero tensors".into()))?;
        let [r0, c0] = self.shape(first);
        for &p in &parts[1..] {
            let [r, c] = self.shape(p);
            if (axis == 0 && c != c0) || (axis == 1 && r != r0) {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: vec![r0, c0],
                    rhs: vec![r, c],
                });
            }
        }
        let value = if axis == 0 {
            let rows = parts.iter().map(|&p| self.shape(p)[0]).sum();
            let data = parts.iter().flat_map(|&p| self.data(p).iter().copied()).collect();
            Tensor::new(rows, c0, data)?
        } else {
            let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
            let mut data = Vec::with_capacity(r0 * cols);
            for row in 0..r0 {
                for &p in parts {
                    data.extend_from_slice(self.value(p).row_slice(row));
                }
            }
            Tensor::new(r0, cols, data)?
        };
        Ok(self.push(value, Op::Concat(parts.to_vec(), axis)))
    }

    /// Sets positions where `mask` is true to −∞.
    pub fn masked_fill(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return Err(Error::Shape {
                op: "masked_fill",
                lhs: self.shape(a).to_vec(),
                rhs: vec![mask.len()],
            });
        }
        let mut value = self.value(a).clone();
        for (v, &m) in value.data_mut().iter_mut().zip(mask) {
            if m {
                *v = f64::NEG_INFINITY;
            }
        }
        Ok(self.push(value, Op::MaskedFill(a, mask.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let d = self.data(a);
        let m = d.iter().sum::<f64>() / d.len() as f64;
        self.push(Tensor::scalar(m), Op::Mean(a))
    }

    /// Mean of squared differences.
    pub fn squared_error(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("squared_error", a, b)?;
        let (da, db) = (self.data(a), self.data(b));
        let m = da.iter().zip(db).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / da.len() as f64;
        Ok(self.push(Tensor::scalar(m), Op::SquaredError(a, b)))
    }

    /// Selects rows of `a` by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let [r, c] = self.shape(a);
        if idx.is_empty() {
            return Err(Error::Autodiff("gather_rows with no indices".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::Autodiff(format!("gather_rows index {bad} out of range for {r} rows")));
        }
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(self.value(a).row_slice(i));
        }
        Ok(self.push(Tensor::new(idx.len(), c, data)?, Op::GatherRows(a, idx.to_vec())))
    }

    /// Rows `start..end` of `a`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let [r, c] = self.shape(a);
        if start >= end || end > r {
            return Err(Error::Autodiff(format!("slice_rows {start}..{end} invalid for {r} rows")));
        }
        let data = self.data(a)[start * c..end * c].to_vec();
        Ok(self.push(Tensor::new(end - start, c, data)?, Op::SliceRows(a, start)))
    }

    /// Inverted dropout: zeroes each entry with probability `rate` and scales
    /// survivors by `1 / (1 - rate)`. A zero rate returns `a` unchanged.
    pub fn dropout(&mut self, a: Var, rate: f64, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        if rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let mut value = self.value(a).clone();
        for (v, m) in value.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        Ok(self.push(value, Op::Dropout(a, mask)))
    }

    /// Elementwise `f` with caller-supplied derivative `df`.
    pub fn unary(
        &mut self,
        a: Var,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Var {
        let value = self.value(a).map(f);
        self.push(value, Op::Unary(a, Box::new(df)))
    }

    /// Reverse pass from the scalar `loss`, adding ∂loss/∂param into `grads`
    /// for every parameter leaf reached.
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Autodiff(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        adj.resize_with(loss.0 + 1, || None);
        adj[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let [rows, cols] = node.value.shape();
            let mut acc = |v: Var, f: &dyn Fn(&mut [f64])| {
                let buf = adj[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
                f(buf);
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let dst = grads.get_mut(*id);
                    if dst.len() != g.len() {
                        return Err(Error::Autodiff(format!(
                            "gradient buffer for parameter {} has {} values, leaf has {}",
                            id.index(),
                            dst.len(),
                            g.len()
                        )));
                    }
                    for (d, v) in dst.iter_mut().zip(&g) {
                        *d += v;
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    acc(*a, &|buf| matmul_bt_acc(&g, tb.data(), buf, m, n, k));
                    acc(*b, &|buf| matmul_at_acc(ta.data(), &g, buf, m, k, n));
                }
                Op::Transpose(a) => {
                    acc(*a, &|buf| {
                        for r in 0..rows {
                            for c in 0..cols {
                                buf[c * rows + r] += g[r * cols + c];
                            }
                        }
                    });
                }
                Op::AddRow(x, b) => {
                    acc(*x, &|buf| buf.iter_mut().zip(&g).for_each(|(d, v)| *d += v));
                    acc(*b, &|buf| {
                        for row in g.chunks(cols) {
                            buf.iter_mut().zip(row).for_each(|(d, v)| *d += v);
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc(*a, &|buf| buf.iter_mut().zip(&g).for_each(|(d, v)| *d += v));
                    acc(*b, &|buf| buf.iter_mut().zip(&g).for_each(|(d, v)| *d += v));
                }
                Op::Sub(a, b) => {
                    acc(*a, &|buf| buf.iter_mut().zip(&g).for_each(|(d, v)| *d += v));
                    acc(*b, &|buf| buf.iter_mut().zip(&g).for_each(|(d, v)| *d -= v));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.data(*a), self.data(*b));
                    acc(*a, &|buf| {
                        for ((d, v), y) in buf.iter_mut().zip(&g).zip(vb) {
                            *d += v * y;
                        }
                    });
                    acc(*b, &|buf| {
                        for ((d, v), x) in buf.iter_mut().zip(&g).zip(va) {
                            *d += v * x;
                        }
                    });
                }
                Op::Scale(a, f) => {
                    acc(*a, &|buf| buf.iter_mut().zip(&g).for_each(|(d, v)| *d += v * f));
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    acc(*a, &|buf| {
                        for ((d, v), y) in buf.iter_mut().zip(&g).zip(y) {
                            *d += v * (1.0 - y * y);
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    acc(*a, &|buf| {
                        for ((d, v), y) in buf.iter_mut().zip(&g).zip(y) {
                            *d += v * y * (1.0 - y);
                        }
                    });
                }
                Op::Relu(a) => {
                    let x = self.data(*a);
                    acc(*a, &|buf| {
                        for ((d, v), x) in buf.iter_mut().zip(&g).zip(x) {
                            if *x > 0.0 {
                                *d += v;
                            }
                        }
                    });
                }
                Op::Softmax(a, axis) => {
                    let y = node.value.data();
                    let (n_slices, len, stride, offset) = axis_layout(rows, cols, *axis);
                    acc(*a, &|buf| {
                        for s in 0..n_slices {
                            let base = offset(s);
                            let dot: f64 = (0..len).map(|j| g[base + j * stride] * y[base + j * stride]).sum();
                            for j in 0..len {
                                let k = base + j * stride;
                                buf[k] += y[k] * (g[k] - dot);
                            }
                        }
                    });
                }
                Op::LogSoftmax(a, axis) => {
                    let y = node.value.data();
                    let (n_slices, len, stride, offset) = axis_layout(rows, cols, *axis);
                    acc(*a, &|buf| {
                        for s in 0..n_slices {
                            let base = offset(s);
                            let total: f64 = (0..len).map(|j| g[base + j * stride]).sum();
                            for j in 0..len {
                                let k = base + j * stride;
                                buf[k] += g[k] - y[k].exp() * total;
                            }
                        }
                    });
                }
                Op::Concat(parts, axis) => {
                    if *axis == 0 {
                        let mut offset = 0;
                        for &p in parts {
                            let len = self.value(p).len();
                            acc(p, &|buf| {
                                buf.iter_mut().zip(&g[offset..offset + len]).for_each(|(d, v)| *d += v)
                            });
                            offset += len;
                        }
                    } else {
                        let mut col0 = 0;
                        for &p in parts {
                            let pc = self.shape(p)[1];
                            acc(p, &|buf| {
                                for r in 0..rows {
                                    let src = &g[r * cols + col0..r * cols + col0 + pc];
                                    buf[r * pc..(r + 1) * pc]
                                        .iter_mut()
                                        .zip(src)
                                        .for_each(|(d, v)| *d += v);
                                }
                            });
                            col0 += pc;
                        }
                    }
                }
                Op::MaskedFill(a, mask) => {
                    acc(*a, &|buf| {
                        for ((d, v), &m) in buf.iter_mut().zip(&g).zip(mask) {
                            if !m {
                                *d += v;
                            }
                        }
                    });
                }
                Op::Sum(a) => {
                    acc(*a, &|buf| buf.iter_mut().for_each(|d| *d += g[0]));
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len() as f64;
                    acc(*a, &|buf| buf.iter_mut().for_each(|d| *d += g[0] / n));
                }
                Op::SquaredError(a, b) => {
                    let (va, vb) = (self.data(*a), self.data(*b));
                    let scale = 2.0 * g[0] / va.len() as f64;
                    acc(*a, &|buf| {
                        for ((d, x), y) in buf.iter_mut().zip(va).zip(vb) {
                            *d += scale * (x - y);
                        }
                    });
                    acc(*b, &|buf| {
                        for ((d, x), y) in buf.iter_mut().zip(va).zip(vb) {
                            *d -= scale * (x - y);
                        }
                    });
                }
                Op::GatherRows(a, idx) => {
                    acc(*a, &|buf| {
                        for (out_row, &src) in idx.iter().enumerate() {
                            let grow = &g[out_row * cols..(out_row + 1) * cols];
                            buf[src * cols..(src + 1) * cols]
                                .iter_mut()
                                .zip(grow)
                                .for_each(|(d, v)| *d += v);
                        }
                    });
                }
                Op::SliceRows(a, start) => {
                    acc(*a, &|buf| {
                        buf[start * cols..start * cols + g.len()]
                            .iter_mut()
                            .zip(&g)
                            .for_each(|(d, v)| *d += v)
                    });
                }
                Op::Dropout(a, mask) => {
                    acc(*a, &|buf| {
                        for ((d, v), m) in buf.iter_mut().zip(&g).zip(mask) {
                            *d += v * m;
                        }
                    });
                }
                Op::Unary(a, df) => {
                    let x = self.data(*a);
                    acc(*a, &|buf| {
                        for ((d, v), x) in buf.iter_mut().zip(&g).zip(x) {
                            *d += v * df(*x);
                        }
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_with(name: &str, t: Tensor) -> (ParamSet, ParamId) {
        let mut p = ParamSet::new();
        let id = p.add(name, t);
        (p, id)
    }

    #[test]
    fn equal_logits_give_uniform_softmax() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::column(vec![0.3; 4]));
        let y = tape.softmax(x, 0).unwrap();
        for &v in tape.value(y).data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn masked_softmax_point_mass() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::column(vec![1.0, 5.0, -2.0, 0.5]));
        let m = tape.masked_fill(x, &[true, true, false, true]).unwrap();
        let y = tape.softmax(m, 0).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 1.0, 0.0]);
        let ly = tape.log_softmax(m, 0).unwrap();
        assert_eq!(tape.value(ly).data()[2], 0.0);
    }

    #[test]
    fn pointwise_identity() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap());
        let w = tape.constant(Tensor::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let b = tape.constant(Tensor::zeros(1, 2));
        let y = tape.pointwise(x, w, b).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(3, 2));
        let err = tape.add(a, b).unwrap_err();
        assert!(err.to_string().contains("[2, 3]") && err.to_string().contains("[3, 2]"), "{err}");
        assert!(tape.matmul(a, a).is_err());
    }

    #[test]
    fn sum_gives_unit_gradient() {
        let (params, id) = params_with("w", Tensor::row(vec![1.0, -2.0, 3.0]));
        let mut tape = Tape::new();
        let w = tape.param(&params, id);
        let loss = tape.sum(w);
        let mut g = params.zero_grads();
        tape.backward(loss, &mut g).unwrap();
        assert_eq!(g.get(id), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn sum_of_squares_gradient_and_accumulation() {
        let (params, id) = params_with("w", Tensor::row(vec![1.0, 2.0, 3.0]));
        let mut tape = Tape::new();
        let w = tape.param(&params, id);
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum(sq);
        let mut g = params.zero_grads();
        tape.backward(loss, &mut g).unwrap();
        assert_eq!(g.get(id), &[2.0, 4.0, 6.0]);
        tape.backward(loss, &mut g).unwrap();
        assert_eq!(g.get(id), &[4.0, 8.0, 12.0]);
    }

    #[test]
    fn fan_out_sums_both_paths() {
        // loss = sum(tanh(w) + 3w) ; d/dw = (1 - tanh²w) + 3
        let (params, id) = params_with("w", Tensor::row(vec![0.5, -1.0]));
        let mut tape = Tape::new();
        let w = tape.param(&params, id);
        let t = tape.tanh(w);
        let s = tape.scale(w, 3.0);
        let y = tape.add(t, s).unwrap();
        let loss = tape.sum(y);
        let mut g = params.zero_grads();
        tape.backward(loss, &mut g).unwrap();
        for (gv, w) in g.get(id).iter().zip([0.5_f64, -1.0]) {
            let expected = 1.0 - w.tanh().powi(2) + 3.0;
            assert!((gv - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn constants_get_no_gradient() {
        let (params, id) = params_with("w", Tensor::scalar(2.0));
        let mut tape = Tape::new();
        let w = tape.param(&params, id);
        let c = tape.constant(Tensor::scalar(5.0));
        let y = tape.mul(w, c).unwrap();
        let mut g = params.zero_grads();
        tape.backward(y, &mut g).unwrap();
        assert_eq!(g.get(id), &[5.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let (params, id) = params_with("w", Tensor::row(vec![1.0, 2.0]));
        let mut tape = Tape::new();
        let w = tape.param(&params, id);
        let mut g = params.zero_grads();
        assert!(tape.backward(w, &mut g).is_err());
    }

    #[test]
    fn zero_rate_dropout_is_identity() {
        let mut tape = Tape::new();
        let mut rng = crate::rng::seeded(1);
        let x = tape.constant(Tensor::row(vec![1.0, 2.0]));
        assert_eq!(tape.dropout(x, 0.0, &mut rng).unwrap(), x);
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let mut tape = Tape::new();
        let mut rng = crate::rng::seeded(2);
        let x = tape.constant(Tensor::row(vec![1.5; 100_000]));
        let y = tape.dropout(x, 0.1, &mut rng).unwrap();
        let mean = tape.value(y).data().iter().sum::<f64>() / 100_000.0;
        assert!((mean - 1.5).abs() / 1.5 < 0.01, "mean {mean}");
        let zeros = tape.value(y).data().iter().filter(|&&v| v == 0.0).count();
        assert!((zeros as f64 / 100_000.0 - 0.1).abs() < 0.01);
    }
}
