//! Reverse-mode differentiation over a linear tape.
//!
//! Every op evaluates eagerly, checks its output for NaN/Inf, and records
//! enough to run its vector-Jacobian product later. Values that do not depend
//! on a trainable parameter carry no gradient.

use std::collections::BTreeMap;

use crate::tensor::gemm;
use crate::{NnError, ParameterStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(String),
    MatMul(Var, Var),
    /// `A · Bᵀ`
    MatMulNt(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Mean(Var),
    L2NormalizeRows(Var),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    ScaleRows(Var, Vec<f64>),
    LogSoftmaxRows(Var),
    Diag(Var),
    BceWithLogits { logits: Var, targets: Vec<f64>, mask: Vec<bool>, count: usize },
    MaskedMse { pred: Var, targets: Vec<f64>, mask: Vec<bool>, count: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> NnError {
    NnError::ShapeMismatch { op, left: a.shape().to_vec(), right: b.shape().to_vec() }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
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

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, requires_grad: bool) -> Result<Var, NnError> {
        if !value.is_finite() {
            return Err(NnError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var, NnError> {
        self.push("constant", value, Op::Leaf, false)
    }

    /// Leaf bound to a stored parameter. Frozen entries behave as constants.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var, NnError> {
        let entry = store.entry(name)?;
        self.push("param", entry.value.clone(), Op::Param(name.to_string()), entry.trainable)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta, tb));
        }
        let (m, n, data) = gemm(ta, false, tb, false);
        let rg = self.rg(a) || self.rg(b);
        self.push("matmul", Tensor::matrix(m, n, data)?, Op::MatMul(a, b), rg)
    }

    /// `a · bᵀ`, the natural form for row-batched inputs against
    /// `out × in` weight matrices.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() {
            return Err(shape_err("matmul_nt", ta, tb));
        }
        let (m, n, data) = gemm(ta, false, tb, true);
        let rg = self.rg(a) || self.rg(b);
        self.push("matmul_nt", Tensor::matrix(m, n, data)?, Op::MatMulNt(a, b), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NnError> {
        let t = self.value(a).transpose();
        let rg = self.rg(a);
        self.push("transpose", t, Op::Transpose(a), rg)
    }

    fn zip(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(name, t, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// Broadcast a length-`cols` bias over every row.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.len() != ta.cols() {
            return Err(shape_err("add_row", ta, tb));
        }
        let c = ta.cols();
        let data = ta.data().iter().enumerate().map(|(i, &x)| x + tb.data()[i % c]).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(bias);
        self.push("add_row", t, Op::AddRow(a, bias), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, NnError> {
        let t = self.value(a).map(|x| x * s);
        let rg = self.rg(a);
        self.push("scale", t, Op::Scale(a, s), rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NnError> {
        let t = self.value(a).map(relu);
        let rg = self.rg(a);
        self.push("relu", t, Op::Relu(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, NnError> {
        let t = self.value(a).map(f64::exp);
        let rg = self.rg(a);
        self.push("exp", t, Op::Exp(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Result<Var, NnError> {
        let t = self.value(a).map(f64::ln);
        let rg = self.rg(a);
        self.push("log", t, Op::Log(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NnError> {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push("sum", Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, NnError> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(NnError::Empty { op: "mean" });
        }
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.rg(a);
        self.push("mean", Tensor::scalar(m), Op::Mean(a), rg)
    }

    /// Scale every row to unit Euclidean norm; all-zero rows stay zero.
    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var, NnError> {
        let ta = self.value(a);
        let c = ta.cols();
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(c.max(1)) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(a);
        self.push("l2_normalize_rows", t, Op::L2NormalizeRows(a), rg)
    }

    /// Row `i` of the output is row `index[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var, NnError> {
        let ta = self.value(a);
        let (r, c) = (ta.rows(), ta.cols());
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index {
            if i >= r {
                return Err(NnError::IndexOutOfRange { op: "gather_rows", index: i, len: r });
            }
            data.extend_from_slice(ta.row(i));
        }
        let t = Tensor::matrix(index.len(), c, data)?;
        let rg = self.rg(a);
        self.push("gather_rows", t, Op::GatherRows(a, index.to_vec()), rg)
    }

    /// Output row `index[i]` accumulates row `i` of `a`; `rows` output rows.
    pub fn scatter_add_rows(&mut self, a: Var, index: &[usize], rows: usize) -> Result<Var, NnError> {
        let ta = self.value(a);
        if index.len() != ta.rows() {
            return Err(NnError::ShapeMismatch {
                op: "scatter_add_rows",
                left: ta.shape().to_vec(),
                right: vec![index.len()],
            });
        }
        let c = ta.cols();
        let mut data = vec![0.0; rows * c];
        for (i, &target) in index.iter().enumerate() {
            if target >= rows {
                return Err(NnError::IndexOutOfRange { op: "scatter_add_rows", index: target, len: rows });
            }
            for (o, x) in data[target * c..(target + 1) * c].iter_mut().zip(ta.row(i)) {
                *o += x;
            }
        }
        let t = Tensor::matrix(rows, c, data)?;
        let rg = self.rg(a);
        self.push("scatter_add_rows", t, Op::ScatterAddRows(a, index.to_vec()), rg)
    }

    /// Multiply row `i` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Var, factors: &[f64]) -> Result<Var, NnError> {
        let ta = self.value(a);
        if factors.len() != ta.rows() {
            return Err(NnError::ShapeMismatch {
                op: "scale_rows",
                left: ta.shape().to_vec(),
                right: vec![factors.len()],
            });
        }
        let c = ta.cols();
        let data = ta.data().iter().enumerate().map(|(i, &x)| x * factors[i / c.max(1)]).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(a);
        self.push("scale_rows", t, Op::ScaleRows(a, factors.to_vec()), rg)
    }

    /// Row-wise log-softmax, stabilized by subtracting each row's maximum.
    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var, NnError> {
        let ta = self.value(a);
        let c = ta.cols();
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(c.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|x| *x -= lse);
        }
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(a);
        self.push("log_softmax_rows", t, Op::LogSoftmaxRows(a), rg)
    }

    /// Diagonal of a square matrix as an `n × 1` column.
    pub fn diag(&mut self, a: Var) -> Result<Var, NnError> {
        let ta = self.value(a);
        if ta.rows() != ta.cols() {
            return Err(NnError::ShapeMismatch { op: "diag", left: ta.shape().to_vec(), right: vec![] });
        }
        let n = ta.rows();
        let t = Tensor::matrix(n, 1, (0..n).map(|i| ta.get(i, i)).collect())?;
        let rg = self.rg(a);
        self.push("diag", t, Op::Diag(a), rg)
    }

    /// Mean binary cross-entropy on logits over unmasked entries. With no
    /// unmasked entries the loss is zero.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64], mask: &[bool]) -> Result<Var, NnError> {
        let tl = self.value(logits);
        if targets.len() != tl.len() || mask.len() != tl.len() {
            return Err(NnError::ShapeMismatch {
                op: "bce_with_logits",
                left: tl.shape().to_vec(),
                right: vec![targets.len(), mask.len()],
            });
        }
        let count = mask.iter().filter(|&&m| m).count();
        let total: f64 = tl
            .data()
            .iter()
            .zip(targets)
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|((&z, &y), _)| softplus(z) - y * z)
            .sum();
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        let rg = self.rg(logits);
        let op = Op::BceWithLogits { logits, targets: targets.to_vec(), mask: mask.to_vec(), count };
        self.push("bce_with_logits", Tensor::scalar(loss), op, rg)
    }

    /// Mean squared error over unmasked entries.
    pub fn masked_mse(&mut self, pred: Var, targets: &[f64], mask: &[bool]) -> Result<Var, NnError> {
        let tp = self.value(pred);
        if targets.len() != tp.len() || mask.len() != tp.len() {
            return Err(NnError::ShapeMismatch {
                op: "masked_mse",
                left: tp.shape().to_vec(),
                right: vec![targets.len(), mask.len()],
            });
        }
        let count = mask.iter().filter(|&&m| m).count();
        let total: f64 = tp
            .data()
            .iter()
            .zip(targets)
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|((&p, &y), _)| (p - y) * (p - y))
            .sum();
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        let rg = self.rg(pred);
        let op = Op::MaskedMse { pred, targets: targets.to_vec(), mask: mask.to_vec(), count };
        self.push("masked_mse", Tensor::scalar(loss), op, rg)
    }

    /// Backpropagate from a one-element output. Returns the gradient of every
    /// trainable parameter leaf that the output depends on, summed by name.
    pub fn backward(&self, output: Var) -> Result<BTreeMap<String, Tensor>, NnError> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(NnError::ShapeMismatch { op: "backward", left: out.shape().to_vec(), right: vec![] });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::full(out.shape(), 1.0));
        let mut params = BTreeMap::new();

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let mut send = |v: Var, t: Tensor| {
                if !self.rg(v) {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&t),
                    slot @ None => *slot = Some(t),
                }
            };
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(name) => match params.get_mut(name) {
                    Some(acc) => Tensor::add_assign(acc, &g),
                    None => {
                        params.insert(name.clone(), g);
                    }
                },
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    if self.rg(*a) {
                        let (m, n, d) = gemm(&g, false, tb, true);
                        send(*a, Tensor::matrix(m, n, d)?);
                    }
                    if self.rg(*b) {
                        let (m, n, d) = gemm(ta, true, &g, false);
                        send(*b, Tensor::matrix(m, n, d)?);
                    }
                }
                Op::MatMulNt(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    if self.rg(*a) {
                        let (m, n, d) = gemm(&g, false, tb, false);
                        send(*a, Tensor::matrix(m, n, d)?);
                    }
                    if self.rg(*b) {
                        let (m, n, d) = gemm(&g, true, ta, false);
                        send(*b, Tensor::matrix(m, n, d)?);
                    }
                }
                Op::Transpose(a) => {
                    let t = g.transpose();
                    send(*a, Tensor::new(self.value(*a).shape().to_vec(), t.into_data())?);
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*b, g.map(|x| -x));
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    send(*a, elementwise(&g, tb, |g, y| g * y));
                    send(*b, elementwise(&g, ta, |g, x| g * x));
                }
                Op::Div(a, b) => {
                    let tb = self.value(*b);
                    send(*a, elementwise(&g, tb, |g, d| g / d));
                    let num = elementwise(&g, y, |g, q| g * q);
                    send(*b, elementwise(&num, tb, |n, d| -n / d));
                }
                Op::AddRow(a, bias) => {
                    let c = g.cols();
                    let mut gb = vec![0.0; c];
                    for (i, x) in g.data().iter().enumerate() {
                        gb[i % c] += x;
                    }
                    send(*bias, Tensor::new(self.value(*bias).shape().to_vec(), gb)?);
                    send(*a, g);
                }
                Op::Scale(a, s) => send(*a, g.map(|x| x * s)),
                Op::Relu(a) => {
                    // Subgradient 0 at exactly 0.
                    send(*a, elementwise(&g, self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 }));
                }
                Op::Exp(a) => send(*a, elementwise(&g, y, |g, e| g * e)),
                Op::Log(a) => send(*a, elementwise(&g, self.value(*a), |g, x| g / x)),
                Op::Sum(a) => {
                    let s = g.item();
                    send(*a, Tensor::full(self.value(*a).shape(), s));
                }
                Op::Mean(a) => {
                    let ta = self.value(*a);
                    send(*a, Tensor::full(ta.shape(), g.item() / ta.len() as f64));
                }
                Op::L2NormalizeRows(a) => {
                    let ta = self.value(*a);
                    let c = ta.cols().max(1);
                    let mut out = vec![0.0; ta.len()];
                    for r in 0..ta.rows() {
                        let x = &ta.data()[r * c..(r + 1) * c];
                        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm == 0.0 {
                            continue;
                        }
                        let yr = &y.data()[r * c..(r + 1) * c];
                        let gr = &g.data()[r * c..(r + 1) * c];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            out[r * c + j] = (gr[j] - yr[j] * dot) / norm;
                        }
                    }
                    send(*a, Tensor::new(ta.shape().to_vec(), out)?);
                }
                Op::GatherRows(a, index) => {
                    let ta = self.value(*a);
                    let c = ta.cols();
                    let mut out = vec![0.0; ta.len()];
                    for (i, &src) in index.iter().enumerate() {
                        for (o, x) in out[src * c..(src + 1) * c].iter_mut().zip(g.row(i)) {
                            *o += x;
                        }
                    }
                    send(*a, Tensor::new(ta.shape().to_vec(), out)?);
                }
                Op::ScatterAddRows(a, index) => {
                    let ta = self.value(*a);
                    let c = ta.cols();
                    let mut out = Vec::with_capacity(ta.len());
                    for &target in index {
                        out.extend_from_slice(&g.data()[target * c..(target + 1) * c]);
                    }
                    send(*a, Tensor::new(ta.shape().to_vec(), out)?);
                }
                Op::ScaleRows(a, factors) => {
                    let c = g.cols().max(1);
                    let data = g.data().iter().enumerate().map(|(i, &x)| x * factors[i / c]).collect();
                    send(*a, Tensor::new(g.shape().to_vec(), data)?);
                }
                Op::LogSoftmaxRows(a) => {
                    let c = g.cols().max(1);
                    let mut out = g.data().to_vec();
                    for (orow, yrow) in out.chunks_mut(c).zip(y.data().chunks(c)) {
                        let total: f64 = orow.iter().sum();
                        for (o, &l) in orow.iter_mut().zip(yrow) {
                            *o -= l.exp() * total;
                        }
                    }
                    send(*a, Tensor::new(g.shape().to_vec(), out)?);
                }
                Op::Diag(a) => {
                    let ta = self.value(*a);
                    let n = ta.rows();
                    let mut out = Tensor::zeros(ta.shape());
                    for i in 0..n {
                        out.data_mut()[i * n + i] = g.data()[i];
                    }
                    send(*a, out);
                }
                Op::BceWithLogits { logits, targets, mask, count } => {
                    let tl = self.value(*logits);
                    let scale = if *count == 0 { 0.0 } else { g.item() / *count as f64 };
                    let data = tl
                        .data()
                        .iter()
                        .zip(targets)
                        .zip(mask)
                        .map(|((&z, &t), &m)| if m { (sigmoid(z) - t) * scale } else { 0.0 })
                        .collect();
                    send(*logits, Tensor::new(tl.shape().to_vec(), data)?);
                }
                Op::MaskedMse { pred, targets, mask, count } => {
                    let tp = self.value(*pred);
                    let scale = if *count == 0 { 0.0 } else { 2.0 * g.item() / *count as f64 };
                    let data = tp
                        .data()
                        .iter()
                        .zip(targets)
                        .zip(mask)
                        .map(|((&p, &t), &m)| if m { (p - t) * scale } else { 0.0 })
                        .collect();
                    send(*pred, Tensor::new(tp.shape().to_vec(), data)?);
                }
            }
        }
        if params.values().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite { op: "backward" });
        }
        Ok(params)
    }
}

fn elementwise(g: &Tensor, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g.data().iter().zip(other.data()).map(|(&a, &b)| f(a, b)).collect();
    Tensor::new(other.shape().to_vec(), data).expect("shapes agree by construction")
}

/// Build a loss on a fresh tape, backpropagate, and add the gradients into
/// the store. Returns the loss value.
pub fn forward_backward<F>(store: &mut ParameterStore, f: F) -> Result<f64, NnError>
where
    F: FnOnce(&mut Tape, &ParameterStore) -> Result<Var, NnError>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let value = tape.value(loss).item();
    let grads = tape.backward(loss)?;
    store.accumulate(&grads)?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(name: &str, t: Tensor, trainable: bool) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert(name, t, trainable).unwrap();
        s
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        // loss = sum(W·x): dL/dW[i][j] = x[j]
        let mut store = store_with("w", Tensor::matrix(2, 3, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap(), true);
        forward_backward(&mut store, |t, s| {
            let w = t.param(s, "w")?;
            let x = t.constant(Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0])?)?;
            let y = t.matmul(w, x)?;
            t.sum(y)
        })
        .unwrap();
        assert_eq!(store.grad("w").unwrap().data(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn frozen_parameter_gets_nothing() {
        let mut store = store_with("w", Tensor::vector(vec![1.0, 2.0]), false);
        store.insert("v", Tensor::vector(vec![3.0, 4.0]), true).unwrap();
        forward_backward(&mut store, |t, s| {
            let w = t.param(s, "w")?;
            let v = t.param(s, "v")?;
            let p = t.mul(w, v)?;
            t.sum(p)
        })
        .unwrap();
        assert_eq!(store.grad("w").unwrap().data(), &[0.0, 0.0]);
        assert_eq!(store.grad("v").unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn relu_at_zero_has_zero_subgradient() {
        let mut store = store_with("x", Tensor::vector(vec![0.0, 1.0, -1.0]), true);
        forward_backward(&mut store, |t, s| {
            let x = t.param(s, "x")?;
            let r = t.relu(x)?;
            t.sum(r)
        })
        .unwrap();
        assert_eq!(store.grad("x").unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn non_finite_values_trip() {
        let store = store_with("x", Tensor::vector(vec![-1.0]), true);
        let mut t = Tape::new();
        let x = t.param(&store, "x").unwrap();
        assert!(matches!(t.log(x), Err(NnError::NonFinite { op: "log" })));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = t.constant(Tensor::zeros(&[2, 3])).unwrap();
        assert!(matches!(t.matmul(a, b), Err(NnError::ShapeMismatch { op: "matmul", .. })));
        assert!(t.gather_rows(a, &[2]).is_err());
    }

    #[test]
    fn reused_parameter_accumulates() {
        let mut store = store_with("x", Tensor::scalar(3.0), true);
        forward_backward(&mut store, |t, s| {
            let a = t.param(s, "x")?;
            let b = t.param(s, "x")?;
            t.mul(a, b)
        })
        .unwrap();
        assert_eq!(store.grad("x").unwrap().item(), 6.0);
    }
}
