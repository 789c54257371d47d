//! Define-by-run computation graph with reverse-mode gradients.
//!
//! Nodes are appended in evaluation order, so every node's inputs have smaller
//! indices than the node itself and reverse index order is a valid reverse
//! topological order. A graph is built per forward pass and discarded after
//! [`Graph::backward`].

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub enum Op {
    Input,
    Param(ParamId),
    ParamRow { param: ParamId, row: usize, shape: [usize; 2] },
    MatVec { w: NodeId, x: NodeId },
    Affine { w: NodeId, x: NodeId, b: NodeId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    ScaleBy { vector: NodeId, scalar: NodeId },
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    OneMinus(NodeId),
    Concat(Vec<NodeId>),
    Sum(Vec<NodeId>),
    Mean(Vec<NodeId>),
    WeightedSum { weights: NodeId, vectors: Vec<NodeId> },
    Stack(Vec<NodeId>),
    Dot(NodeId, NodeId),
    SumElements(NodeId),
    MaskedSoftmax { scores: NodeId, mask: Vec<bool> },
    SoftmaxCrossEntropy { logits: NodeId, label: usize },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    param_cache: HashMap<ParamId, NodeId>,
    row_cache: HashMap<(ParamId, usize), NodeId>,
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect())
        .expect("shape preserved")
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Softmax over the entries where `mask` is true; masked entries are exactly zero.
pub fn masked_softmax_values(scores: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if scores.len() != mask.len() {
        return Err(Error::LengthMismatch {
            what: "scores vs mask",
            left: scores.len(),
            right: mask.len(),
        });
    }
    let max = scores
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyAttention);
    }
    let mut out: Vec<f64> = scores
        .iter()
        .zip(mask)
        .map(|(&s, &m)| if m { (s - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

/// `-ln softmax(logits)[label]`, computed without overflow or cancellation.
pub fn cross_entropy_value(logits: &[f64], label: usize) -> f64 {
    let (arg, max) = logits
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &v)| (v - max).exp())
        .sum();
    (max - logits[label]) + rest.ln_1p()
}

pub fn softmax_values(logits: &[f64]) -> Vec<f64> {
    let mask = vec![true; logits.len()];
    masked_softmax_values(logits, &mask).expect("non-empty logits")
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    /// Gradient of the last backward pass w.r.t. node `id`, if it was reached.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.input(Tensor::zeros(&[len]))
    }

    /// Leaf holding a parameter's current value; created once per graph.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_cache.get(&id) {
            return n;
        }
        let n = self.push(Op::Param(id), store.value(id).clone());
        self.param_cache.insert(id, n);
        n
    }

    /// Leaf holding one row of a matrix parameter (embedding lookup).
    pub fn param_row(&mut self, store: &ParamStore, id: ParamId, row: usize) -> Result<NodeId> {
        if let Some(&n) = self.row_cache.get(&(id, row)) {
            return Ok(n);
        }
        let m = store.value(id);
        if m.shape().len() != 2 || row >= m.rows() {
            return Err(Error::shape("param_row", m.shape(), &[row]));
        }
        let shape = [m.rows(), m.cols()];
        let n = self.push(
            Op::ParamRow { param: id, row, shape },
            Tensor::vector(m.row(row).to_vec()),
        );
        self.row_cache.insert((id, row), n);
        Ok(n)
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (wv, xv) = (self.value(w), self.value(x));
        if wv.shape().len() != 2 || !xv.is_vector() || wv.cols() != xv.len() {
            return Err(Error::shape("matvec", wv.shape(), xv.shape()));
        }
        let out = matvec_values(wv, xv.data());
        Ok(self.push(Op::MatVec { w, x }, Tensor::vector(out)))
    }

    /// `W x + b`.
    pub fn affine(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (wv, xv, bv) = (self.value(w), self.value(x), self.value(b));
        if wv.shape().len() != 2 || !xv.is_vector() || wv.cols() != xv.len() {
            return Err(Error::shape("affine", wv.shape(), xv.shape()));
        }
        if !bv.is_vector() || bv.len() != wv.rows() {
            return Err(Error::shape("affine", wv.shape(), bv.shape()));
        }
        let mut out = matvec_values(wv, xv.data());
        for (o, bb) in out.iter_mut().zip(bv.data()) {
            *o += bb;
        }
        Ok(self.push(Op::Affine { w, x, b }, Tensor::vector(out)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("add", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("sub", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), out))
    }

    /// Elementwise product.
    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("hadamard", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let out = map(self.value(a), |x| x * factor);
        self.push(Op::Scale(a, factor), out)
    }

    /// Vector times a scalar node.
    pub fn scale_by(&mut self, vector: NodeId, scalar: NodeId) -> Result<NodeId> {
        let s = self.value(scalar);
        if !s.is_scalar() {
            return Err(Error::shape("scale_by", self.value(vector).shape(), s.shape()));
        }
        let s = s.item();
        let out = map(self.value(vector), |x| x * s);
        Ok(self.push(Op::ScaleBy { vector, scalar }, out))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = map(self.value(a), f64::tanh);
        self.push(Op::Tanh(a), out)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = map(self.value(a), sigmoid);
        self.push(Op::Sigmoid(a), out)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let out = map(self.value(a), |x| x.max(0.0));
        self.push(Op::Relu(a), out)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let out = map(self.value(a), |x| 1.0 - x);
        self.push(Op::OneMinus(a), out)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut out = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if !v.is_vector() {
                return Err(Error::shape("concat", v.shape(), &[]));
            }
            out.extend_from_slice(v.data());
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(out)))
    }

    fn sum_values(&self, op: &'static str, parts: &[NodeId]) -> Result<Tensor> {
        let first = parts.first().ok_or(Error::EmptySequence)?;
        let mut acc = self.value(*first).clone();
        for &p in &parts[1..] {
            check_same(op, &acc, self.value(p))?;
            acc.add_assign(self.value(p));
        }
        Ok(acc)
    }

    pub fn sum_vectors(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let out = self.sum_values("sum_vectors", parts)?;
        Ok(self.push(Op::Sum(parts.to_vec()), out))
    }

    /// Elementwise arithmetic mean: the sum divided by the count.
    pub fn mean_vectors(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut out = self.sum_values("mean_vectors", parts)?;
        let k = parts.len() as f64;
        for v in out.data_mut() {
            *v /= k;
        }
        Ok(self.push(Op::Mean(parts.to_vec()), out))
    }

    /// `sum_i weights[i] * vectors[i]`.
    pub fn weighted_sum(&mut self, weights: NodeId, vectors: &[NodeId]) -> Result<NodeId> {
        let w = self.value(weights);
        if !w.is_vector() || w.len() != vectors.len() {
            return Err(Error::shape("weighted_sum", w.shape(), &[vectors.len()]));
        }
        let first = vectors.first().ok_or(Error::EmptySequence)?;
        let d = self.value(*first).shape().to_vec();
        let mut out = vec![0.0; self.value(*first).len()];
        for (&wi, &v) in w.data().iter().zip(vectors) {
            let vv = self.value(v);
            if vv.shape() != d.as_slice() {
                return Err(Error::shape("weighted_sum", &d, vv.shape()));
            }
            for (o, x) in out.iter_mut().zip(vv.data()) {
                *o += wi * x;
            }
        }
        let out = Tensor::new(d, out)?;
        Ok(self.push(
            Op::WeightedSum {
                weights,
                vectors: vectors.to_vec(),
            },
            out,
        ))
    }

    /// Collects scalar nodes into a vector.
    pub fn stack(&mut self, scalars: &[NodeId]) -> Result<NodeId> {
        if scalars.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut out = Vec::with_capacity(scalars.len());
        for &s in scalars {
            let v = self.value(s);
            if !v.is_scalar() {
                return Err(Error::shape("stack", v.shape(), &[1]));
            }
            out.push(v.item());
        }
        Ok(self.push(Op::Stack(scalars.to_vec()), Tensor::vector(out)))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("dot", self.value(a), self.value(b))?;
        let s: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Op::Dot(a, b), Tensor::scalar(s)))
    }

    pub fn sum_elements(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().sum();
        self.push(Op::SumElements(a), Tensor::scalar(s))
    }

    pub fn masked_softmax(&mut self, scores: NodeId, mask: &[bool]) -> Result<NodeId> {
        let out = masked_softmax_values(self.value(scores).data(), mask)?;
        Ok(self.push(
            Op::MaskedSoftmax {
                scores,
                mask: mask.to_vec(),
            },
            Tensor::vector(out),
        ))
    }

    pub fn softmax_cross_entropy(&mut self, logits: NodeId, label: usize) -> Result<NodeId> {
        let l = self.value(logits);
        if label >= l.len() {
            return Err(Error::LabelOutOfRange {
                label,
                classes: l.len(),
            });
        }
        let loss = cross_entropy_value(l.data(), label);
        Ok(self.push(
            Op::SoftmaxCrossEntropy { logits, label },
            Tensor::scalar(loss),
        ))
    }

    /// Reverse accumulation from the scalar `loss`.
    ///
    /// Returns gradients for every parameter leaf reached; parameters off the
    /// path read as zero through [`Gradients::get`]. Node gradients stay
    /// available through [`Graph::grad`] until the next call.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(lv.shape().to_vec(), vec![1.0])?);
        let mut out = Gradients::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let nodes = &self.nodes;
            let gd = g.data();
            match &node.op {
                Op::Input => {}
                Op::Param(id) => out.accumulate_dense(*id, &g),
                Op::ParamRow { param, row, shape } => {
                    out.accumulate_row(*param, shape, *row, gd);
                }
                Op::MatVec { w, x } => {
                    matvec_backward(nodes, &mut grads, *w, *x, gd);
                }
                Op::Affine { w, x, b } => {
                    matvec_backward(nodes, &mut grads, *w, *x, gd);
                    axpy(slot(nodes, &mut grads, *b), 1.0, gd);
                }
                Op::Add(a, b) => {
                    axpy(slot(nodes, &mut grads, *a), 1.0, gd);
                    axpy(slot(nodes, &mut grads, *b), 1.0, gd);
                }
                Op::Sub(a, b) => {
                    axpy(slot(nodes, &mut grads, *a), 1.0, gd);
                    axpy(slot(nodes, &mut grads, *b), -1.0, gd);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                    let ga = slot(nodes, &mut grads, *a);
                    for ((s, gi), bi) in ga.iter_mut().zip(gd).zip(bv) {
                        *s += gi * bi;
                    }
                    let gb = slot(nodes, &mut grads, *b);
                    for ((s, gi), ai) in gb.iter_mut().zip(gd).zip(av) {
                        *s += gi * ai;
                    }
                }
                Op::Scale(a, f) => axpy(slot(nodes, &mut grads, *a), *f, gd),
                Op::ScaleBy { vector, scalar } => {
                    let s = nodes[scalar.0].value.item();
                    let vv = nodes[vector.0].value.data();
                    let ds: f64 = gd.iter().zip(vv).map(|(x, y)| x * y).sum();
                    axpy(slot(nodes, &mut grads, *vector), s, gd);
                    slot(nodes, &mut grads, *scalar)[0] += ds;
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    let ga = slot(nodes, &mut grads, *a);
                    for ((s, gi), yi) in ga.iter_mut().zip(gd).zip(y) {
                        *s += gi * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    let ga = slot(nodes, &mut grads, *a);
                    for ((s, gi), yi) in ga.iter_mut().zip(gd).zip(y) {
                        *s += gi * yi * (1.0 - yi);
                    }
                }
                Op::Relu(a) => {
                    let x = nodes[a.0].value.data();
                    let ga = slot(nodes, &mut grads, *a);
                    for ((s, gi), xi) in ga.iter_mut().zip(gd).zip(x) {
                        if *xi > 0.0 {
                            *s += gi;
                        }
                    }
                }
                Op::OneMinus(a) => axpy(slot(nodes, &mut grads, *a), -1.0, gd),
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = nodes[p.0].value.len();
                        axpy(slot(nodes, &mut grads, *p), 1.0, &gd[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Sum(parts) => {
                    for p in parts {
                        axpy(slot(nodes, &mut grads, *p), 1.0, gd);
                    }
                }
                Op::Mean(parts) => {
                    let k = parts.len() as f64;
                    for p in parts {
                        let gp = slot(nodes, &mut grads, *p);
                        for (s, gi) in gp.iter_mut().zip(gd) {
                            *s += gi / k;
                        }
                    }
                }
                Op::WeightedSum { weights, vectors } => {
                    let w = nodes[weights.0].value.data().to_vec();
                    for (k, v) in vectors.iter().enumerate() {
                        let vv = nodes[v.0].value.data();
                        let dw: f64 = gd.iter().zip(vv).map(|(x, y)| x * y).sum();
                        slot(nodes, &mut grads, *weights)[k] += dw;
                        axpy(slot(nodes, &mut grads, *v), w[k], gd);
                    }
                }
                Op::Stack(parts) => {
                    for (k, p) in parts.iter().enumerate() {
                        slot(nodes, &mut grads, *p)[0] += gd[k];
                    }
                }
                Op::Dot(a, b) => {
                    let s = gd[0];
                    let (av, bv) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                    axpy(slot(nodes, &mut grads, *a), s, bv);
                    axpy(slot(nodes, &mut grads, *b), s, av);
                }
                Op::SumElements(a) => {
                    let s = gd[0];
                    for v in slot(nodes, &mut grads, *a) {
                        *v += s;
                    }
                }
                Op::MaskedSoftmax { scores, mask } => {
                    let y = node.value.data();
                    let inner: f64 = gd.iter().zip(y).map(|(a, b)| a * b).sum();
                    let gs = slot(nodes, &mut grads, *scores);
                    for k in 0..y.len() {
                        if mask[k] {
                            gs[k] += y[k] * (gd[k] - inner);
                        }
                    }
                }
                Op::SoftmaxCrossEntropy { logits, label } => {
                    let s = gd[0];
                    let p = softmax_values(nodes[logits.0].value.data());
                    let gl = slot(nodes, &mut grads, *logits);
                    for (k, pk) in p.iter().enumerate() {
                        let t = if k == *label { 1.0 } else { 0.0 };
                        gl[k] += s * (pk - t);
                    }
                }
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(out)
    }
}

fn matvec_values(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let cols = w.cols();
    w.data()
        .chunks_exact(cols)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Tensor>], id: NodeId) -> &'a mut [f64] {
    grads[id.0]
        .get_or_insert_with(|| Tensor::zeros_like(&nodes[id.0].value))
        .data_mut()
}

fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

fn matvec_backward(nodes: &[Node], grads: &mut [Option<Tensor>], w: NodeId, x: NodeId, g: &[f64]) {
    let wv = &nodes[w.0].value;
    let xv = nodes[x.0].value.data();
    let cols = wv.cols();
    {
        let gw = slot(nodes, grads, w);
        for (r, gr) in g.iter().enumerate() {
            if *gr != 0.0 {
                axpy(&mut gw[r * cols..(r + 1) * cols], *gr, xv);
            }
        }
    }
    let gx = slot(nodes, grads, x);
    for (r, gr) in g.iter().enumerate() {
        axpy(gx, *gr, wv.row(r));
    }
}
