//! Additive tanh-scored attention and the weight-averaging fusion rule.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{masked_softmax_values, Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Scorer `v . tanh(W_h s + W_q q + b)` for one level and one query type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionParams {
    pub v: ParamId,
    pub w_state: ParamId,
    pub w_query: ParamId,
    pub b: ParamId,
}

impl AttentionParams {
    /// Weights uniform in `±1/sqrt(fan_in)`, zero bias.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        state_dim: usize,
        query_dim: usize,
        att_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let r = |n: usize| 1.0 / (n as f64).sqrt();
        let v = store.add_uniform(format!("{prefix}.v"), &[att_dim], -r(att_dim), r(att_dim), rng)?;
        let w_state = store.add_uniform(
            format!("{prefix}.w_state"),
            &[att_dim, state_dim],
            -r(state_dim),
            r(state_dim),
            rng,
        )?;
        let w_query = store.add_uniform(
            format!("{prefix}.w_query"),
            &[att_dim, query_dim],
            -r(query_dim),
            r(query_dim),
            rng,
        )?;
        let b = store.add_zeros(format!("{prefix}.b"), &[att_dim])?;
        Ok(AttentionParams { v, w_state, w_query, b })
    }

    /// `W_q q + b`, shared by every position of one attention call.
    pub fn project_query(&self, g: &mut Graph, store: &ParamStore, query: NodeId) -> Result<NodeId> {
        let (w, b) = (g.param(store, self.w_query), g.param(store, self.b));
        g.affine(w, query, b)
    }

    /// Score of one state given an already projected query.
    pub fn score_projected(&self, g: &mut Graph, store: &ParamStore, state: NodeId, query_proj: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.w_state);
        let hs = g.matvec(w, state)?;
        let pre = g.add(hs, query_proj)?;
        let act = g.tanh(pre);
        let v = g.param(store, self.v);
        g.dot(v, act)
    }

    pub fn score(&self, g: &mut Graph, store: &ParamStore, state: NodeId, query: NodeId) -> Result<NodeId> {
        let q = self.project_query(g, store, query)?;
        self.score_projected(g, store, state, q)
    }

    /// Masked softmax of the scores over `states`; masked positions score a
    /// constant and receive weight exactly zero.
    pub fn attend(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        states: &[NodeId],
        mask: &[bool],
        query: NodeId,
    ) -> Result<NodeId> {
        check_mask(states.len(), mask)?;
        let q = self.project_query(g, store, query)?;
        let mut scores = Vec::with_capacity(states.len());
        let mut pad = None;
        for (&s, &m) in states.iter().zip(mask) {
            if m {
                scores.push(self.score_projected(g, store, s, q)?);
            } else {
                scores.push(*pad.get_or_insert_with(|| g.input(Tensor::scalar(0.0))));
            }
        }
        let scores = g.stack(&scores)?;
        g.masked_softmax(scores, mask)
    }
}

fn check_mask(len: usize, mask: &[bool]) -> Result<()> {
    if len == 0 {
        return Err(Error::EmptySequence);
    }
    if len != mask.len() {
        return Err(Error::LengthMismatch {
            what: "states vs mask",
            left: len,
            right: mask.len(),
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyAttention);
    }
    Ok(())
}

/// Weights and the context they select.
#[derive(Clone, Copy, Debug)]
pub struct Attended {
    pub weights: NodeId,
    pub context: NodeId,
}

/// Weighted sum of `states` under `weights`.
pub fn context(g: &mut Graph, weights: NodeId, states: &[NodeId]) -> Result<Attended> {
    let context = g.weighted_sum(weights, states)?;
    Ok(Attended { weights, context })
}

/// Elementwise mean of attention weight vectors. A single vector is returned as is.
pub fn fuse(g: &mut Graph, weights: &[NodeId]) -> Result<NodeId> {
    match weights {
        [] => Err(Error::EmptySequence),
        [only] => Ok(*only),
        many => g.mean_vectors(many),
    }
}

/// Uniform weights over the unmasked positions.
pub fn uniform_weights(g: &mut Graph, mask: &[bool]) -> Result<NodeId> {
    check_mask(mask.len(), mask)?;
    let w = masked_softmax_values(&vec![0.0; mask.len()], mask)?;
    Ok(g.input(Tensor::vector(w)))
}

/// Value-level fusion. Every input must match the mask length and carry no
/// weight on masked positions.
pub fn fuse_weights(parts: &[&[f64]], mask: &[bool]) -> Result<Vec<f64>> {
    if parts.is_empty() {
        return Err(Error::EmptySequence);
    }
    let k = mask.len();
    for w in parts {
        if w.len() != k {
            return Err(Error::LengthMismatch {
                what: "weights vs mask",
                left: w.len(),
                right: k,
            });
        }
        if w.iter().zip(mask).any(|(&a, &m)| !m && a != 0.0) {
            return Err(Error::MaskMismatch);
        }
    }
    let n = parts.len() as f64;
    Ok((0..k)
        .map(|i| parts.iter().map(|w| w[i]).sum::<f64>() / n)
        .collect())
}
