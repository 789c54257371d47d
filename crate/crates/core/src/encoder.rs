//! Recurrent sequence encoders (LSTM and GRU cells, one or two directions).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    #[default]
    LstmBi,
    GruBi,
    LstmUni,
}

impl CellKind {
    pub fn bidirectional(self) -> bool {
        !matches!(self, CellKind::LstmUni)
    }

    pub fn is_lstm(self) -> bool {
        !matches!(self, CellKind::GruBi)
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm-bi" => Ok(CellKind::LstmBi),
            "gru-bi" => Ok(CellKind::GruBi),
            "lstm-uni" => Ok(CellKind::LstmUni),
            other => Err(Error::Config(format!("unknown cell `{other}` (lstm-bi, gru-bi, lstm-uni)"))),
        }
    }
}

/// One gate: input weights, recurrent weights and bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gate {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

impl Gate {
    fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        bias: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let r = 1.0 / (hidden as f64).sqrt();
        let w = store.add_uniform(format!("{prefix}.w"), &[hidden, input], -r, r, rng)?;
        let u = store.add_uniform(format!("{prefix}.u"), &[hidden, hidden], -r, r, rng)?;
        let b = store.add(format!("{prefix}.b"), Tensor::vector(vec![bias; hidden]), true)?;
        Ok(Gate { w, u, b })
    }

    /// `W x + U h + b`
    fn pre(&self, g: &mut Graph, store: &ParamStore, x: NodeId, h: NodeId) -> Result<NodeId> {
        let (w, u, b) = (g.param(store, self.w), g.param(store, self.u), g.param(store, self.b));
        let wx = g.affine(w, x, b)?;
        let uh = g.matvec(u, h)?;
        g.add(wx, uh)
    }
}

/// LSTM parameters for one direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub input: Gate,
    pub forget: Gate,
    pub output: Gate,
    pub candidate: Gate,
}

impl LstmParams {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(LstmParams {
            input: Gate::new(store, &format!("{prefix}.input"), input, hidden, 0.0, rng)?,
            forget: Gate::new(store, &format!("{prefix}.forget"), input, hidden, 1.0, rng)?,
            output: Gate::new(store, &format!("{prefix}.output"), input, hidden, 0.0, rng)?,
            candidate: Gate::new(store, &format!("{prefix}.candidate"), input, hidden, 0.0, rng)?,
        })
    }

    pub fn gates(&self) -> [Gate; 4] {
        [self.input, self.forget, self.output, self.candidate]
    }
}

/// GRU parameters for one direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GruParams {
    pub update: Gate,
    pub reset: Gate,
    pub candidate: Gate,
}

impl GruParams {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(GruParams {
            update: Gate::new(store, &format!("{prefix}.update"), input, hidden, 0.0, rng)?,
            reset: Gate::new(store, &format!("{prefix}.reset"), input, hidden, 0.0, rng)?,
            candidate: Gate::new(store, &format!("{prefix}.candidate"), input, hidden, 0.0, rng)?,
        })
    }
}

/// One LSTM step; returns `(h, c)`.
pub fn lstm_step(
    g: &mut Graph,
    store: &ParamStore,
    p: &LstmParams,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    let i = p.input.pre(g, store, x, h_prev)?;
    let i = g.sigmoid(i);
    let f = p.forget.pre(g, store, x, h_prev)?;
    let f = g.sigmoid(f);
    let o = p.output.pre(g, store, x, h_prev)?;
    let o = g.sigmoid(o);
    let cand = p.candidate.pre(g, store, x, h_prev)?;
    let cand = g.tanh(cand);
    let keep = g.hadamard(f, c_prev)?;
    let write = g.hadamard(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.hadamard(o, tc)?;
    Ok((h, c))
}

/// One GRU step: `h = (1 - z) * n + z * h_prev` with `n = tanh(W x + U (r * h_prev) + b)`.
pub fn gru_step(g: &mut Graph, store: &ParamStore, p: &GruParams, x: NodeId, h_prev: NodeId) -> Result<NodeId> {
    let z = p.update.pre(g, store, x, h_prev)?;
    let z = g.sigmoid(z);
    let r = p.reset.pre(g, store, x, h_prev)?;
    let r = g.sigmoid(r);
    let rh = g.hadamard(r, h_prev)?;
    let n = p.candidate.pre(g, store, x, rh)?;
    let n = g.tanh(n);
    let keep = g.hadamard(z, h_prev)?;
    let nz = g.one_minus(z);
    let write = g.hadamard(nz, n)?;
    g.add(keep, write)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Lstm(LstmParams),
    Gru(GruParams),
}

impl Direction {
    /// Hidden states over `xs` in the given order, starting from zero state.
    fn run(&self, g: &mut Graph, store: &ParamStore, xs: &[NodeId], hidden: usize) -> Result<Vec<NodeId>> {
        let mut h = g.zeros(hidden);
        let mut c = h;
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            match self {
                Direction::Lstm(p) => {
                    let (nh, nc) = lstm_step(g, store, p, x, h, c)?;
                    h = nh;
                    c = nc;
                }
                Direction::Gru(p) => h = gru_step(g, store, p, x, h)?,
            }
            out.push(h);
        }
        Ok(out)
    }
}

/// Encoder outputs for one sequence.
#[derive(Clone, Debug)]
pub struct Encoded {
    /// One state per input position; masked positions hold zero vectors.
    pub states: Vec<NodeId>,
    /// Forward state at the last unmasked position and backward state at the
    /// first; `None` when every position is masked.
    pub last: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RnnEncoder {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub forward: Direction,
    pub backward: Option<Direction>,
}

impl RnnEncoder {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut make = |dir: &str| -> Result<Direction> {
            let name = format!("{prefix}.{dir}");
            Ok(if kind.is_lstm() {
                Direction::Lstm(LstmParams::new(store, &name, input_dim, hidden, rng)?)
            } else {
                Direction::Gru(GruParams::new(store, &name, input_dim, hidden, rng)?)
            })
        };
        let forward = make("fwd")?;
        let backward = if kind.bidirectional() { Some(make("bwd")?) } else { None };
        Ok(RnnEncoder {
            kind,
            input_dim,
            hidden,
            forward,
            backward,
        })
    }

    /// Width of each output state: `2h` for two directions, `h` for one.
    pub fn output_dim(&self) -> usize {
        if self.backward.is_some() {
            2 * self.hidden
        } else {
            self.hidden
        }
    }

    /// Runs both directions over the unmasked positions only.
    pub fn encode(&self, g: &mut Graph, store: &ParamStore, inputs: &[NodeId], mask: &[bool]) -> Result<Encoded> {
        if inputs.is_empty() {
            return Err(Error::EmptySequence);
        }
        if inputs.len() != mask.len() {
            return Err(Error::LengthMismatch {
                what: "inputs vs mask",
                left: inputs.len(),
                right: mask.len(),
            });
        }
        for &x in inputs {
            let v = g.value(x);
            if !v.is_vector() || v.len() != self.input_dim {
                return Err(Error::shape("encoder input", v.shape(), &[self.input_dim]));
            }
        }
        let positions: Vec<usize> = (0..inputs.len()).filter(|&t| mask[t]).collect();
        let xs: Vec<NodeId> = positions.iter().map(|&t| inputs[t]).collect();
        let fwd = self.forward.run(g, store, &xs, self.hidden)?;
        let bwd = match &self.backward {
            Some(dir) => {
                let rev: Vec<NodeId> = xs.iter().rev().copied().collect();
                let mut states = dir.run(g, store, &rev, self.hidden)?;
                states.reverse();
                Some(states)
            }
            None => None,
        };

        let mut states = Vec::with_capacity(inputs.len());
        let mut next = 0;
        let mut zero = None;
        for &m in mask {
            if m {
                let s = match &bwd {
                    Some(b) => g.concat(&[fwd[next], b[next]])?,
                    None => fwd[next],
                };
                states.push(s);
                next += 1;
            } else {
                let z = *zero.get_or_insert_with(|| g.zeros(self.output_dim()));
                states.push(z);
            }
        }
        let last = match (fwd.last(), &bwd) {
            (None, _) => None,
            (Some(&f), Some(b)) => Some(g.concat(&[f, b[0]])?),
            (Some(&f), None) => Some(f),
        };
        Ok(Encoded { states, last })
    }
}
