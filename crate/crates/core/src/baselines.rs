//! Sequence baselines over the concatenated headline and body: a plain
//! bidirectional LSTM and a variant that scales each word vector by a learned
//! weight for its part-of-speech category.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::DocTensor;
use crate::embeddings::row_node;
use crate::encoder::RnnEncoder;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::model::{ClassifierHead, Forward, ModelConfig, Network};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Baseline embedding size at full scale.
pub const FULL_BASELINE_WORD_DIM: usize = 100;
/// Baseline hidden size at full scale.
pub const FULL_BASELINE_HIDDEN: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PosCategory {
    Noun,
    Verb,
    Adjective,
    Pronoun,
    Adverb,
    Cardinal,
    Other,
}

impl PosCategory {
    pub const COUNT: usize = 7;

    pub const ALL: [PosCategory; 7] = [
        PosCategory::Noun,
        PosCategory::Verb,
        PosCategory::Adjective,
        PosCategory::Pronoun,
        PosCategory::Adverb,
        PosCategory::Cardinal,
        PosCategory::Other,
    ];

    /// Category of a Penn Treebank tag; unlisted tags fall into `Other`.
    pub fn of(tag: &str) -> Self {
        match tag {
            "NN" | "NNS" | "NNP" | "NNPS" => PosCategory::Noun,
            "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" => PosCategory::Verb,
            "JJ" | "JJR" | "JJS" => PosCategory::Adjective,
            "WP" => PosCategory::Pronoun,
            "WRB" => PosCategory::Adverb,
            "CD" => PosCategory::Cardinal,
            _ => PosCategory::Other,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn one_hot(self) -> Tensor {
        let mut v = vec![0.0; Self::COUNT];
        v[self.index()] = 1.0;
        Tensor::vector(v)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosatInit {
    /// Category weights uniform in `[0, 0.01]`.
    #[default]
    NearZero,
    /// Category weights uniform in `[-1, 1]`.
    Random,
}

impl std::str::FromStr for PosatInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "near-zero" => Ok(PosatInit::NearZero),
            "random" => Ok(PosatInit::Random),
            other => Err(Error::Config(format!("unknown posat init `{other}` (near-zero, random)"))),
        }
    }
}

/// `theta = relu(w . onehot(category) + b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CategoryScale {
    pub w: ParamId,
    pub b: ParamId,
}

impl CategoryScale {
    pub fn theta(&self, g: &mut Graph, store: &ParamStore, cat: PosCategory) -> Result<NodeId> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let x = g.input(cat.one_hot());
        let s = g.dot(w, x)?;
        let s = g.add(s, b)?;
        Ok(g.relu(s))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceParts {
    pub encoder: RnnEncoder,
    pub scale: Option<CategoryScale>,
    pub head: ClassifierHead,
}

impl SequenceParts {
    pub fn new<R: Rng>(config: &ModelConfig, store: &mut ParamStore, scaled: bool, rng: &mut R) -> Result<Self> {
        let encoder = RnnEncoder::new(store, "encoder", config.cell, config.word_dim, config.hidden, rng)?;
        let scale = if scaled {
            let (lo, hi) = match config.posat_init {
                PosatInit::NearZero => (0.0, 0.01),
                PosatInit::Random => (-1.0, 1.0),
            };
            let w = store.add_uniform("posat.category_w", &[PosCategory::COUNT], lo, hi, rng)?;
            let b = store.add_zeros("posat.category_b", &[1])?;
            Some(CategoryScale { w, b })
        } else {
            None
        };
        let head = ClassifierHead::new(store, encoder.output_dim(), rng)?;
        Ok(SequenceParts { encoder, scale, head })
    }
}

/// Headline tokens followed by every unmasked body token.
pub fn concat_tokens(doc: &DocTensor) -> Vec<(usize, PosCategory)> {
    doc.headline
        .iter()
        .copied()
        .zip(doc.headline_cats.iter().copied())
        .chain(doc.body_tokens())
        .collect()
}

/// Encodes the concatenated token sequence and classifies its final state.
pub fn sequence_forward(
    net: &Network,
    p: &SequenceParts,
    store: &ParamStore,
    g: &mut Graph,
    doc: &DocTensor,
) -> Result<Forward> {
    if doc.headline.len() != doc.headline_cats.len() {
        return Err(Error::LengthMismatch {
            what: "headline tokens vs tags",
            left: doc.headline.len(),
            right: doc.headline_cats.len(),
        });
    }
    let tokens = concat_tokens(doc);
    if tokens.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut thetas: HashMap<PosCategory, NodeId> = HashMap::new();
    let mut xs = Vec::with_capacity(tokens.len());
    for (row, cat) in tokens {
        let e = row_node(g, store, net.word_emb, &net.vocab, row)?;
        let x = match &p.scale {
            Some(scale) => {
                let theta = match thetas.get(&cat) {
                    Some(&t) => t,
                    None => {
                        let t = scale.theta(g, store, cat)?;
                        thetas.insert(cat, t);
                        t
                    }
                };
                g.scale_by(e, theta)?
            }
            None => e,
        };
        xs.push(x);
    }
    let mask = vec![true; xs.len()];
    let enc = p.encoder.encode(g, store, &xs, &mask)?;
    let last = enc.last.ok_or(Error::EmptySequence)?;
    let logits = p.head.logits(g, store, last)?;
    Ok(Forward {
        logits,
        doc: last,
        trace: None,
    })
}
