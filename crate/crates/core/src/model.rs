//! Model assembly: parameter layout, the hierarchical attention forward pass
//! and the classifier head shared by every model kind.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{fuse, uniform_weights, AttentionParams};
use crate::baselines::{self, PosatInit, SequenceParts};
use crate::batch::DocTensor;
use crate::embeddings::{
    mean_rows_node, row_node, sum_rows_node, EmbeddingMode, PatternEmbeddingTable, QueryMode, Vocab,
    WordEmbeddingTable, DESK_WORD_DIM, PATTERN_DIM,
};
use crate::encoder::{CellKind, RnnEncoder};
use crate::error::{Error, Result};
use crate::graph::{softmax_values, Graph, NodeId};
use crate::params::{ParamId, ParamStore, Parameter};
use crate::tensor::Tensor;

pub const DESK_HIDDEN: usize = 16;
/// Hidden size per direction used for the full-scale configuration.
pub const FULL_HIDDEN: usize = 300;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Poshan,
    Lstm,
    Posat,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Poshan => "poshan",
            ModelKind::Lstm => "lstm",
            ModelKind::Posat => "posat",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poshan" => Ok(ModelKind::Poshan),
            "lstm" => Ok(ModelKind::Lstm),
            "posat" => Ok(ModelKind::Posat),
            other => Err(Error::Config(format!("unknown model `{other}` (poshan, lstm, posat)"))),
        }
    }
}

/// Architecture settings; everything needed to rebuild the parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub word_dim: usize,
    pub hidden: usize,
    /// Inner size of the attention scorer; the encoder output width when unset.
    pub attention_dim: Option<usize>,
    pub pattern_dim: usize,
    pub cell: CellKind,
    pub embedding_mode: EmbeddingMode,
    pub disable_pattern_att: bool,
    pub disable_phrase_att: bool,
    pub replace_headline_att_with_encoder: bool,
    pub posat_init: PosatInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Poshan,
            word_dim: DESK_WORD_DIM,
            hidden: DESK_HIDDEN,
            attention_dim: None,
            pattern_dim: PATTERN_DIM,
            cell: CellKind::LstmBi,
            embedding_mode: EmbeddingMode::RandomTrainable,
            disable_pattern_att: false,
            disable_phrase_att: false,
            replace_headline_att_with_encoder: false,
            posat_init: PosatInit::NearZero,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.word_dim == 0 || self.hidden == 0 || self.pattern_dim == 0 || self.attention_dim == Some(0) {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.kind == ModelKind::Poshan
            && self.disable_pattern_att
            && self.disable_phrase_att
            && self.replace_headline_att_with_encoder
        {
            return Err(Error::Config("at least one attention query type must stay enabled".into()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        if self.cell.bidirectional() {
            2 * self.hidden
        } else {
            self.hidden
        }
    }

    pub fn attention_dim(&self) -> usize {
        self.attention_dim.unwrap_or_else(|| self.state_dim())
    }
}

/// `softmax(W x + b)` over the two labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifierHead {
    pub w: ParamId,
    pub b: ParamId,
}

impl ClassifierHead {
    pub fn new<R: Rng>(store: &mut ParamStore, input: usize, rng: &mut R) -> Result<Self> {
        let r = 1.0 / (input as f64).sqrt();
        let w = store.add_uniform("head.w", &[2, input], -r, r, rng)?;
        let b = store.add_zeros("head.b", &[2])?;
        Ok(ClassifierHead { w, b })
    }

    pub fn logits(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let (w, b) = (g.param(store, self.w), g.param(store, self.b));
        g.affine(w, x, b)
    }
}

/// Class probabilities `softmax(W x + b)` computed directly on values.
pub fn classify(w: &Tensor, b: &Tensor, x: &[f64]) -> Result<[f64; 2]> {
    if w.shape() != [2, x.len()] || b.shape() != [2] {
        return Err(Error::shape("classify", w.shape(), &[2, x.len()]));
    }
    let logits: Vec<f64> = (0..2)
        .map(|k| w.row(k).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b.data()[k])
        .collect();
    let p = softmax_values(&logits);
    Ok([p[0], p[1]])
}

/// One attention slot per query type; `None` when disabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuerySet {
    pub pattern: Option<AttentionParams>,
    pub phrase: Option<AttentionParams>,
    pub headline: Option<AttentionParams>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoshanParts {
    pub pattern_emb: ParamId,
    pub word_encoder: RnnEncoder,
    pub sentence_encoder: RnnEncoder,
    pub word_att: QuerySet,
    pub sentence_att: QuerySet,
    pub head: ClassifierHead,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum Parts {
    Poshan(PoshanParts),
    Lstm(SequenceParts),
    Posat(SequenceParts),
}

/// Parameter layout plus the vocabularies that index into it.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub patterns: Vocab,
    pub word_emb: ParamId,
    pub parts: Parts,
}

/// Weight vector nodes of one attention level.
#[derive(Clone, Copy, Debug)]
pub struct WeightNodes {
    pub pattern: Option<NodeId>,
    pub phrase: Option<NodeId>,
    pub headline: Option<NodeId>,
    pub fused: NodeId,
}

#[derive(Clone, Debug)]
pub struct TraceNodes {
    /// Per sentence; `None` for padding sentences.
    pub words: Vec<Option<WeightNodes>>,
    pub sentences: WeightNodes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub pattern: Option<Vec<f64>>,
    pub phrase: Option<Vec<f64>>,
    pub headline: Option<Vec<f64>>,
    pub fused: Vec<f64>,
}

impl AttentionWeights {
    fn read(g: &Graph, n: &WeightNodes) -> Self {
        let get = |id: Option<NodeId>| id.map(|i| g.value(i).data().to_vec());
        AttentionWeights {
            pattern: get(n.pattern),
            phrase: get(n.phrase),
            headline: get(n.headline),
            fused: g.value(n.fused).data().to_vec(),
        }
    }

    pub fn components(&self) -> Vec<&[f64]> {
        [&self.pattern, &self.phrase, &self.headline]
            .into_iter()
            .flatten()
            .map(Vec::as_slice)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocTrace {
    pub words: Vec<Option<AttentionWeights>>,
    pub sentences: AttentionWeights,
}

impl TraceNodes {
    pub fn read(&self, g: &Graph) -> DocTrace {
        DocTrace {
            words: self
                .words
                .iter()
                .map(|w| w.as_ref().map(|n| AttentionWeights::read(g, n)))
                .collect(),
            sentences: AttentionWeights::read(g, &self.sentences),
        }
    }
}

pub struct Forward {
    pub logits: NodeId,
    /// Document representation fed to the head.
    pub doc: NodeId,
    pub trace: Option<TraceNodes>,
}

struct Query {
    kind: usize,
    word: AttentionParams,
    sentence: AttentionParams,
    node: NodeId,
}

impl Network {
    /// Fresh parameters seeded from `seed`. POSHAN requires a pattern table.
    pub fn new(
        config: &ModelConfig,
        words: &WordEmbeddingTable,
        patterns: Option<&PatternEmbeddingTable>,
        seed: u64,
    ) -> Result<(Network, ParamStore)> {
        config.validate()?;
        if words.dim() != config.word_dim {
            return Err(Error::EmbeddingDim {
                expected: config.word_dim,
                found: words.dim(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let word_emb = store.add("embedding.words", words.matrix.clone(), config.embedding_mode.trainable())?;
        let (parts, pattern_vocab) = match config.kind {
            ModelKind::Poshan => {
                let table = patterns.ok_or_else(|| Error::Config("POSHAN needs a pattern table".into()))?;
                if table.matrix.cols() != config.pattern_dim {
                    return Err(Error::EmbeddingDim {
                        expected: config.pattern_dim,
                        found: table.matrix.cols(),
                    });
                }
                let parts = build_poshan(config, &mut store, table, &mut rng)?;
                (Parts::Poshan(parts), table.vocab.clone())
            }
            ModelKind::Lstm => (
                Parts::Lstm(SequenceParts::new(config, &mut store, false, &mut rng)?),
                Vocab::patterns([]),
            ),
            ModelKind::Posat => (
                Parts::Posat(SequenceParts::new(config, &mut store, true, &mut rng)?),
                Vocab::patterns([]),
            ),
        };
        Ok((
            Network {
                config: config.clone(),
                vocab: words.vocab.clone(),
                patterns: pattern_vocab,
                word_emb,
                parts,
            },
            store,
        ))
    }

    /// Rebuilds the layout for saved vocabularies and copies `params` in by name.
    pub fn restore(config: &ModelConfig, vocab: Vocab, patterns: Vocab, params: &[Parameter]) -> Result<(Network, ParamStore)> {
        let words = WordEmbeddingTable {
            matrix: Tensor::zeros(&[vocab.len(), config.word_dim]),
            vocab,
            mode: config.embedding_mode,
        };
        let table = PatternEmbeddingTable {
            matrix: Tensor::zeros(&[patterns.len(), config.pattern_dim]),
            vocab: patterns,
            trainable: true,
        };
        let (mut net, mut store) = Network::new(config, &words, Some(&table), 0)?;
        if config.kind != ModelKind::Poshan {
            net.patterns = table.vocab;
        }
        if params.len() != store.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                store.len(),
                params.len()
            )));
        }
        store.load_values(params)?;
        Ok((net, store))
    }

    pub fn forward(&self, store: &ParamStore, g: &mut Graph, doc: &DocTensor, mode: QueryMode) -> Result<Forward> {
        match &self.parts {
            Parts::Poshan(p) => self.poshan_forward(p, store, g, doc, mode),
            Parts::Lstm(p) => baselines::sequence_forward(self, p, store, g, doc),
            Parts::Posat(p) => baselines::sequence_forward(self, p, store, g, doc),
        }
    }

    pub fn loss(&self, store: &ParamStore, g: &mut Graph, doc: &DocTensor, mode: QueryMode) -> Result<NodeId> {
        let f = self.forward(store, g, doc, mode)?;
        g.softmax_cross_entropy(f.logits, doc.label.index())
    }

    /// `[P(congruent), P(incongruent)]`.
    pub fn probabilities(&self, store: &ParamStore, doc: &DocTensor, mode: QueryMode) -> Result<[f64; 2]> {
        let mut g = Graph::new();
        let f = self.forward(store, &mut g, doc, mode)?;
        let p = softmax_values(g.value(f.logits).data());
        Ok([p[0], p[1]])
    }

    fn rows(&self, g: &mut Graph, store: &ParamStore, rows: &[usize]) -> Result<Vec<NodeId>> {
        rows.iter()
            .map(|&r| row_node(g, store, self.word_emb, &self.vocab, r))
            .collect()
    }

    fn queries(&self, p: &PoshanParts, store: &ParamStore, g: &mut Graph, doc: &DocTensor, mode: QueryMode) -> Result<Vec<Query>> {
        let has_cardinal = !doc.patterns.is_empty() && doc.phrases.len() == doc.patterns.len();
        let wants_cardinal = p.word_att.pattern.is_some() || p.word_att.phrase.is_some();
        let active = match mode {
            QueryMode::Active if wants_cardinal => {
                let a = doc.active.ok_or_else(|| Error::NoActiveCardinal(doc.id.clone()))?;
                if a >= doc.patterns.len() || a >= doc.phrases.len() {
                    return Err(Error::NoActiveCardinal(doc.id.clone()));
                }
                Some(a)
            }
            _ => None,
        };
        if wants_cardinal && !has_cardinal {
            log::warn!("record {}: no cardinal feature, fusing the remaining query types", doc.id);
        }
        let mut out = Vec::new();
        if let (Some(word), Some(sentence), true) = (p.word_att.pattern, p.sentence_att.pattern, has_cardinal) {
            let node = match active {
                Some(a) => row_node(g, store, p.pattern_emb, &self.patterns, doc.patterns[a])?,
                None => mean_rows_node(g, store, p.pattern_emb, &self.patterns, &doc.patterns)?,
            };
            out.push(Query { kind: 0, word, sentence, node });
        }
        if let (Some(word), Some(sentence), true) = (p.word_att.phrase, p.sentence_att.phrase, has_cardinal) {
            let node = match active {
                Some(a) => sum_rows_node(g, store, self.word_emb, &self.vocab, &doc.phrases[a])?,
                None => {
                    let phrases = doc
                        .phrases
                        .iter()
                        .map(|ph| sum_rows_node(g, store, self.word_emb, &self.vocab, ph))
                        .collect::<Result<Vec<_>>>()?;
                    if phrases.len() == 1 {
                        phrases[0]
                    } else {
                        g.mean_vectors(&phrases)?
                    }
                }
            };
            out.push(Query { kind: 1, word, sentence, node });
        }
        if let (Some(word), Some(sentence)) = (p.word_att.headline, p.sentence_att.headline) {
            if doc.headline.is_empty() {
                log::warn!("record {}: empty headline, headline query is zero", doc.id);
            }
            let node = sum_rows_node(g, store, self.word_emb, &self.vocab, &doc.headline)?;
            out.push(Query { kind: 2, word, sentence, node });
        }
        Ok(out)
    }

    fn attend_all(
        g: &mut Graph,
        store: &ParamStore,
        queries: &[Query],
        sentence_level: bool,
        states: &[NodeId],
        mask: &[bool],
    ) -> Result<WeightNodes> {
        let mut slots = [None; 3];
        for q in queries {
            let params = if sentence_level { q.sentence } else { q.word };
            slots[q.kind] = Some(params.attend(g, store, states, mask, q.node)?);
        }
        let present: Vec<NodeId> = slots.iter().flatten().copied().collect();
        let fused = if present.is_empty() {
            uniform_weights(g, mask)?
        } else {
            fuse(g, &present)?
        };
        Ok(WeightNodes {
            pattern: slots[0],
            phrase: slots[1],
            headline: slots[2],
            fused,
        })
    }

    fn poshan_forward(
        &self,
        p: &PoshanParts,
        store: &ParamStore,
        g: &mut Graph,
        doc: &DocTensor,
        mode: QueryMode,
    ) -> Result<Forward> {
        if doc.words.is_empty() || doc.words.len() != doc.sentence_mask.len() || doc.words.len() != doc.word_mask.len() {
            return Err(Error::EmptySequence);
        }
        let queries = self.queries(p, store, g, doc, mode)?;
        let width = p.word_encoder.output_dim();
        let mut sentence_reps = Vec::with_capacity(doc.words.len());
        let mut word_trace = Vec::with_capacity(doc.words.len());
        for ((words, mask), &live) in doc.words.iter().zip(&doc.word_mask).zip(&doc.sentence_mask) {
            if !live || !mask.iter().any(|&m| m) {
                sentence_reps.push(g.zeros(width));
                word_trace.push(None);
                continue;
            }
            let xs = self.rows(g, store, words)?;
            let enc = p.word_encoder.encode(g, store, &xs, mask)?;
            let w = Self::attend_all(g, store, &queries, false, &enc.states, mask)?;
            sentence_reps.push(g.weighted_sum(w.fused, &enc.states)?);
            word_trace.push(Some(w));
        }
        let sentence_mask: Vec<bool> = word_trace.iter().map(Option::is_some).collect();
        let enc = p.sentence_encoder.encode(g, store, &sentence_reps, &sentence_mask)?;
        let sw = Self::attend_all(g, store, &queries, true, &enc.states, &sentence_mask)?;
        let mut d = g.weighted_sum(sw.fused, &enc.states)?;
        if self.config.replace_headline_att_with_encoder {
            let hl = if doc.headline.is_empty() {
                g.zeros(width)
            } else {
                let xs = self.rows(g, store, &doc.headline)?;
                let mask = vec![true; xs.len()];
                let e = p.word_encoder.encode(g, store, &xs, &mask)?;
                e.last.expect("non-empty headline")
            };
            d = g.concat(&[d, hl])?;
        }
        let logits = p.head.logits(g, store, d)?;
        Ok(Forward {
            logits,
            doc: d,
            trace: Some(TraceNodes {
                words: word_trace,
                sentences: sw,
            }),
        })
    }
}

fn build_poshan<R: Rng>(
    config: &ModelConfig,
    store: &mut ParamStore,
    table: &PatternEmbeddingTable,
    rng: &mut R,
) -> Result<PoshanParts> {
    let pattern_emb = store.add("embedding.patterns", table.matrix.clone(), table.trainable)?;
    let word_encoder = RnnEncoder::new(store, "word_encoder", config.cell, config.word_dim, config.hidden, rng)?;
    let width = word_encoder.output_dim();
    let sentence_encoder = RnnEncoder::new(store, "sentence_encoder", config.cell, width, config.hidden, rng)?;
    let a = config.attention_dim();
    let set = |level: &str, store: &mut ParamStore, rng: &mut R| -> Result<QuerySet> {
        let mut make = |name: &str, q: usize, on: bool| -> Result<Option<AttentionParams>> {
            if !on {
                return Ok(None);
            }
            Ok(Some(AttentionParams::new(store, &format!("{level}_att.{name}"), width, q, a, rng)?))
        };
        Ok(QuerySet {
            pattern: make("pattern", config.pattern_dim, !config.disable_pattern_att)?,
            phrase: make("phrase", config.word_dim, !config.disable_phrase_att)?,
            headline: make("headline", config.word_dim, !config.replace_headline_att_with_encoder)?,
        })
    };
    let word_att = set("word", store, rng)?;
    let sentence_att = set("sentence", store, rng)?;
    let head_in = if config.replace_headline_att_with_encoder { 2 * width } else { width };
    let head = ClassifierHead::new(store, head_in, rng)?;
    Ok(PoshanParts {
        pattern_emb,
        word_encoder,
        sentence_encoder,
        word_att,
        sentence_att,
        head,
    })
}
