//! Prediction reports and attention trace export.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::DocTensor;
use crate::checkpoint::Checkpoint;
use crate::embeddings::{pattern_embedding_tsv, pattern_majority_tsv, QueryMode};
use crate::error::{Error, Result};
use crate::graph::{softmax_values, Graph};
use crate::metrics::{macro_f1, roc_auc, Confusion};
use crate::model::{AttentionWeights, Network, Parts};
use crate::params::ParamStore;
use crate::text::{DatasetRecord, Label};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    pub predicted: Label,
    pub p_congruent: f64,
    pub p_incongruent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub records: usize,
    pub macro_f1: f64,
    /// `None` when the records hold a single class.
    pub auc: Option<f64>,
    pub confusion: Confusion,
    pub predictions: Vec<Prediction>,
}

/// Inference over `records` with mean-pooled cardinal queries.
pub fn predict_with(net: &Network, store: &ParamStore, limits: crate::batch::Limits, records: &[DatasetRecord]) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to evaluate"));
    }
    let predictions: Vec<Prediction> = records
        .par_iter()
        .map(|r| {
            let doc = DocTensor::from_record(r, &net.vocab, &net.patterns, limits);
            let [pc, pi] = net.probabilities(store, &doc, QueryMode::MeanPool)?;
            Ok(Prediction {
                id: r.id.clone(),
                label: r.label,
                predicted: if pi > pc { Label::Incongruent } else { Label::Congruent },
                p_congruent: pc,
                p_incongruent: pi,
            })
        })
        .collect::<Result<_>>()?;
    let labels: Vec<Label> = predictions.iter().map(|p| p.label).collect();
    let predicted: Vec<Label> = predictions.iter().map(|p| p.predicted).collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.p_incongruent).collect();
    let auc = match roc_auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::UndefinedAuc) => {
            log::warn!("only one class present; AUC is undefined");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        model: net.config.kind.to_string(),
        records: records.len(),
        macro_f1: macro_f1(&predicted, &labels)?,
        auc,
        confusion: Confusion::from_predictions(&predicted, &labels)?,
        predictions,
    })
}

pub fn predict(checkpoint: &Checkpoint, records: &[DatasetRecord]) -> Result<EvalReport> {
    let (net, store) = checkpoint.network()?;
    predict_with(&net, &store, checkpoint.train_config.limits(), records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordWeights {
    pub token: String,
    pub alpha_pattern: Option<f64>,
    pub alpha_phrase: Option<f64>,
    pub alpha_headline: Option<f64>,
    pub alpha_fused: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceWeights {
    pub beta_pattern: Option<f64>,
    pub beta_phrase: Option<f64>,
    pub beta_headline: Option<f64>,
    pub beta_fused: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub id: String,
    pub label: Label,
    pub p_incongruent: f64,
    pub sentences: Vec<Vec<WordWeights>>,
    pub sentence_weights: Vec<SentenceWeights>,
}

impl AttentionTrace {
    /// Every weight vector as a slice set, for invariant checks.
    pub fn word_vectors(&self) -> Vec<[Option<Vec<f64>>; 4]> {
        self.sentences
            .iter()
            .map(|s| {
                let col = |f: fn(&WordWeights) -> Option<f64>| s.iter().map(f).collect::<Option<Vec<f64>>>();
                [
                    col(|w| w.alpha_pattern),
                    col(|w| w.alpha_phrase),
                    col(|w| w.alpha_headline),
                    Some(s.iter().map(|w| w.alpha_fused).collect()),
                ]
            })
            .collect()
    }
}

fn at(v: &Option<Vec<f64>>, i: usize) -> Option<f64> {
    v.as_ref().map(|w| w[i])
}

/// Word and sentence attention weights of one record. POSHAN only.
pub fn attention_trace(net: &Network, store: &ParamStore, limits: crate::batch::Limits, record: &DatasetRecord) -> Result<AttentionTrace> {
    if !matches!(net.parts, Parts::Poshan(_)) {
        return Err(Error::Config(format!("attention traces need a poshan model, not {}", net.config.kind)));
    }
    let doc = DocTensor::from_record(record, &net.vocab, &net.patterns, limits);
    let mut g = Graph::new();
    let f = net.forward(store, &mut g, &doc, QueryMode::MeanPool)?;
    let p = softmax_values(g.value(f.logits).data());
    let trace = f.trace.expect("poshan forward records a trace").read(&g);
    let tokens: Vec<Vec<&str>> = if record.body.iter().all(|s| s.is_empty()) {
        vec![vec!["<pad>"]]
    } else {
        record
            .body
            .iter()
            .filter(|s| !s.is_empty())
            .take(limits.max_sentences)
            .map(|s| s.iter().take(limits.max_words).map(|t| t.text.as_str()).collect())
            .collect()
    };
    let mut sentences = Vec::with_capacity(tokens.len());
    for (toks, w) in tokens.iter().zip(&trace.words) {
        let w: &AttentionWeights = w.as_ref().expect("unpadded sentences are live");
        sentences.push(
            toks.iter()
                .enumerate()
                .map(|(i, t)| WordWeights {
                    token: t.to_string(),
                    alpha_pattern: at(&w.pattern, i),
                    alpha_phrase: at(&w.phrase, i),
                    alpha_headline: at(&w.headline, i),
                    alpha_fused: w.fused[i],
                })
                .collect(),
        );
    }
    let s = &trace.sentences;
    let sentence_weights = (0..tokens.len())
        .map(|j| SentenceWeights {
            beta_pattern: at(&s.pattern, j),
            beta_phrase: at(&s.phrase, j),
            beta_headline: at(&s.headline, j),
            beta_fused: s.fused[j],
        })
        .collect();
    Ok(AttentionTrace {
        id: record.id.clone(),
        label: record.label,
        p_incongruent: p[1],
        sentences,
        sentence_weights,
    })
}

/// Pattern embedding TSV and the companion majority-label TSV.
pub fn pattern_exports(checkpoint: &Checkpoint) -> Result<(String, String)> {
    let (net, store) = checkpoint.network()?;
    let Parts::Poshan(p) = &net.parts else {
        return Err(Error::Config(format!(
            "pattern embeddings exist only for poshan models, not {}",
            net.config.kind
        )));
    };
    Ok((
        pattern_embedding_tsv(&net.patterns, store.value(p.pattern_emb)),
        pattern_majority_tsv(&checkpoint.pattern_label_counts),
    ))
}
