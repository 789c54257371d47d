//! A two-sentence, three-word toy document and small networks built on it,
//! for gradient suites and forward-pass oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch::{DocTensor, Limits};
use crate::embeddings::{build_pattern_table, build_vocab, QueryMode};
use crate::error::Result;
use crate::gradcheck::{finite_difference_check, GradCheckConfig, GradCheckReport};
use crate::graph::Graph;
use crate::model::{ModelConfig, ModelKind, Network, Parts};
use crate::params::ParamStore;
use crate::text::{CardinalPhrase, DatasetRecord, Label, TaggedToken};

/// Headline "loan 1 million" over a body of two three-word sentences. Both
/// headline cardinals are extracted; the second one is active.
pub fn toy_record() -> DatasetRecord {
    let t = |w: &str, p: &str| TaggedToken::new(w, p);
    DatasetRecord {
        id: "toy".into(),
        label: Label::Incongruent,
        headline: vec![t("loan", "NN"), t("1", "CD"), t("million", "CD")],
        body: vec![
            vec![t("the", "DT"), t("loan", "NN"), t("grew", "VBD")],
            vec![t("1", "CD"), t("million", "CD"), t("paid", "VBN")],
        ],
        patterns: vec!["NN:CD:CD".parse().expect("valid pattern"), "CD:CD:EOS".parse().expect("valid pattern")],
        phrases: vec![
            CardinalPhrase::new("loan", "1", "million"),
            CardinalPhrase::new("1", "million", "<eos>"),
        ],
        active_cardinal: Some(1),
    }
}

/// Small dimensions that keep finite differences cheap.
pub fn toy_config(kind: ModelKind) -> ModelConfig {
    ModelConfig {
        kind,
        word_dim: 4,
        hidden: 3,
        attention_dim: Some(5),
        pattern_dim: 6,
        ..ModelConfig::default()
    }
}

/// Network, parameters and encoded toy document. Every random draw derives
/// from `seed`.
pub fn toy_network(config: &ModelConfig, seed: u64) -> Result<(Network, ParamStore, DocTensor)> {
    let rec = toy_record();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = build_vocab(std::slice::from_ref(&rec), 1, config.word_dim, rng.gen())?;
    let patterns = build_pattern_table(std::slice::from_ref(&rec), config.pattern_dim, rng.gen());
    let (net, store) = Network::new(config, &words, Some(&patterns), rng.gen())?;
    let doc = DocTensor::from_record(&rec, &net.vocab, &net.patterns, Limits::default());
    Ok((net, store, doc))
}

/// Finite-difference check of every parameter group of `kind` on the toy.
///
/// POSHAN runs in training mode with an active cardinal. For POSAt the
/// category weights are redrawn from [0.2, 1] so no rectifier sits within a
/// step of its kink, where central differences are meaningless.
pub fn gradient_suite(config: &ModelConfig, seed: u64, check: &GradCheckConfig) -> Result<GradCheckReport> {
    let (net, mut store, doc) = toy_network(config, seed)?;
    if let Parts::Posat(p) = &net.parts {
        if let Some(scale) = p.scale {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            for v in store.value_mut(scale.w).data_mut() {
                *v = rng.gen_range(0.2..=1.0);
            }
        }
    }
    let mode = match config.kind {
        ModelKind::Poshan => QueryMode::Active,
        _ => QueryMode::MeanPool,
    };
    let forward = |s: &ParamStore, g: &mut Graph| net.loss(s, g, &doc, mode);
    finite_difference_check(&store, forward, &GradCheckConfig { seed, ..check.clone() })
}
