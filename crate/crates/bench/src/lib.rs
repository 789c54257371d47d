//! Fixtures shared by the criterion benches.

use poshan_core::batch::{DocTensor, Limits};
use poshan_core::embeddings::{build_pattern_table, build_vocab};
use poshan_core::synthetic::{synthetic_corpus, SyntheticConfig};
use poshan_core::{ModelConfig, ModelKind, Network, ParamStore};

/// A network at desk scale with `docs` encoded synthetic documents of
/// roughly 8 sentences by 12 words.
pub fn desk_model(kind: ModelKind, docs: usize) -> (Network, ParamStore, Vec<DocTensor>) {
    let records = synthetic_corpus(&SyntheticConfig {
        records: docs,
        seed: 11,
        min_sentences: 6,
        max_sentences: 10,
        min_words: 10,
        max_words: 14,
    });
    let config = ModelConfig { kind, ..ModelConfig::default() };
    let words = build_vocab(&records, 1, config.word_dim, 1).expect("non-empty corpus");
    let patterns = build_pattern_table(&records, config.pattern_dim, 2);
    let (net, store) = Network::new(&config, &words, Some(&patterns), 3).expect("valid config");
    let docs = records
        .iter()
        .map(|r| DocTensor::from_record(r, &net.vocab, &net.patterns, Limits::default()))
        .collect();
    (net, store, docs)
}
