//! Seeded synthetic corpora for tests and benchmarks.
//!
//! Every headline carries one number. The record is congruent when that
//! number appears verbatim in the body and incongruent when the body mentions
//! a different number instead.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::text::{derive_dataset, DatasetRecord, Label, RawRecord, TagProvider};

const NUMBERS: &[&str] = &["3", "5", "7", "12", "19", "25", "40", "64", "100", "250", "1,000", "2.5"];
const NOUNS: &[&str] = &["people", "cars", "homes", "jobs", "votes", "schools", "trees", "dollars"];
const VERBS: &[&str] = &["reports", "says", "finds", "shows", "expects", "claims"];
const FILLER: &[&str] = &[
    "the", "city", "council", "market", "team", "officials", "today", "new", "local", "price", "plan",
    "week", "river", "budget", "mayor", "station", "road", "study", "group", "state",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub records: usize,
    pub seed: u64,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            records: 64,
            seed: 0,
            min_sentences: 2,
            max_sentences: 3,
            min_words: 4,
            max_words: 6,
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

fn headline<R: Rng>(rng: &mut R, n: &str) -> String {
    let (noun, verb, f) = (pick(rng, NOUNS), pick(rng, VERBS), pick(rng, FILLER));
    match rng.gen_range(0..3) {
        0 => format!("{n} {noun} {verb} {f}"),
        1 => format!("{f} {verb} {n} {noun}"),
        _ => format!("{f} {} hits {n}", pick(rng, FILLER)),
    }
}

fn filler_sentence<R: Rng>(rng: &mut R, words: usize) -> Vec<String> {
    (0..words).map(|_| pick(rng, FILLER).to_string()).collect()
}

/// Raw records alternating congruent and incongruent labels.
pub fn synthetic_raw(cfg: &SyntheticConfig) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.records)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Congruent } else { Label::Incongruent };
            let n = pick(&mut rng, NUMBERS);
            let mentioned = match label {
                Label::Congruent => n,
                Label::Incongruent => loop {
                    let m = pick(&mut rng, NUMBERS);
                    if m != n {
                        break m;
                    }
                },
            };
            let sentences = rng.gen_range(cfg.min_sentences..=cfg.max_sentences);
            let target = rng.gen_range(0..sentences);
            let body: Vec<String> = (0..sentences)
                .map(|j| {
                    let words = rng.gen_range(cfg.min_words..=cfg.max_words);
                    let mut s = filler_sentence(&mut rng, words);
                    if j == target {
                        let at = rng.gen_range(0..=s.len());
                        s.insert(at, format!("{mentioned} {}", pick(&mut rng, NOUNS)));
                        s.insert(0, pick(&mut rng, VERBS).to_string());
                    }
                    format!("{}.", s.join(" "))
                })
                .collect();
            RawRecord {
                id: format!("syn-{}-{i}", cfg.seed),
                headline: headline(&mut rng, n),
                body: body.join(" "),
                label,
            }
        })
        .collect()
}

/// Synthetic records run through the rule tagger and cardinal extraction.
pub fn synthetic_corpus(cfg: &SyntheticConfig) -> Vec<DatasetRecord> {
    let raw = synthetic_raw(cfg);
    let (records, summary) = derive_dataset(&raw, &TagProvider::FallbackRule).expect("rule tagger is total");
    debug_assert_eq!(summary.total_dropped(), 0);
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_rule_holds() {
        let raw = synthetic_raw(&SyntheticConfig { records: 50, seed: 3, ..SyntheticConfig::default() });
        for r in &raw {
            let number = r
                .headline
                .split_whitespace()
                .find(|w| w.chars().next().is_some_and(|c| c.is_ascii_digit()))
                .unwrap();
            let in_body = r.body.split_whitespace().any(|w| w.trim_end_matches('.') == number);
            assert_eq!(in_body, r.label == Label::Congruent, "{r:?}");
        }
    }

    #[test]
    fn every_record_survives_derivation() {
        let cfg = SyntheticConfig { records: 40, seed: 9, ..SyntheticConfig::default() };
        let recs = synthetic_corpus(&cfg);
        assert_eq!(recs.len(), 40);
        assert!(recs.iter().all(|r| !r.patterns.is_empty()));
        assert_eq!(recs, synthetic_corpus(&cfg));
    }
}
