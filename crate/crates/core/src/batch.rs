//! Index-encoded documents, truncation, padding and seeded batching.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::PosCategory;
use crate::embeddings::{Vocab, PAD};
use crate::text::{DatasetRecord, Label};

pub const MAX_WORDS: usize = 45;
pub const MAX_SENTENCES: usize = 35;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_words: usize,
    pub max_sentences: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_words: MAX_WORDS,
            max_sentences: MAX_SENTENCES,
        }
    }
}

/// A record as vocabulary indices with word and sentence masks.
#[derive(Clone, Debug, PartialEq)]
pub struct DocTensor {
    pub id: String,
    pub label: Label,
    pub headline: Vec<usize>,
    pub headline_cats: Vec<PosCategory>,
    /// `[sentences][words]`, padded with [`PAD`].
    pub words: Vec<Vec<usize>>,
    pub word_mask: Vec<Vec<bool>>,
    pub cats: Vec<Vec<PosCategory>>,
    pub sentence_mask: Vec<bool>,
    /// Pattern-table rows, one per headline cardinal.
    pub patterns: Vec<usize>,
    /// Word rows of each cardinal phrase.
    pub phrases: Vec<[usize; 3]>,
    pub active: Option<usize>,
}

impl DocTensor {
    /// Encodes and truncates a record. An empty body becomes one sentence
    /// holding a single padding token.
    pub fn from_record(record: &DatasetRecord, vocab: &Vocab, patterns: &Vocab, limits: Limits) -> Self {
        let mut words = Vec::new();
        let mut cats = Vec::new();
        for sentence in record.body.iter().filter(|s| !s.is_empty()).take(limits.max_sentences) {
            let kept = &sentence[..sentence.len().min(limits.max_words)];
            words.push(kept.iter().map(|t| vocab.lookup(&t.text)).collect::<Vec<_>>());
            cats.push(kept.iter().map(|t| PosCategory::of(&t.pos)).collect::<Vec<_>>());
        }
        if words.is_empty() {
            words.push(vec![PAD]);
            cats.push(vec![PosCategory::Other]);
        }
        let word_mask = words.iter().map(|s| vec![true; s.len()]).collect();
        let sentence_mask = vec![true; words.len()];
        DocTensor {
            id: record.id.clone(),
            label: record.label,
            headline: record.headline.iter().map(|t| vocab.lookup(&t.text)).collect(),
            headline_cats: record.headline.iter().map(|t| PosCategory::of(&t.pos)).collect(),
            words,
            word_mask,
            cats,
            sentence_mask,
            patterns: record.patterns.iter().map(|p| patterns.lookup(&p.to_string())).collect(),
            phrases: record
                .phrases
                .iter()
                .map(|p| [vocab.lookup(&p.prev), vocab.lookup(&p.num), vocab.lookup(&p.next)])
                .collect(),
            active: record.active_cardinal,
        }
    }

    pub fn num_sentences(&self) -> usize {
        self.words.len()
    }

    pub fn max_sentence_len(&self) -> usize {
        self.words.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Pads to `sentences × words` with masked entries.
    pub fn pad_to(&mut self, sentences: usize, words: usize) {
        for ((w, m), c) in self.words.iter_mut().zip(&mut self.word_mask).zip(&mut self.cats) {
            w.resize(words.max(w.len()), PAD);
            m.resize(w.len(), false);
            c.resize(w.len(), PosCategory::Other);
        }
        while self.words.len() < sentences {
            self.words.push(vec![PAD; words]);
            self.word_mask.push(vec![false; words]);
            self.cats.push(vec![PosCategory::Other; words]);
            self.sentence_mask.push(false);
        }
    }

    /// Unmasked body words in reading order with their categories.
    pub fn body_tokens(&self) -> impl Iterator<Item = (usize, PosCategory)> + '_ {
        self.words
            .iter()
            .zip(&self.word_mask)
            .zip(&self.cats)
            .flat_map(|((w, m), c)| w.iter().zip(m).zip(c).filter(|(( _, &m), _)| m).map(|((&w, _), &c)| (w, c)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub docs: Vec<DocTensor>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Splits `docs` into batches, shuffling first when `shuffle_seed` is set, and
/// pads every document to its batch's largest shape.
pub fn make_batches(mut docs: Vec<DocTensor>, batch_size: usize, shuffle_seed: Option<u64>) -> Vec<Batch> {
    assert!(batch_size > 0, "batch size must be positive");
    if let Some(seed) = shuffle_seed {
        docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut batches = Vec::with_capacity(docs.len().div_ceil(batch_size));
    let mut iter = docs.into_iter().peekable();
    while iter.peek().is_some() {
        let mut chunk: Vec<DocTensor> = iter.by_ref().take(batch_size).collect();
        let s = chunk.iter().map(DocTensor::num_sentences).max().unwrap_or(0);
        let w = chunk.iter().map(DocTensor::max_sentence_len).max().unwrap_or(0);
        for d in &mut chunk {
            d.pad_to(s, w);
        }
        batches.push(Batch { docs: chunk });
    }
    batches
}
