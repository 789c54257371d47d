//! Word and cardinal-pattern embedding tables and the three attention queries.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::text::{CardinalPhrase, DatasetRecord, Label, BOS_TOKEN, EOS_TOKEN};

pub const PATTERN_DIM: usize = 100;
pub const FULL_WORD_DIM: usize = 768;
pub const DESK_WORD_DIM: usize = 64;
pub const INIT_RANGE: f64 = 0.05;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_PATTERN: &str = "<unk-pattern>";

/// Row of the padding/sentinel embedding; always zero.
pub const PAD: usize = 0;
/// Row of the unknown-word embedding.
pub const UNK: usize = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabData")]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    unk: usize,
    /// Index of the zero row, when the vocabulary has one.
    pad: Option<usize>,
}

#[derive(Deserialize)]
struct VocabData {
    tokens: Vec<String>,
    unk: usize,
    pad: Option<usize>,
}

impl From<VocabData> for Vocab {
    fn from(d: VocabData) -> Self {
        Vocab::from_tokens(d.tokens, d.unk, d.pad)
    }
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>, unk: usize, pad: Option<usize>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab {
            tokens,
            index,
            unk,
            pad,
        }
    }

    /// Word vocabulary: PAD at 0, UNK at 1, then `words` in the given order.
    pub fn words(words: impl IntoIterator<Item = String>) -> Self {
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(words);
        Vocab::from_tokens(tokens, UNK, Some(PAD))
    }

    /// Pattern vocabulary: UNK-pattern at 0, then `patterns`.
    pub fn patterns(patterns: impl IntoIterator<Item = String>) -> Self {
        let mut tokens = vec![UNK_PATTERN.to_string()];
        tokens.extend(patterns);
        Vocab::from_tokens(tokens, 0, None)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn unk(&self) -> usize {
        self.unk
    }

    pub fn pad(&self) -> Option<usize> {
        self.pad
    }

    /// Row for `token`; sentinels map to the zero row, unseen tokens to UNK.
    pub fn lookup(&self, token: &str) -> usize {
        if let Some(pad) = self.pad {
            if token == BOS_TOKEN || token == EOS_TOKEN || token == PAD_TOKEN {
                return pad;
            }
        }
        self.index.get(token).copied().unwrap_or(self.unk)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMode {
    PreloadedFrozen,
    PreloadedTrainable,
    RandomTrainable,
}

impl EmbeddingMode {
    pub fn trainable(self) -> bool {
        !matches!(self, EmbeddingMode::PreloadedFrozen)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordEmbeddingTable {
    pub vocab: Vocab,
    pub matrix: Tensor,
    pub mode: EmbeddingMode,
}

impl WordEmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, token: &str) -> &[f64] {
        self.matrix.row(self.vocab.lookup(token))
    }
}

/// Vocabulary over headline and body tokens with a seeded random table.
pub fn build_vocab(
    corpus: &[DatasetRecord],
    min_count: usize,
    dim: usize,
    seed: u64,
) -> Result<WordEmbeddingTable> {
    if min_count == 0 {
        return Err(Error::Config("min-count must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in corpus {
        for t in r.all_tokens() {
            *counts.entry(t).or_default() += 1;
        }
    }
    let words = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count && t != BOS_TOKEN && t != EOS_TOKEN && t != PAD_TOKEN && t != UNK_TOKEN)
        .map(|(t, _)| t.to_string());
    let vocab = Vocab::words(words);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = Tensor::zeros(&[vocab.len(), dim]);
    for r in 1..vocab.len() {
        for v in matrix.row_mut(r) {
            *v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
        }
    }
    Ok(WordEmbeddingTable {
        vocab,
        matrix,
        mode: EmbeddingMode::RandomTrainable,
    })
}

/// Reads `token f1 .. fd` lines. UNK becomes the mean of all loaded rows.
pub fn load_pretrained(path: &Path, expected_dim: usize, trainable: bool) -> Result<WordEmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, reason: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut words = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if values.len() != expected_dim {
            if i == 0 && values.len() == 1 && token.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
                // word2vec-style "count dim" header
                let dim: usize = values[0].parse().expect("checked");
                if dim != expected_dim {
                    return Err(Error::EmbeddingDim {
                        expected: expected_dim,
                        found: dim,
                    });
                }
                continue;
            }
            return Err(malformed(
                i + 1,
                format!("expected {expected_dim} values, found {}", values.len()),
            ));
        }
        let row = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| malformed(i + 1, e.to_string()))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(malformed(i + 1, "non-finite value".into()));
        }
        if seen.insert(token.to_string(), i + 1).is_some() {
            return Err(malformed(i + 1, format!("duplicate token `{token}`")));
        }
        words.push(token.to_string());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("pretrained vector file"));
    }
    let mut mean = vec![0.0; expected_dim];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= rows.len() as f64;
    }
    let vocab = Vocab::words(words);
    let mut data = vec![0.0; expected_dim];
    data.extend(mean);
    data.extend(rows.into_iter().flatten());
    let matrix = Tensor::matrix(vocab.len(), expected_dim, data)?;
    Ok(WordEmbeddingTable {
        vocab,
        matrix,
        mode: if trainable {
            EmbeddingMode::PreloadedTrainable
        } else {
            EmbeddingMode::PreloadedFrozen
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatternEmbeddingTable {
    pub vocab: Vocab,
    pub matrix: Tensor,
    pub trainable: bool,
}

/// One row per distinct pattern string in `corpus` (sorted) plus the UNK-pattern row.
pub fn build_pattern_table(corpus: &[DatasetRecord], dim: usize, seed: u64) -> PatternEmbeddingTable {
    let mut names: Vec<String> = corpus
        .iter()
        .flat_map(|r| r.patterns.iter().map(|p| p.to_string()))
        .collect();
    names.sort();
    names.dedup();
    let vocab = Vocab::patterns(names);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..vocab.len() * dim)
        .map(|_| rng.gen_range(-INIT_RANGE..INIT_RANGE))
        .collect();
    PatternEmbeddingTable {
        matrix: Tensor::matrix(vocab.len(), dim, data).expect("non-empty"),
        vocab,
        trainable: true,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryMode {
    /// Training: the replicated record's active cardinal.
    Active,
    /// Inference: mean over all of the record's cardinals.
    MeanPool,
}

/// Sum of the embeddings of all headline tokens.
pub fn headline_vector<'a>(tokens: impl IntoIterator<Item = &'a str>, table: &WordEmbeddingTable) -> Tensor {
    let mut out = vec![0.0; table.dim()];
    let mut any = false;
    for t in tokens {
        any = true;
        for (o, v) in out.iter_mut().zip(table.row(t)) {
            *o += v;
        }
    }
    if !any {
        log::warn!("empty headline; headline query is the zero vector");
    }
    Tensor::vector(out)
}

/// Sum of the three word embeddings; sentinels contribute zero.
pub fn cardinal_phrase_vector(phrase: &CardinalPhrase, table: &WordEmbeddingTable) -> Tensor {
    headline_vector(phrase.words(), table)
}

pub fn pattern_query(record: &DatasetRecord, table: &PatternEmbeddingTable, mode: QueryMode) -> Result<Tensor> {
    if record.patterns.is_empty() {
        return Err(Error::NoCardinal(record.id.clone()));
    }
    let row = |i: usize| table.matrix.row(table.vocab.lookup(&record.patterns[i].to_string()));
    match mode {
        QueryMode::Active => {
            let i = record
                .active_cardinal
                .ok_or_else(|| Error::NoActiveCardinal(record.id.clone()))?;
            if i >= record.patterns.len() {
                return Err(Error::NoActiveCardinal(record.id.clone()));
            }
            Ok(Tensor::vector(row(i).to_vec()))
        }
        QueryMode::MeanPool => {
            let k = record.patterns.len();
            let mut out = vec![0.0; table.matrix.cols()];
            for i in 0..k {
                for (o, v) in out.iter_mut().zip(row(i)) {
                    *o += v;
                }
            }
            for o in &mut out {
                *o /= k as f64;
            }
            Ok(Tensor::vector(out))
        }
    }
}

/// Embedding row as a graph leaf; the zero row becomes a constant so it never
/// receives gradient.
pub fn row_node(
    g: &mut Graph,
    store: &ParamStore,
    matrix: ParamId,
    vocab: &Vocab,
    row: usize,
) -> Result<NodeId> {
    if vocab.pad() == Some(row) {
        let dim = store.value(matrix).cols();
        return Ok(g.zeros(dim));
    }
    g.param_row(store, matrix, row)
}

/// Graph form of a sum of embedding rows; empty input gives the zero vector.
pub fn sum_rows_node(
    g: &mut Graph,
    store: &ParamStore,
    matrix: ParamId,
    vocab: &Vocab,
    rows: &[usize],
) -> Result<NodeId> {
    let nodes = rows
        .iter()
        .map(|&r| row_node(g, store, matrix, vocab, r))
        .collect::<Result<Vec<_>>>()?;
    if nodes.is_empty() {
        return Ok(g.zeros(store.value(matrix).cols()));
    }
    g.sum_vectors(&nodes)
}

/// Graph form of the mean of embedding rows.
pub fn mean_rows_node(
    g: &mut Graph,
    store: &ParamStore,
    matrix: ParamId,
    vocab: &Vocab,
    rows: &[usize],
) -> Result<NodeId> {
    if rows.is_empty() {
        return Err(Error::EmptySequence);
    }
    let nodes = rows
        .iter()
        .map(|&r| row_node(g, store, matrix, vocab, r))
        .collect::<Result<Vec<_>>>()?;
    if nodes.len() == 1 {
        return Ok(nodes[0]);
    }
    g.mean_vectors(&nodes)
}

/// Pattern embeddings as TSV: pattern string followed by its values.
pub fn pattern_embedding_tsv(vocab: &Vocab, matrix: &Tensor) -> String {
    let mut out = String::new();
    for (i, name) in vocab.tokens().iter().enumerate() {
        out.push_str(name);
        for v in matrix.row(i) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

/// Per-pattern label counts over a training set, indexed by [`Label::index`].
pub fn pattern_label_counts(records: &[DatasetRecord]) -> BTreeMap<String, [usize; 2]> {
    let mut counts: BTreeMap<String, [usize; 2]> = BTreeMap::new();
    for r in records {
        for p in &r.patterns {
            counts.entry(p.to_string()).or_default()[r.label.index()] += 1;
        }
    }
    counts
}

/// `pattern, majority label, congruent count, incongruent count`; ties read `tie`.
pub fn pattern_majority_tsv(counts: &BTreeMap<String, [usize; 2]>) -> String {
    let mut out = String::from("pattern\tmajority_label\tcongruent\tincongruent\n");
    for (p, c) in counts {
        let label = match c[0].cmp(&c[1]) {
            std::cmp::Ordering::Greater => Label::Congruent.as_str(),
            std::cmp::Ordering::Less => Label::Incongruent.as_str(),
            std::cmp::Ordering::Equal => "tie",
        };
        let _ = writeln!(out, "{p}\t{label}\t{}\t{}", c[0], c[1]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{CardinalPattern, TaggedToken};

    fn record(headline: &[&str], body: &[&[&str]], patterns: &[&str]) -> DatasetRecord {
        let tag = |t: &&str| TaggedToken::new(*t, "NN");
        DatasetRecord {
            id: "r".into(),
            label: Label::Congruent,
            headline: headline.iter().map(tag).collect(),
            body: body.iter().map(|s| s.iter().map(tag).collect()).collect(),
            patterns: patterns.iter().map(|p| p.parse().unwrap()).collect(),
            phrases: patterns.iter().map(|_| CardinalPhrase::new("a", "1", "b")).collect(),
            active_cardinal: None,
        }
    }

    fn table(rows: &[(&str, Vec<f64>)]) -> WordEmbeddingTable {
        let vocab = Vocab::words(rows.iter().map(|(t, _)| t.to_string()));
        let d = rows[0].1.len();
        let mut data = vec![0.0; d];
        data.extend(vec![0.5; d]);
        for (_, r) in rows {
            data.extend(r);
        }
        WordEmbeddingTable {
            matrix: Tensor::matrix(vocab.len(), d, data).unwrap(),
            vocab,
            mode: EmbeddingMode::RandomTrainable,
        }
    }

    #[test]
    fn vocab_min_count() {
        let corpus = vec![record(&["a", "a"], &[&["b"]], &["NN:CD:EOS"])];
        let t = build_vocab(&corpus, 2, 4, 1).unwrap();
        let mut toks = t.vocab.tokens().to_vec();
        toks.sort();
        assert_eq!(toks, vec!["<pad>", "<unk>", "a"]);
        assert_eq!(t.vocab.lookup("b"), UNK);
        assert!(t.matrix.row(PAD).iter().all(|&v| v == 0.0));
        assert!(t.matrix.data().iter().all(|v| v.abs() <= INIT_RANGE));
    }

    #[test]
    fn vocab_errors_and_determinism() {
        assert!(matches!(build_vocab(&[], 1, 4, 0), Err(Error::EmptyCorpus)));
        let corpus = vec![record(&["x", "y"], &[&["z"]], &["NN:CD:EOS"])];
        assert!(matches!(build_vocab(&corpus, 0, 4, 0), Err(Error::Config(_))));
        let a = build_vocab(&corpus, 1, 8, 42).unwrap();
        let b = build_vocab(&corpus, 1, 8, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.matrix, build_vocab(&corpus, 1, 8, 43).unwrap().matrix);
    }

    #[test]
    fn vocab_serde_rebuilds_index() {
        let v = Vocab::words(["x".to_string(), "y".to_string()]);
        let back: Vocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.lookup("y"), 3);
    }

    #[test]
    fn sentinels_map_to_zero_row() {
        let t = table(&[("five", vec![1.0, 0.0]), ("ways", vec![0.0, 2.0])]);
        assert_eq!(t.vocab.lookup(BOS_TOKEN), PAD);
        assert_eq!(t.vocab.lookup(EOS_TOKEN), PAD);
        let v = cardinal_phrase_vector(&CardinalPhrase::new("<bos>", "five", "ways"), &t);
        assert_eq!(v.data(), &[1.0, 2.0]);
    }

    #[test]
    fn headline_vector_cases() {
        let t = table(&[("loan", vec![1.0, 0.0]), ("1", vec![0.0, 2.0]), ("million", vec![0.25, 0.25])]);
        assert_eq!(headline_vector(["loan"], &t).data(), t.row("loan"));
        assert_eq!(headline_vector(["loan", "1"], &t).data(), &[1.0, 2.0]);
        let a = headline_vector(["loan", "1", "million", "zzz"], &t);
        let b = headline_vector(["zzz", "million", "loan", "1"], &t);
        assert_eq!(a, b);
        // unseen token contributes the UNK row
        assert_eq!(a.data(), &[1.0 + 0.25 + 0.5, 2.0 + 0.25 + 0.5]);
        assert_eq!(headline_vector([], &t).data(), &[0.0, 0.0]);
        let p = cardinal_phrase_vector(&CardinalPhrase::new("loan", "1", "million"), &t);
        assert_eq!(p.data(), &[1.25, 2.25]);
    }

    #[test]
    fn pretrained_file_roundtrip_and_unk_mean() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        std::fs::write(&p, "a 1 2 3 4\nb 0 0 0 0\nc -1 2 0.5 8\n").unwrap();
        let t = load_pretrained(&p, 4, false).unwrap();
        assert_eq!(t.vocab.len(), 5);
        assert_eq!(t.mode, EmbeddingMode::PreloadedFrozen);
        assert_eq!(t.row("a"), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.row("c"), &[-1.0, 2.0, 0.5, 8.0]);
        let mean: Vec<f64> = (0..4)
            .map(|k| (t.row("a")[k] + t.row("b")[k] + t.row("c")[k]) / 3.0)
            .collect();
        assert_eq!(t.row("never-seen"), mean.as_slice());
        assert!(t.matrix.row(PAD).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pretrained_malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        std::fs::write(&p, "a 1 2 3 4\nb 1 2 3\n").unwrap();
        match load_pretrained(&p, 4, true) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "2 3\na 1 2 3\n").unwrap();
        assert!(matches!(load_pretrained(&p, 4, true), Err(Error::EmbeddingDim { expected: 4, found: 3 })));
    }

    #[test]
    fn pattern_query_modes() {
        let corpus = vec![record(&["x"], &[&["y"]], &["NN:CD:JJ", "BOS:CD:NN"])];
        let mut t = build_pattern_table(&corpus, 3, 5);
        assert_eq!(t.vocab.tokens(), &["<unk-pattern>", "BOS:CD:NN", "NN:CD:JJ"]);
        t.matrix.row_mut(1).copy_from_slice(&[0.0, 1.0, 1.0]);
        t.matrix.row_mut(2).copy_from_slice(&[2.0, 3.0, 1.0]);
        let mut r = corpus[0].clone();
        let mean = pattern_query(&r, &t, QueryMode::MeanPool).unwrap();
        assert_eq!(mean.data(), &[1.0, 2.0, 1.0]);
        assert!(matches!(pattern_query(&r, &t, QueryMode::Active), Err(Error::NoActiveCardinal(_))));
        r.active_cardinal = Some(1);
        assert_eq!(pattern_query(&r, &t, QueryMode::Active).unwrap().data(), &[0.0, 1.0, 1.0]);

        let single = DatasetRecord {
            patterns: vec![CardinalPattern::new("NN", "JJ")],
            active_cardinal: Some(0),
            ..r.clone()
        };
        assert_eq!(
            pattern_query(&single, &t, QueryMode::Active).unwrap(),
            pattern_query(&single, &t, QueryMode::MeanPool).unwrap()
        );

        let unseen = DatasetRecord {
            patterns: vec![CardinalPattern::new("VBD", "NNS")],
            ..single.clone()
        };
        assert_eq!(pattern_query(&unseen, &t, QueryMode::MeanPool).unwrap().data(), t.matrix.row(0));

        let repeated = DatasetRecord {
            patterns: vec![CardinalPattern::new("NN", "JJ"); 3],
            ..single.clone()
        };
        assert_eq!(
            pattern_query(&repeated, &t, QueryMode::MeanPool).unwrap(),
            pattern_query(&single, &t, QueryMode::MeanPool).unwrap()
        );

        let none = DatasetRecord {
            patterns: vec![],
            ..single
        };
        assert!(matches!(pattern_query(&none, &t, QueryMode::MeanPool), Err(Error::NoCardinal(_))));
    }

    #[test]
    fn pattern_init_range() {
        let corpus = vec![record(&["x"], &[&["y"]], &["NN:CD:JJ"])];
        let t = build_pattern_table(&corpus, PATTERN_DIM, 9);
        assert_eq!(t.matrix.shape(), &[2, 100]);
        assert!(t.matrix.data().iter().all(|v| v.abs() <= INIT_RANGE));
    }

    #[test]
    fn majority_labels() {
        let mut a = record(&["x"], &[&["y"]], &["NN:CD:JJ"]);
        let mut b = a.clone();
        b.label = Label::Incongruent;
        let mut c = b.clone();
        c.patterns.push(CardinalPattern::new("BOS", "NN"));
        a.patterns.push(CardinalPattern::new("BOS", "NN"));
        let counts = pattern_label_counts(&[a, b, c]);
        let tsv = pattern_majority_tsv(&counts);
        assert!(tsv.contains("NN:CD:JJ\tincongruent\t1\t2"));
        assert!(tsv.contains("BOS:CD:NN\ttie\t1\t1"));
    }
}
