//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any gating criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use poshan_core::batch::{make_batches, DocTensor, Limits, MAX_SENTENCES, MAX_WORDS};
use poshan_core::embeddings::{build_pattern_table, build_vocab, QueryMode, PATTERN_DIM};
use poshan_core::eval::predict;
use poshan_core::gradcheck::GradCheckConfig;
use poshan_core::graph::Graph;
use poshan_core::metrics::{macro_f1, roc_auc};
use poshan_core::synthetic::{synthetic_corpus, SyntheticConfig};
use poshan_core::text::io::{read_corpus, read_sidecar};
use poshan_core::text::{
    derive_dataset, extract_cardinal_features, Label, TagProvider, TaggedToken, CARDINAL_TAG, PENN_TAGS,
};
use poshan_core::toy::{gradient_suite, toy_config, toy_network, toy_record};
use poshan_core::train::{log_tsv, train, TrainConfig, BATCH_SIZE, GRAD_CLIP, LEARNING_RATE, MAX_EPOCHS, PATIENCE};
use poshan_core::{DatasetRecord, ModelConfig, ModelKind, Network, ParamStore};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
    /// A comparison that is reported either way and does not gate the run.
    Report { holds: bool, detail: String },
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// ---------------------------------------------------------------- 1

fn gradient_suite_all_models() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut groups = 0;
    for kind in [ModelKind::Poshan, ModelKind::Lstm, ModelKind::Posat] {
        match gradient_suite(&toy_config(kind), 7, &GradCheckConfig::default()) {
            Ok(report) => {
                worst = worst.max(report.max_rel_error());
                groups += report.params.len();
                failures.extend(report.failures().map(|p| format!("{kind}:{}={:.2e}", p.name, p.max_rel_error)));
            }
            Err(e) => failures.push(format!("{kind}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    check(
        failures.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "{groups} parameter groups, max rel error {worst:.2e} (limit 1e-4), {:.1}s (limit 60s){}",
            elapsed.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!(", failing: {}", failures.join(" ")) }
        ),
    )
}

// ---------------------------------------------------------------- 2

fn random_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    loop {
        let config = ModelConfig {
            kind: ModelKind::Poshan,
            word_dim: rng.gen_range(2..6),
            hidden: rng.gen_range(1..4),
            attention_dim: Some(rng.gen_range(1..5)),
            pattern_dim: rng.gen_range(2..5),
            disable_pattern_att: rng.gen_bool(0.2),
            disable_phrase_att: rng.gen_bool(0.2),
            replace_headline_att_with_encoder: rng.gen_bool(0.2),
            ..ModelConfig::default()
        };
        if config.validate().is_ok() {
            return config;
        }
    }
}

/// Checks one attention level: each component is a simplex over unmasked
/// positions with exact zeros elsewhere, and the fused vector is their mean.
fn level_ok(w: &poshan_core::model::AttentionWeights, mask: &[bool]) -> Result<(), String> {
    let comps = w.components();
    for v in comps.iter().copied().chain([w.fused.as_slice()]) {
        if v.len() != mask.len() {
            return Err(format!("length {} for mask {}", v.len(), mask.len()));
        }
        let sum: f64 = v.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| x).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(format!("sum {sum}"));
        }
        if v.iter().zip(mask).any(|(&x, &m)| (m && x < 0.0) || (!m && x != 0.0)) {
            return Err(format!("bad entry in {v:?} for mask {mask:?}"));
        }
    }
    if !comps.is_empty() {
        let k = comps.len() as f64;
        for i in 0..mask.len() {
            let mean = comps.iter().map(|c| c[i]).sum::<f64>() / k;
            if mean.to_bits() != w.fused[i].to_bits() {
                return Err(format!("fused {} != mean {mean}", w.fused[i]));
            }
        }
    }
    Ok(())
}

fn attention_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut forwards = 0;
    let mut vectors = 0;
    let mut padded = 0;
    let mut degraded = 0;
    while forwards < 1000 {
        let config = random_config(&mut rng);
        let mut records = synthetic_corpus(&SyntheticConfig {
            records: 4,
            seed: rng.gen(),
            min_sentences: 1,
            max_sentences: 4,
            min_words: 1,
            max_words: 5,
        });
        let words = build_vocab(&records, 1, config.word_dim, rng.gen()).unwrap();
        let patterns = build_pattern_table(&records, config.pattern_dim, rng.gen());
        let (net, store) = Network::new(&config, &words, Some(&patterns), rng.gen()).unwrap();
        if rng.gen_bool(0.2) {
            records[0].patterns.clear();
            records[0].phrases.clear();
        }
        let docs: Vec<DocTensor> = records
            .iter()
            .map(|r| DocTensor::from_record(r, &net.vocab, &net.patterns, Limits::default()))
            .collect();
        for batch in make_batches(docs, 4, Some(rng.gen())) {
            for doc in &batch.docs {
                let mut g = Graph::new();
                let f = match net.forward(&store, &mut g, doc, QueryMode::MeanPool) {
                    Ok(f) => f,
                    Err(e) => return Outcome::Fail(format!("forward error: {e}")),
                };
                let trace = f.trace.expect("poshan trace").read(&g);
                let live: Vec<bool> = trace.words.iter().map(Option::is_some).collect();
                let sentence_mask: Vec<bool> =
                    doc.word_mask.iter().zip(&doc.sentence_mask).map(|(m, &s)| s && m.iter().any(|&x| x)).collect();
                if live != sentence_mask {
                    return Outcome::Fail("trace sentences disagree with the mask".into());
                }
                for (w, mask) in trace.words.iter().zip(&doc.word_mask) {
                    if let Some(w) = w {
                        if let Err(e) = level_ok(w, mask) {
                            return Outcome::Fail(format!("forward {forwards}, word level: {e}"));
                        }
                        vectors += w.components().len() + 1;
                        padded += mask.iter().filter(|&&m| !m).count();
                    }
                }
                if let Err(e) = level_ok(&trace.sentences, &sentence_mask) {
                    return Outcome::Fail(format!("forward {forwards}, sentence level: {e}"));
                }
                vectors += trace.sentences.components().len() + 1;
                degraded += usize::from(doc.patterns.is_empty());
                forwards += 1;
            }
        }
    }
    Outcome::Pass(format!(
        "{forwards} forwards, {vectors} weight vectors, {padded} padded positions exactly 0, {degraded} pattern-less docs"
    ))
}

// ---------------------------------------------------------------- 3

/// Plain-vector transcription of the POSHAN forward pass, reading parameters
/// by name. Shares no code with the graph engine.
struct Oracle<'a> {
    store: &'a ParamStore,
    net: &'a Network,
}

type V = Vec<f64>;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn add(a: &[f64], b: &[f64]) -> V {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn softmax(x: &[f64]) -> V {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: V = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

impl Oracle<'_> {
    fn p(&self, name: &str) -> &poshan_core::Tensor {
        self.store.value(self.store.id(name).unwrap_or_else(|_| panic!("missing {name}")))
    }

    fn mv(&self, name: &str, x: &[f64]) -> V {
        let w = self.p(name);
        (0..w.rows()).map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    fn vecp(&self, name: &str) -> V {
        self.p(name).data().to_vec()
    }

    fn word(&self, token: &str) -> V {
        let id = self.net.vocab.lookup(token);
        let m = self.p("embedding.words");
        if Some(id) == self.net.vocab.pad() {
            vec![0.0; m.cols()]
        } else {
            m.row(id).to_vec()
        }
    }

    fn sum_words(&self, tokens: &[&str]) -> V {
        let d = self.p("embedding.words").cols();
        tokens.iter().fold(vec![0.0; d], |acc, t| add(&acc, &self.word(t)))
    }

    fn gate(&self, prefix: &str, x: &[f64], h: &[f64]) -> V {
        let wx = self.mv(&format!("{prefix}.w"), x);
        let uh = self.mv(&format!("{prefix}.u"), h);
        let b = self.vecp(&format!("{prefix}.b"));
        (0..b.len()).map(|i| wx[i] + b[i] + uh[i]).collect()
    }

    fn lstm_dir(&self, prefix: &str, xs: &[V]) -> Vec<V> {
        let hdim = self.p(&format!("{prefix}.input.b")).len();
        let (mut h, mut c) = (vec![0.0; hdim], vec![0.0; hdim]);
        let mut out = Vec::new();
        for x in xs {
            let i: V = self.gate(&format!("{prefix}.input"), x, &h).into_iter().map(sigmoid).collect();
            let f: V = self.gate(&format!("{prefix}.forget"), x, &h).into_iter().map(sigmoid).collect();
            let o: V = self.gate(&format!("{prefix}.output"), x, &h).into_iter().map(sigmoid).collect();
            let g: V = self.gate(&format!("{prefix}.candidate"), x, &h).into_iter().map(f64::tanh).collect();
            c = (0..hdim).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
            h = (0..hdim).map(|k| o[k] * c[k].tanh()).collect();
            out.push(h.clone());
        }
        out
    }

    fn bilstm(&self, prefix: &str, xs: &[V]) -> Vec<V> {
        let fwd = self.lstm_dir(&format!("{prefix}.fwd"), xs);
        let rev: Vec<V> = xs.iter().rev().cloned().collect();
        let mut bwd = self.lstm_dir(&format!("{prefix}.bwd"), &rev);
        bwd.reverse();
        fwd.into_iter().zip(bwd).map(|(f, b)| [f, b].concat()).collect()
    }

    fn attention(&self, prefix: &str, states: &[V], query: &[f64]) -> V {
        let q = add(&self.mv(&format!("{prefix}.w_query"), query), &self.vecp(&format!("{prefix}.b")));
        let v = self.vecp(&format!("{prefix}.v"));
        let scores: V = states
            .iter()
            .map(|s| {
                let pre = add(&self.mv(&format!("{prefix}.w_state"), s), &q);
                pre.iter().zip(&v).map(|(p, vv)| vv * p.tanh()).sum()
            })
            .collect();
        softmax(&scores)
    }

    fn fused(&self, level: &str, states: &[V], queries: &[(&str, V)]) -> V {
        let comps: Vec<V> = queries
            .iter()
            .map(|(kind, q)| self.attention(&format!("{level}_att.{kind}"), states, q))
            .collect();
        (0..states.len()).map(|i| comps.iter().map(|c| c[i]).sum::<f64>() / comps.len() as f64).collect()
    }

    fn pool(weights: &[f64], states: &[V]) -> V {
        let d = states[0].len();
        (0..d).map(|k| weights.iter().zip(states).map(|(w, s)| w * s[k]).sum()).collect()
    }

    /// Returns (document vector, [P(congruent), P(incongruent)]).
    fn forward(&self, record: &DatasetRecord, active: Option<usize>) -> (V, V) {
        let pat_matrix = self.p("embedding.patterns");
        let pat_row = |i: usize| pat_matrix.row(self.net.patterns.lookup(&record.patterns[i].to_string())).to_vec();
        let phrase = |i: usize| self.sum_words(&record.phrases[i].words());
        let k = record.patterns.len();
        let mean = |vs: Vec<V>| -> V {
            let n = vs.len() as f64;
            let mut acc = vec![0.0; vs[0].len()];
            for v in &vs {
                acc = add(&acc, v);
            }
            acc.iter().map(|x| x / n).collect()
        };
        let (pq, cq) = match active {
            Some(a) => (pat_row(a), phrase(a)),
            None => (mean((0..k).map(pat_row).collect()), mean((0..k).map(phrase).collect())),
        };
        let headline: Vec<&str> = record.headline.iter().map(|t| t.text.as_str()).collect();
        let hq = self.sum_words(&headline);
        let queries = [("pattern", pq), ("phrase", cq), ("headline", hq)];

        let sentence_vecs: Vec<V> = record
            .body
            .iter()
            .map(|s| {
                let xs: Vec<V> = s.iter().map(|t| self.word(&t.text)).collect();
                let states = self.bilstm("word_encoder", &xs);
                let alpha = self.fused("word", &states, &queries);
                Self::pool(&alpha, &states)
            })
            .collect();
        let states = self.bilstm("sentence_encoder", &sentence_vecs);
        let beta = self.fused("sentence", &states, &queries);
        let d = Self::pool(&beta, &states);
        let logits = add(&self.mv("head.w", &d), &self.vecp("head.b"));
        (d, softmax(&logits))
    }
}

fn brute_macro_f1(pred: &[Label], gold: &[Label]) -> f64 {
    let mut m = [[0usize; 2]; 2];
    for (p, g) in pred.iter().zip(gold) {
        m[g.index()][p.index()] += 1;
    }
    let mut total = 0.0;
    for c in 0..2 {
        let tp = m[c][c];
        let fp = m[1 - c][c];
        let fn_ = m[c][1 - c];
        if 2 * tp + fp + fn_ > 0 {
            total += (2 * tp) as f64 / (2 * tp + fp + fn_) as f64;
        }
    }
    total / 2.0
}

fn brute_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate() {
            if *li == Label::Incongruent && *lj == Label::Congruent {
                pairs += 1;
                twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

fn oracle_equivalence() -> Outcome {
    let record = toy_record();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let (net, store, doc) = toy_network(&toy_config(ModelKind::Poshan), seed).unwrap();
        let oracle = Oracle { store: &store, net: &net };
        for (mode, active) in [(QueryMode::Active, record.active_cardinal), (QueryMode::MeanPool, None)] {
            let mut g = Graph::new();
            let f = net.forward(&store, &mut g, &doc, mode).unwrap();
            let p = net.probabilities(&store, &doc, mode).unwrap();
            let (d, q) = oracle.forward(&record, active);
            let got = g.value(f.doc).data();
            for (a, b) in got.iter().zip(&d).chain(p.iter().zip(&q)) {
                worst = worst.max((a - b).abs());
            }
            if got.len() != d.len() {
                return Outcome::Fail(format!("document width {} vs {}", got.len(), d.len()));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..16);
        let gold: Vec<Label> = (0..n).map(|_| Label::from_index(rng.gen_range(0..2))).collect();
        let pred: Vec<Label> = (0..n).map(|_| Label::from_index(rng.gen_range(0..2))).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
        if macro_f1(&pred, &gold).unwrap() != brute_macro_f1(&pred, &gold) {
            mismatches += 1;
        }
        match roc_auc(&scores, &gold) {
            Ok(a) if a != brute_auc(&scores, &gold) => mismatches += 1,
            Err(_) if gold.iter().any(|&l| l != gold[0]) => mismatches += 1,
            _ => {}
        }
    }
    check(
        worst <= 1e-10 && mismatches == 0,
        format!("forward max abs diff {worst:.2e} (limit 1e-10) over 5 seeds x 2 modes; metric mismatches {mismatches}/1000"),
    )
}

// ---------------------------------------------------------------- 4

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn feature_pipeline() -> Outcome {
    let raw = read_corpus(&fixture("derive10_corpus.jsonl")).unwrap();
    let side = read_sidecar(&fixture("derive10_tags.jsonl")).unwrap();
    // filter oracle straight from the sidecar file
    let expected_kept: Vec<String> = raw
        .iter()
        .filter(|r| side.get(&r.id).unwrap().headline_tags.iter().any(|t| t == "CD"))
        .map(|r| r.id.clone())
        .collect();
    let (records, summary) = derive_dataset(&raw, &TagProvider::Sidecar(side)).unwrap();
    let kept: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let hand_patterns: &[(&str, &[&str])] = &[
        ("r01", &["VBZ:CD:CD", "CD:CD:EOS"]),
        ("r03", &["BOS:CD:NNS"]),
        ("r04", &["BOS:CD:NNS"]),
        ("r06", &["VBP:CD:NN"]),
        ("r08", &["VBZ:CD:IN", "IN:CD:EOS"]),
        ("r09", &["BOS:CD:VBP"]),
    ];
    let patterns_ok = hand_patterns.iter().all(|(id, pats)| {
        records
            .iter()
            .find(|r| r.id == *id)
            .is_some_and(|r| r.patterns.iter().map(|p| p.to_string()).collect::<Vec<_>>() == *pats)
    });
    let r01 = records.iter().find(|r| r.id == "r01").unwrap();
    let phrases_ok = r01.phrases.iter().map(|p| p.words().join(" ")).collect::<Vec<_>>()
        == ["hits 1 million", "1 million <eos>"];
    let summary_ok = summary.kept == [3, 3] && summary.dropped == [2, 2];

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    let mut cds = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..12);
        let headline: Vec<TaggedToken> = (0..n)
            .map(|i| {
                let tag = if rng.gen_bool(0.3) { CARDINAL_TAG } else { PENN_TAGS.choose(&mut rng).unwrap() };
                TaggedToken::new(format!("w{i}"), tag)
            })
            .collect();
        let count = headline.iter().filter(|t| t.pos == CARDINAL_TAG).count();
        cds += count;
        let (p, ph) = extract_cardinal_features(&headline);
        if p.len() != count || ph.len() != count {
            bad += 1;
        }
    }
    check(
        kept == expected_kept && patterns_ok && phrases_ok && summary_ok && bad == 0,
        format!(
            "fixture kept {:?}, summary kept {:?} dropped {:?}; patterns match hand list: {patterns_ok}; \
             {bad}/1000 synthetic headlines with a count mismatch ({cds} cardinals)",
            kept, summary.kept, summary.dropped
        ),
    )
}

// ---------------------------------------------------------------- 5

fn sanity_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        word_dim: 16,
        hidden_size: 8,
        pattern_dim: 8,
        batch_size: 8,
        max_epochs: 200,
        early_stop_patience: 200,
        ..TrainConfig::default()
    }
}

fn accuracy(report: &poshan_core::EvalReport) -> f64 {
    report.predictions.iter().filter(|p| p.predicted == p.label).count() as f64 / report.records as f64
}

fn learning_sanity() -> Outcome {
    let start = Instant::now();
    let data = synthetic_corpus(&SyntheticConfig { records: 64, seed: 1, ..SyntheticConfig::default() });
    let config = sanity_config(1);
    let first = train(&config, &data, &data).unwrap();
    let second = train(&config, &data, &data).unwrap();
    let deterministic = first.checkpoint.to_bytes().unwrap() == second.checkpoint.to_bytes().unwrap();
    let acc = accuracy(&predict(&first.checkpoint, &data).unwrap());
    let elapsed = start.elapsed();
    check(
        acc >= 0.95 && deterministic && elapsed < Duration::from_secs(300),
        format!(
            "train accuracy {acc:.3} (need 0.95) at best epoch {} of {}; deterministic {deterministic}; {:.1}s for two runs",
            first.checkpoint.epoch,
            first.log.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn ablation_comparison() -> Outcome {
    let mut full = Vec::new();
    let mut headline_only = Vec::new();
    for seed in 0..5u64 {
        let all = synthetic_corpus(&SyntheticConfig { records: 360, seed: 100 + seed, ..SyntheticConfig::default() });
        let (train_set, rest) = all.split_at(200);
        let (val, test) = rest.split_at(60);
        let test = &test[..100];
        let base = TrainConfig { max_epochs: 60, early_stop_patience: 10, ..sanity_config(seed) };
        let ablated = TrainConfig { disable_pattern_att: true, disable_phrase_att: true, ..base.clone() };
        for (config, scores) in [(base, &mut full), (ablated, &mut headline_only)] {
            let out = train(&config, train_set, val).unwrap();
            scores.push(predict(&out.checkpoint, test).unwrap().macro_f1);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&full), mean(&headline_only));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
    Outcome::Report {
        holds: a >= b,
        detail: format!(
            "mean test macro-F1 full {a:.3} [{}] vs headline-only {b:.3} [{}]",
            fmt(&full),
            fmt(&headline_only)
        ),
    }
}

// ---------------------------------------------------------------- 6

fn determinism() -> Outcome {
    let data = synthetic_corpus(&SyntheticConfig { records: 40, seed: 6, ..SyntheticConfig::default() });
    let mut ok = true;
    for model in [ModelKind::Poshan, ModelKind::Lstm, ModelKind::Posat] {
        let config = TrainConfig {
            model,
            seed: 6,
            word_dim: 8,
            hidden_size: 4,
            pattern_dim: 6,
            batch_size: 8,
            max_epochs: 3,
            ..TrainConfig::default()
        };
        let a = train(&config, &data[..30], &data[30..]).unwrap();
        let b = train(&config, &data[..30], &data[30..]).unwrap();
        ok &= log_tsv(&a.log) == log_tsv(&b.log);
        ok &= a.checkpoint.to_bytes().unwrap() == b.checkpoint.to_bytes().unwrap();
    }
    check(ok, "logs and checkpoint bytes identical across two runs for poshan, lstm, posat".into())
}

// ---------------------------------------------------------------- 7

fn defaults() -> Outcome {
    let c = TrainConfig::default();
    let got = (
        c.learning_rate,
        c.batch_size,
        c.grad_clip,
        c.max_epochs,
        c.early_stop_patience,
        c.max_words_per_sentence,
        c.max_sentences,
        c.pattern_dim,
    );
    let want = (0.003, 128, 6.0, 50, 5, 45, 35, 100);
    let consts = (LEARNING_RATE, BATCH_SIZE, GRAD_CLIP, MAX_EPOCHS, PATIENCE, MAX_WORDS, MAX_SENTENCES, PATTERN_DIM);
    check(got == want && consts == want, format!("{got:?}"))
}

// ---------------------------------------------------------------- 8

fn corpus_counts() -> Outcome {
    let sets = [
        ("POSHAN_NELA17_CORPUS", "POSHAN_NELA17_TAGS", [7766, 6234]),
        ("POSHAN_CLICKBAIT_CORPUS", "POSHAN_CLICKBAIT_TAGS", [2681, 754]),
    ];
    let mut ran = Vec::new();
    let mut ok = true;
    for (corpus_var, tags_var, want) in sets {
        let (Ok(corpus), Ok(tags)) = (std::env::var(corpus_var), std::env::var(tags_var)) else {
            continue;
        };
        let raw = read_corpus(Path::new(&corpus)).unwrap();
        let side = read_sidecar(Path::new(&tags)).unwrap();
        let (_, summary) = derive_dataset(&raw, &TagProvider::Sidecar(side)).unwrap();
        ok &= summary.kept == want;
        ran.push(format!("{corpus_var}: kept {:?} want {:?}", summary.kept, want));
    }
    if ran.is_empty() {
        return Outcome::Skip("set POSHAN_NELA17_CORPUS/_TAGS or POSHAN_CLICKBAIT_CORPUS/_TAGS to run".into());
    }
    check(ok, ran.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 gradient suite", gradient_suite_all_models),
        ("2 attention invariants", attention_invariants),
        ("3 oracle equivalence", oracle_equivalence),
        ("4 feature pipeline", feature_pipeline),
        ("5a learning sanity", learning_sanity),
        ("5b full vs headline-only", ablation_comparison),
        ("6 determinism", determinism),
        ("7 defaults", defaults),
        ("8 corpus counts", corpus_counts),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
            Outcome::Report { holds: true, detail } => ("PASS", detail),
            Outcome::Report { holds: false, detail } => ("FAIL", format!("{detail}; report only, not gating")),
        };
        println!("{tag} [{name}] {detail} ({:.1}s)", start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
