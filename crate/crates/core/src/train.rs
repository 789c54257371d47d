//! Training configuration, Adam, gradient clipping and the epoch loop.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::PosatInit;
use crate::batch::{make_batches, DocTensor, Limits, MAX_SENTENCES, MAX_WORDS};
use crate::checkpoint::Checkpoint;
use crate::embeddings::{
    build_pattern_table, build_vocab, load_pretrained, pattern_label_counts, EmbeddingMode, QueryMode,
    DESK_WORD_DIM, PATTERN_DIM,
};
use crate::encoder::CellKind;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::macro_f1;
use crate::model::{ModelConfig, ModelKind, Network, DESK_HIDDEN};
use crate::params::{Gradients, ParamStore};
use crate::tensor::Tensor;
use crate::text::{replicate_corpus, DatasetRecord, Label};

pub const LEARNING_RATE: f64 = 0.003;
pub const BATCH_SIZE: usize = 128;
pub const GRAD_CLIP: f64 = 6.0;
pub const MAX_EPOCHS: usize = 50;
pub const PATIENCE: usize = 5;
pub const MIN_IMPROVEMENT: f64 = 1e-4;

/// Every training and architecture setting. Config files use the kebab-case
/// field names as keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub grad_clip: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub min_improvement: f64,
    pub max_words_per_sentence: usize,
    pub max_sentences: usize,
    pub seed: u64,
    pub model: ModelKind,
    pub word_dim: usize,
    pub hidden_size: usize,
    pub attention_dim: Option<usize>,
    pub pattern_dim: usize,
    pub cell: CellKind,
    pub disable_pattern_att: bool,
    pub disable_phrase_att: bool,
    pub replace_headline_att_with_encoder: bool,
    pub min_count: usize,
    pub embeddings: Option<PathBuf>,
    pub embedding_mode: EmbeddingMode,
    pub posat_init: PosatInit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: LEARNING_RATE,
            batch_size: BATCH_SIZE,
            grad_clip: GRAD_CLIP,
            max_epochs: MAX_EPOCHS,
            early_stop_patience: PATIENCE,
            min_improvement: MIN_IMPROVEMENT,
            max_words_per_sentence: MAX_WORDS,
            max_sentences: MAX_SENTENCES,
            seed: 0,
            model: ModelKind::Poshan,
            word_dim: DESK_WORD_DIM,
            hidden_size: DESK_HIDDEN,
            attention_dim: None,
            pattern_dim: PATTERN_DIM,
            cell: CellKind::LstmBi,
            disable_pattern_att: false,
            disable_phrase_att: false,
            replace_headline_att_with_encoder: false,
            min_count: 1,
            embeddings: None,
            embedding_mode: EmbeddingMode::RandomTrainable,
            posat_init: PosatInit::NearZero,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid value `{value}` for `{key}`"))),
    }
}

impl TrainConfig {
    /// Parses `key = value` lines; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = TrainConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "learning-rate" => self.learning_rate = parse(key, value)?,
            "batch-size" => self.batch_size = parse(key, value)?,
            "grad-clip" => self.grad_clip = parse(key, value)?,
            "max-epochs" => self.max_epochs = parse(key, value)?,
            "early-stop-patience" => self.early_stop_patience = parse(key, value)?,
            "min-improvement" => self.min_improvement = parse(key, value)?,
            "max-words-per-sentence" => self.max_words_per_sentence = parse(key, value)?,
            "max-sentences" => self.max_sentences = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "model" => self.model = parse(key, value)?,
            "word-dim" => self.word_dim = parse(key, value)?,
            "hidden-size" => self.hidden_size = parse(key, value)?,
            "attention-dim" => self.attention_dim = Some(parse(key, value)?),
            "pattern-dim" => self.pattern_dim = parse(key, value)?,
            "cell" => self.cell = parse(key, value)?,
            "disable-pattern-att" => self.disable_pattern_att = parse_bool(key, value)?,
            "disable-phrase-att" => self.disable_phrase_att = parse_bool(key, value)?,
            "replace-headline-att-with-encoder" => self.replace_headline_att_with_encoder = parse_bool(key, value)?,
            "min-count" => self.min_count = parse(key, value)?,
            "embeddings" => self.embeddings = Some(PathBuf::from(value)),
            "embedding-mode" => {
                self.embedding_mode = match value {
                    "preloaded-frozen" => EmbeddingMode::PreloadedFrozen,
                    "preloaded-trainable" => EmbeddingMode::PreloadedTrainable,
                    "random-trainable" => EmbeddingMode::RandomTrainable,
                    _ => return Err(Error::Config(format!("invalid value `{value}` for `{key}`"))),
                }
            }
            "posat-init" => self.posat_init = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch-size", self.batch_size),
            ("max-epochs", self.max_epochs),
            ("early-stop-patience", self.early_stop_patience),
            ("max-words-per-sentence", self.max_words_per_sentence),
            ("max-sentences", self.max_sentences),
            ("min-count", self.min_count),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.grad_clip > 0.0 && self.min_improvement >= 0.0) {
            return Err(Error::Config("learning-rate and grad-clip must be positive".into()));
        }
        let preloaded = self.embedding_mode != EmbeddingMode::RandomTrainable;
        if preloaded != self.embeddings.is_some() {
            return Err(Error::Config(
                "preloaded embedding modes need `embeddings`, random-trainable must not set it".into(),
            ));
        }
        self.model_config().validate()
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            kind: self.model,
            word_dim: self.word_dim,
            hidden: self.hidden_size,
            attention_dim: self.attention_dim,
            pattern_dim: self.pattern_dim,
            cell: self.cell,
            embedding_mode: self.embedding_mode,
            disable_pattern_att: self.disable_pattern_att,
            disable_phrase_att: self.disable_phrase_att,
            replace_headline_att_with_encoder: self.replace_headline_att_with_encoder,
            posat_init: self.posat_init,
        }
    }

    pub fn limits(&self) -> Limits {
        Limits {
            max_words: self.max_words_per_sentence,
            max_sentences: self.max_sentences,
        }
    }

    /// Query mode used while fitting: the active cardinal for POSHAN.
    pub fn train_mode(&self) -> QueryMode {
        match self.model {
            ModelKind::Poshan => QueryMode::Active,
            _ => QueryMode::MeanPool,
        }
    }
}

/// Scales all gradients by `threshold / norm` when their global L2 norm
/// exceeds `threshold`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, threshold: f64) -> f64 {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let norm = grads.global_norm();
    if norm > threshold {
        grads.scale(threshold / norm);
    }
    norm
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, p)| Tensor::zeros_like(&p.value)).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update of every trainable parameter; untouched ones see a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            if !store.get(id).trainable {
                continue;
            }
            let g = grads.get(store, id);
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            let value = store.value_mut(id);
            for (((w, gi), mi), vi) in value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Per-record losses and the batch-mean gradient, reduced in record order.
pub fn batch_gradients(
    net: &Network,
    store: &ParamStore,
    docs: &[DocTensor],
    mode: QueryMode,
) -> Result<(Vec<f64>, Gradients)> {
    let per_record: Vec<(f64, Gradients)> = docs
        .par_iter()
        .map(|doc| {
            let mut g = Graph::new();
            let loss = net.loss(store, &mut g, doc, mode)?;
            let value = g.value(loss).item();
            Ok((value, g.backward(loss)?))
        })
        .collect::<Result<_>>()?;
    let mut total = Gradients::new();
    let mut losses = Vec::with_capacity(per_record.len());
    for (loss, grads) in &per_record {
        losses.push(*loss);
        total.merge(grads);
    }
    total.scale(1.0 / docs.len().max(1) as f64);
    Ok((losses, total))
}

/// Mean loss and macro-F1 of argmax predictions over `docs`.
pub fn evaluate_loss(net: &Network, store: &ParamStore, docs: &[DocTensor]) -> Result<(f64, f64)> {
    if docs.is_empty() {
        return Err(Error::EmptyInput("evaluation split"));
    }
    let out: Vec<(f64, Label)> = docs
        .par_iter()
        .map(|doc| {
            let mut g = Graph::new();
            let f = net.forward(store, &mut g, doc, QueryMode::MeanPool)?;
            let logits = g.value(f.logits).data().to_vec();
            let loss = g.softmax_cross_entropy(f.logits, doc.label.index())?;
            let pred = if logits[1] > logits[0] { Label::Incongruent } else { Label::Congruent };
            Ok((g.value(loss).item(), pred))
        })
        .collect::<Result<_>>()?;
    let loss = out.iter().map(|o| o.0).sum::<f64>() / docs.len() as f64;
    let preds: Vec<Label> = out.iter().map(|o| o.1).collect();
    let labels: Vec<Label> = docs.iter().map(|d| d.label).collect();
    Ok((loss, macro_f1(&preds, &labels)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
}

impl EpochLog {
    pub const HEADER: &'static str = "epoch\ttrain_loss\tval_loss\tval_macro_f1";

    pub fn tsv_line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.epoch, self.train_loss, self.val_loss, self.val_macro_f1)
    }
}

pub fn log_tsv(logs: &[EpochLog]) -> String {
    let mut out = format!("{}\n", EpochLog::HEADER);
    for l in logs {
        let _ = writeln!(out, "{}", l.tsv_line());
    }
    out
}

/// Updates a network in place one batch at a time.
pub struct Trainer<'a> {
    pub net: &'a Network,
    pub store: ParamStore,
    pub adam: Adam,
    pub clip: f64,
    pub mode: QueryMode,
}

impl<'a> Trainer<'a> {
    pub fn new(net: &'a Network, store: ParamStore, config: &TrainConfig) -> Self {
        Trainer {
            adam: Adam::new(&store, config.learning_rate),
            net,
            store,
            clip: config.grad_clip,
            mode: config.train_mode(),
        }
    }

    /// Returns the per-record losses before the update.
    pub fn step(&mut self, docs: &[DocTensor]) -> Result<Vec<f64>> {
        let (losses, mut grads) = batch_gradients(self.net, &self.store, docs, self.mode)?;
        if losses.iter().all(|l| l.is_finite()) && grads.all_finite() {
            clip_global_norm(&mut grads, self.clip);
            self.adam.step(&mut self.store, &grads);
        }
        Ok(losses)
    }
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

/// Fits a model, calling `on_epoch` after every epoch, and returns the
/// checkpoint with the lowest validation loss.
pub fn train_with<F>(config: &TrainConfig, train: &[DatasetRecord], val: &[DatasetRecord], mut on_epoch: F) -> Result<TrainOutput>
where
    F: FnMut(&EpochLog) -> Result<()>,
{
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    if val.is_empty() {
        return Err(Error::EmptyInput("validation split"));
    }
    let model_config = config.model_config();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let words = match &config.embeddings {
        Some(path) => load_pretrained(path, config.word_dim, config.embedding_mode.trainable())?,
        None => build_vocab(train, config.min_count, config.word_dim, rng.gen())?,
    };
    let patterns = build_pattern_table(train, config.pattern_dim, rng.gen());
    let (net, store) = Network::new(&model_config, &words, Some(&patterns), rng.gen())?;

    let fit_records = if config.model == ModelKind::Poshan {
        replicate_corpus(train)?
    } else {
        train.to_vec()
    };
    let limits = config.limits();
    let encode = |r: &DatasetRecord| DocTensor::from_record(r, &net.vocab, &net.patterns, limits);
    let fit_docs: Vec<DocTensor> = fit_records.iter().map(encode).collect();
    let val_docs: Vec<DocTensor> = val.iter().map(encode).collect();

    let mut trainer = Trainer::new(&net, store, config);
    let mut best = (f64::INFINITY, trainer.store.clone(), 0usize);
    let mut history = Vec::new();
    let mut log = Vec::new();
    let mut stale = 0;
    for epoch in 1..=config.max_epochs {
        let batches = make_batches(fit_docs.clone(), config.batch_size, Some(rng.gen()));
        let mut sum = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let losses = trainer.step(&batch.docs)?;
            if losses.iter().any(|l| !l.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            sum += losses.iter().sum::<f64>();
        }
        let (val_loss, val_f1) = evaluate_loss(&net, &trainer.store, &val_docs)?;
        let entry = EpochLog {
            epoch,
            train_loss: sum / fit_docs.len() as f64,
            val_loss,
            val_macro_f1: val_f1,
        };
        log::info!("{}", entry.tsv_line());
        on_epoch(&entry)?;
        log.push(entry);
        history.push(val_loss);
        if val_loss < best.0 - config.min_improvement {
            best = (val_loss, trainer.store.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stop_patience {
                log::info!("early stop after epoch {epoch}; best epoch {}", best.2);
                break;
            }
        }
    }
    let (_, best_store, best_epoch) = best;
    let checkpoint = Checkpoint {
        train_config: config.clone(),
        model_config,
        vocab: net.vocab.clone(),
        patterns: net.patterns.clone(),
        params: best_store.parameters().to_vec(),
        epoch: best_epoch,
        val_history: history,
        pattern_label_counts: pattern_label_counts(train),
    };
    Ok(TrainOutput { checkpoint, log })
}

pub fn train(config: &TrainConfig, train: &[DatasetRecord], val: &[DatasetRecord]) -> Result<TrainOutput> {
    train_with(config, train, val, |_| Ok(()))
}
