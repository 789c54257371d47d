//! Binary checkpoint archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "POSHANCK"
//! version  u32      currently 1
//! length   u64      byte length of the JSON header
//! header   JSON     configs, vocabularies, history, parameter names/shapes
//! values   f64 LE   every parameter's values in header order
//! ```
//!
//! Values are stored as raw bits, so a round trip is exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::Vocab;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Network};
use crate::params::{ParamStore, Parameter};
use crate::tensor::Tensor;
use crate::train::TrainConfig;

pub const MAGIC: &[u8; 8] = b"POSHANCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub train_config: TrainConfig,
    pub model_config: ModelConfig,
    pub vocab: Vocab,
    pub patterns: Vocab,
    pub params: Vec<Parameter>,
    /// Epoch whose parameters are stored.
    pub epoch: usize,
    /// Mean validation loss of every epoch run.
    pub val_history: Vec<f64>,
    /// Per-pattern label counts over the training split.
    pub pattern_label_counts: BTreeMap<String, [usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    train_config: TrainConfig,
    model_config: ModelConfig,
    vocab: Vocab,
    patterns: Vocab,
    epoch: usize,
    val_history: Vec<f64>,
    pattern_label_counts: BTreeMap<String, [usize; 2]>,
    params: Vec<ParamMeta>,
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

impl Checkpoint {
    pub fn network(&self) -> Result<(Network, ParamStore)> {
        Network::restore(&self.model_config, self.vocab.clone(), self.patterns.clone(), &self.params)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            train_config: self.train_config.clone(),
            model_config: self.model_config.clone(),
            vocab: self.vocab.clone(),
            patterns: self.patterns.clone(),
            epoch: self.epoch,
            val_history: self.val_history.clone(),
            pattern_label_counts: self.pattern_label_counts.clone(),
            params: self
                .params
                .iter()
                .map(|p| ParamMeta {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    trainable: p.trainable,
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let n: usize = self.params.iter().map(|p| p.value.len()).sum();
        let mut out = Vec::with_capacity(20 + json.len() + 8 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for p in &self.params {
            for v in p.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        if take(&mut bytes, 8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let len = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().expect("8 bytes")) as usize;
        let header: Header = serde_json::from_slice(take(&mut bytes, len)?)
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        let mut params = Vec::with_capacity(header.params.len());
        for meta in header.params {
            let n: usize = meta.shape.iter().product();
            let raw = take(&mut bytes, 8 * n)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            params.push(Parameter {
                name: meta.name,
                value: Tensor::new(meta.shape, data)?,
                trainable: meta.trainable,
            });
        }
        if !bytes.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len())));
        }
        Ok(Checkpoint {
            train_config: header.train_config,
            model_config: header.model_config,
            vocab: header.vocab,
            patterns: header.patterns,
            params,
            epoch: header.epoch,
            val_history: header.val_history,
            pattern_label_counts: header.pattern_label_counts,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(reason) => Error::Checkpoint(format!("{}: {reason}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{synthetic_corpus, SyntheticConfig};
    use crate::train::{evaluate_loss, train};
    use crate::batch::DocTensor;

    fn trained() -> (Checkpoint, Vec<crate::text::DatasetRecord>) {
        let data = synthetic_corpus(&SyntheticConfig {
            records: 12,
            seed: 8,
            ..SyntheticConfig::default()
        });
        let config = TrainConfig {
            word_dim: 6,
            hidden_size: 3,
            pattern_dim: 5,
            batch_size: 4,
            max_epochs: 2,
            ..TrainConfig::default()
        };
        (train(&config, &data[..8], &data[8..]).unwrap().checkpoint, data)
    }

    #[test]
    fn bit_exact_round_trip() {
        let (ck, data) = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        for (a, b) in ck.params.iter().zip(&back.params) {
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
        assert_eq!(back.to_bytes().unwrap(), ck.to_bytes().unwrap());

        // reloaded model reproduces the recorded validation loss exactly
        let (net, store) = back.network().unwrap();
        let docs: Vec<DocTensor> = data[8..]
            .iter()
            .map(|r| DocTensor::from_record(r, &net.vocab, &net.patterns, back.train_config.limits()))
            .collect();
        let (loss, _) = evaluate_loss(&net, &store, &docs).unwrap();
        assert_eq!(loss.to_bits(), ck.val_history[ck.epoch - 1].to_bits());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (ck, _) = trained();
        let bytes = ck.to_bytes().unwrap();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Checkpoint(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(Checkpoint::from_bytes(&extra), Err(Error::Checkpoint(_))));
    }
}
