use std::fmt::Write as _;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{extract_cardinal_features, tag_record, DatasetRecord, Label, RawRecord, TagProvider, CARDINAL_TAG};
use crate::error::{Error, Result};

/// Kept/dropped counts per label after the cardinal filter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DeriveSummary {
    pub kept: [usize; 2],
    pub dropped: [usize; 2],
}

impl DeriveSummary {
    pub fn total_kept(&self) -> usize {
        self.kept.iter().sum()
    }

    pub fn total_dropped(&self) -> usize {
        self.dropped.iter().sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("label\tkept\tdropped\n");
        for label in Label::ALL {
            let i = label.index();
            let _ = writeln!(out, "{label}\t{}\t{}", self.kept[i], self.dropped[i]);
        }
        let _ = writeln!(out, "total\t{}\t{}", self.total_kept(), self.total_dropped());
        out
    }
}

/// Tags every record and keeps those whose headline contains at least one CD
/// token, in input order.
pub fn derive_dataset(
    records: &[RawRecord],
    provider: &TagProvider,
) -> Result<(Vec<DatasetRecord>, DeriveSummary)> {
    let tagged: Vec<Result<Option<DatasetRecord>>> = records
        .par_iter()
        .map(|r| {
            let (headline, body) = tag_record(r, provider)?;
            if !headline.iter().any(|t| t.pos == CARDINAL_TAG) {
                return Ok(None);
            }
            let (patterns, phrases) = extract_cardinal_features(&headline);
            Ok(Some(DatasetRecord {
                id: r.id.clone(),
                label: r.label,
                headline,
                body,
                patterns,
                phrases,
                active_cardinal: None,
            }))
        })
        .collect();

    let mut summary = DeriveSummary::default();
    let mut out = Vec::new();
    for (raw, res) in records.iter().zip(tagged) {
        match res? {
            Some(rec) => {
                summary.kept[raw.label.index()] += 1;
                out.push(rec);
            }
            None => summary.dropped[raw.label.index()] += 1,
        }
    }
    Ok((out, summary))
}

/// One copy per cardinal, each with its own active index.
pub fn replicate_for_training(record: &DatasetRecord) -> Result<Vec<DatasetRecord>> {
    let k = record.patterns.len();
    if k == 0 {
        return Err(Error::NoCardinal(record.id.clone()));
    }
    Ok((0..k)
        .map(|i| DatasetRecord {
            active_cardinal: Some(i),
            ..record.clone()
        })
        .collect())
}

pub fn replicate_corpus(records: &[DatasetRecord]) -> Result<Vec<DatasetRecord>> {
    let mut out = Vec::new();
    for r in records {
        out.extend(replicate_for_training(r)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub train: Vec<DatasetRecord>,
    pub val: Vec<DatasetRecord>,
    pub test: Vec<DatasetRecord>,
}

fn id_hash(seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Stratified 70/10/20 split; within each label records are ordered by a
/// seeded hash of their id, so the assignment does not depend on input order.
pub fn split_stratified(records: &[DatasetRecord], seed: u64) -> Split {
    let mut split = Split::default();
    for label in Label::ALL {
        let mut group: Vec<(u64, &DatasetRecord)> = records
            .iter()
            .filter(|r| r.label == label)
            .map(|r| (id_hash(seed, &r.id), r))
            .collect();
        group.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
        let n = group.len();
        let n_train = (n as f64 * 0.7).round() as usize;
        let n_val = ((n as f64 * 0.1).round() as usize).min(n - n_train);
        for (k, (_, r)) in group.into_iter().enumerate() {
            let dst = if k < n_train {
                &mut split.train
            } else if k < n_train + n_val {
                &mut split.val
            } else {
                &mut split.test
            };
            dst.push(r.clone());
        }
    }
    split
}
