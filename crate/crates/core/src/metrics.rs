//! Classification metrics with Incongruent as the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Label;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predictions: &[Label], labels: &[Label]) -> Result<Self> {
        check_lengths(predictions.len(), labels.len())?;
        let mut c = Confusion::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p, l) {
                (Label::Incongruent, Label::Incongruent) => c.tp += 1,
                (Label::Incongruent, Label::Congruent) => c.fp += 1,
                (Label::Congruent, Label::Congruent) => c.tn += 1,
                (Label::Congruent, Label::Incongruent) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch {
            what: "predictions vs labels",
            left: a,
            right: b,
        });
    }
    if a == 0 {
        return Err(Error::EmptyInput("no predictions"));
    }
    Ok(())
}

fn f1(tp: usize, fp: usize, fn_: usize) -> Option<f64> {
    let denom = 2 * tp + fp + fn_;
    (denom > 0).then(|| (2 * tp) as f64 / denom as f64)
}

/// Unweighted mean of the per-class F1 scores. A class absent from both
/// predictions and labels counts as zero.
pub fn macro_f1(predictions: &[Label], labels: &[Label]) -> Result<f64> {
    let c = Confusion::from_predictions(predictions, labels)?;
    let per_class = [("incongruent", f1(c.tp, c.fp, c.fn_)), ("congruent", f1(c.tn, c.fn_, c.fp))];
    let mut sum = 0.0;
    for (name, score) in per_class {
        match score {
            Some(s) => sum += s,
            None => log::warn!("class {name} absent from predictions and labels; its F1 counts as 0"),
        }
    }
    Ok(sum / 2.0)
}

/// Probability that a random incongruent record scores above a random
/// congruent one, ties counting half. Uses midranks, so it is exact.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidTensor("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == Label::Incongruent).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // ranks doubled so midranks stay integral
    let mut pos_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            if labels[k] == Label::Incongruent {
                pos_rank_sum2 += midrank2;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as u64;
    // twice (number of wins + half the ties)
    let wins2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(wins2 as f64 / (2 * n_pos * n_neg as u64) as f64)
}
