//! Central finite-difference verification of analytic gradients.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{Gradients, ParamStore};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    pub tolerance: f64,
    /// Tensors with more entries than this are sampled.
    pub exhaustive_limit: usize,
    pub sample_size: usize,
    /// Lower bound on the relative-error denominator, so gradients that are
    /// zero up to rounding compare on absolute error.
    pub denominator_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            epsilon: 1e-5,
            tolerance: 1e-4,
            exhaustive_limit: 4096,
            sample_size: 256,
            denominator_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub entries_checked: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.params.iter().all(|p| p.pass)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| !p.pass)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("parameter\tmax_rel_error\tstatus\n");
        for p in &self.params {
            let status = if p.pass { "pass" } else { "fail" };
            let _ = writeln!(out, "{}\t{:.3e}\t{}", p.name, p.max_rel_error, status);
        }
        out
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

fn evaluate<F>(store: &ParamStore, forward: &F) -> Result<f64>
where
    F: Fn(&ParamStore, &mut Graph) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let loss = forward(store, &mut g)?;
    Ok(g.value(loss).item())
}

/// Runs `forward`, backpropagates, and compares every trainable parameter
/// against central differences.
pub fn finite_difference_check<F>(
    store: &ParamStore,
    forward: F,
    config: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Graph) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let loss = forward(store, &mut g)?;
    let analytic = g.backward(loss)?;
    check_against(store, forward, &analytic, config)
}

/// Compares externally supplied gradients against central differences.
pub fn check_against<F>(
    store: &ParamStore,
    forward: F,
    analytic: &Gradients,
    config: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Graph) -> Result<NodeId>,
{
    if !(config.epsilon > 1e-8 && config.epsilon < 1e-2) {
        return Err(Error::Config(format!(
            "epsilon {} outside (1e-8, 1e-2)",
            config.epsilon
        )));
    }
    let first = evaluate(store, &forward)?;
    let second = evaluate(store, &forward)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut work = store.clone();
    let mut report = GradCheckReport::default();
    let eps = config.epsilon;

    for (id, param) in store.iter() {
        if !param.trainable {
            continue;
        }
        let n = param.value.len();
        let indices: Vec<usize> = if n > config.exhaustive_limit {
            let mut idx = sample(&mut rng, n, config.sample_size.min(n)).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..n).collect()
        };
        let grad = analytic.get(store, id);
        let mut worst = (0.0f64, 0usize);
        for &k in &indices {
            let orig = param.value.data()[k];
            work.value_mut(id).data_mut()[k] = orig + eps;
            let plus = evaluate(&work, &forward)?;
            work.value_mut(id).data_mut()[k] = orig - eps;
            let minus = evaluate(&work, &forward)?;
            work.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(grad.data()[k], numeric, config.denominator_floor);
            if err > worst.0 || err.is_nan() {
                worst = (err, k);
            }
        }
        report.params.push(ParamCheck {
            name: param.name.clone(),
            entries_checked: indices.len(),
            max_rel_error: worst.0,
            worst_index: worst.1,
            pass: worst.0 <= config.tolerance,
        });
    }
    Ok(report)
}
