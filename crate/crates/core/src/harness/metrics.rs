//! Ratio-of-means metrics over realizations.

use serde::{Deserialize, Serialize};

use crate::analysis::ZetaEstimate;
use crate::error::{input, Result};
use crate::numerics::{norm2, sub, IndexSet};
use crate::trackers::Algorithm;

/// What one algorithm did on one frame of one realization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// `||x - x_hat||^2`
    pub err2: f64,
    /// `||x||^2`
    pub energy: f64,
    pub extras: usize,
    pub misses: usize,
    /// `|N_t|`
    pub support: usize,
    pub violations: u32,
    pub nonconverged: bool,
    pub alpha_add_floor_unmet: bool,
    pub rank_deficient: bool,
    pub alpha_add_relaxed: bool,
}

impl FrameRecord {
    pub fn new(x: &[f64], x_hat: &[f64], estimated: &IndexSet) -> Self {
        let truth = IndexSet::support(x);
        Self {
            err2: norm2(&sub(x, x_hat)).powi(2),
            energy: norm2(x).powi(2),
            extras: estimated.difference(&truth).len(),
            misses: truth.difference(estimated).len(),
            support: truth.len(),
            ..Default::default()
        }
    }
}

/// Running sums for one time index.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Accum {
    pub err2: f64,
    pub energy: f64,
    pub extras: f64,
    pub misses: f64,
    pub support: f64,
    pub violations: u64,
    pub nonconverged: u64,
}

impl Accum {
    pub fn add(&mut self, f: &FrameRecord) {
        self.err2 += f.err2;
        self.energy += f.energy;
        self.extras += f.extras as f64;
        self.misses += f.misses as f64;
        self.support += f.support as f64;
        self.violations += u64::from(f.violations);
        self.nonconverged += u64::from(f.nonconverged);
    }

    pub fn nmse(&self) -> Option<f64> {
        (self.energy > 0.0).then(|| self.err2 / self.energy)
    }

    pub fn extras(&self) -> Option<f64> {
        (self.support > 0.0).then(|| self.extras / self.support)
    }

    pub fn misses(&self) -> Option<f64> {
        (self.support > 0.0).then(|| self.misses / self.support)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub alpha_add_floor_unmet: u64,
    pub rank_deficient: u64,
    pub alpha_add_relaxed: u64,
}

/// Spread of the modified-CS error and (Add-LS-Del only) the LS error on `T_add`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub modcs: Option<ZetaEstimate>,
    pub ls: Option<ZetaEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSeries {
    pub algorithm: Algorithm,
    pub nmse: Vec<Option<f64>>,
    pub extras: Vec<Option<f64>>,
    pub misses: Vec<Option<f64>>,
    pub violations: Vec<u64>,
    pub nonconverged: Vec<u64>,
    pub flags: FlagCounts,
    pub spread: SpreadSummary,
    /// The first few invariant violations, for diagnosis.
    pub violation_samples: Vec<String>,
}

/// Means over `t >= from` of the per-time metrics (missing values skipped).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub from: usize,
    pub nmse: Option<f64>,
    pub extras: Option<f64>,
    pub misses: Option<f64>,
    pub violations: u64,
    pub nonconverged: u64,
}

fn mean_from(v: &[Option<f64>], from: usize) -> Option<f64> {
    let vals: Vec<f64> = v.iter().skip(from).flatten().copied().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

impl AlgorithmSeries {
    pub fn steady_state(&self, from: usize) -> SteadyState {
        SteadyState {
            from,
            nmse: mean_from(&self.nmse, from),
            extras: mean_from(&self.extras, from),
            misses: mean_from(&self.misses, from),
            violations: self.violations.iter().sum(),
            nonconverged: self.nonconverged.iter().sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub frames: usize,
    pub realizations: usize,
    pub algorithms: Vec<AlgorithmSeries>,
}

impl MetricsSeries {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmSeries> {
        self.algorithms.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn total_violations(&self) -> u64 {
        self.algorithms.iter().flat_map(|s| &s.violations).sum()
    }
}

fn check_shapes<T, U>(a: &[Vec<T>], b: &[Vec<U>]) -> Result<()> {
    if a.is_empty() {
        return input("at least one realization required");
    }
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) || a.iter().any(|x| x.len() != a[0].len()) {
        return input("truth and estimates must have the same realizations and frames");
    }
    Ok(())
}

/// `E||x_t - x_hat_t||^2 / E||x_t||^2` per time index; outer index is the
/// realization, inner the time. `None` where all truths are zero.
pub fn nmse(truth: &[Vec<Vec<f64>>], estimates: &[Vec<Vec<f64>>]) -> Result<Vec<Option<f64>>> {
    check_shapes(truth, estimates)?;
    let frames = truth[0].len();
    let mut acc = vec![Accum::default(); frames];
    for (xs, es) in truth.iter().zip(estimates) {
        for (t, (x, e)) in xs.iter().zip(es).enumerate() {
            if x.len() != e.len() {
                return input(format!("dimension mismatch at t = {t}"));
            }
            acc[t].err2 += norm2(&sub(x, e)).powi(2);
            acc[t].energy += norm2(x).powi(2);
        }
    }
    Ok(acc.iter().map(Accum::nmse).collect())
}

/// `(E|N_hat \ N|, E|N \ N_hat|) / E|N|` per time index.
pub fn support_errors(truth: &[Vec<IndexSet>], estimated: &[Vec<IndexSet>]) -> Result<Vec<(Option<f64>, Option<f64>)>> {
    check_shapes(truth, estimated)?;
    let frames = truth[0].len();
    let mut acc = vec![Accum::default(); frames];
    for (ns, hs) in truth.iter().zip(estimated) {
        for (t, (n, h)) in ns.iter().zip(hs).enumerate() {
            acc[t].extras += h.difference(n).len() as f64;
            acc[t].misses += n.difference(h).len() as f64;
            acc[t].support += n.len() as f64;
        }
    }
    Ok(acc.iter().map(|a| (a.extras(), a.misses())).collect())
}
