//! Monte-Carlo experiments: signal generation, sensing and tracking over
//! many realizations, with per-time metrics and per-frame invariant checks.
//!
//! Every realization draws from its own seeded streams, so realizations run
//! in parallel and the first `R'` of a run with `R > R'` realizations are
//! identical to a run with `R'`. Sums are reduced in realization order.

mod export;
mod invariants;
mod metrics;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::estimate_zeta;
use crate::error::{input, Error, Result};
use crate::numerics::DenseMatrix;
use crate::sensing::{bounded_uniform_noise_from, gaussian_unit_columns_from, measure, stream, NoiseSpec, Purpose};
use crate::signal::SignalModel;
use crate::trackers::{Algorithm, StepOutput, Threshold, Tracker, TrackerConfig};

pub use export::{export, parse_csv, to_csv, to_json, to_svg, CsvRow, Format, CSV_HEADER};
pub use invariants::{frame_invariants, LS_IDENTITY_TOL};
pub use metrics::{nmse, support_errors, AlgorithmSeries, FlagCounts, FrameRecord, MetricsSeries, SpreadSummary, SteadyState};

use metrics::Accum;

/// First frame of the steady-state window.
pub const STEADY_STATE_FROM: usize = 20;

const VIOLATION_SAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixMode {
    /// One `A` per realization for all `t > 0`.
    Fixed,
    /// A fresh `A_t` every frame.
    Varying,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixEnsemble {
    /// i.i.d. Gaussian entries, unit-norm columns.
    #[default]
    Gaussian,
    /// Orthonormal columns (needs `n >= m`).
    Orthonormal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub alpha: Threshold,
    pub alpha_add: Threshold,
    pub alpha_del: Threshold,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { alpha: Threshold::Auto, alpha_add: Threshold::Auto, alpha_del: Threshold::Auto }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: SignalModel,
    pub n0: usize,
    pub n: usize,
    pub c0: f64,
    pub c: f64,
    pub frames: usize,
    pub realizations: usize,
    pub algorithms: Vec<Algorithm>,
    pub matrix_mode: MatrixMode,
    pub ensemble: MatrixEnsemble,
    pub master_seed: u64,
    pub thresholds: ThresholdConfig,
    pub invariant_checks: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        let fail = |msg: String| Err(Error::Config(msg));
        if self.realizations == 0 {
            return fail("realizations must be at least 1".into());
        }
        if self.frames == 0 {
            return fail("at least one frame required".into());
        }
        if self.algorithms.is_empty() {
            return fail("algorithm list is empty".into());
        }
        if self.n == 0 || self.n0 == 0 {
            return fail("n and n0 must be at least 1".into());
        }
        if self.ensemble == MatrixEnsemble::Orthonormal && self.n.min(self.n0) < self.model.m() {
            return fail(format!("orthonormal columns need n, n0 >= m = {}", self.model.m()));
        }
        NoiseSpec::new(self.c).map_err(|e| Error::Config(e.to_string()))?;
        NoiseSpec::new(self.c0).map_err(|e| Error::Config(e.to_string()))?;
        if self.realizations as u64 >= 1 << 32 || self.frames as u64 >= 1 << 32 {
            return fail("too many realizations or frames".into());
        }
        for th in [self.thresholds.alpha, self.thresholds.alpha_add, self.thresholds.alpha_del] {
            if let Threshold::Fixed(v) = th {
                if !(v >= 0.0 && v.is_finite()) {
                    return fail(format!("threshold {v} must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn tracker_config(&self, algorithm: Algorithm) -> TrackerConfig {
        TrackerConfig {
            alpha: self.thresholds.alpha,
            alpha_add: self.thresholds.alpha_add,
            alpha_del: self.thresholds.alpha_del,
            ..TrackerConfig::auto(algorithm)
        }
    }

    /// `epsilon` at frame `t` (`c0 sqrt(n0)` at `t = 0`).
    pub fn epsilon(&self, t: usize) -> f64 {
        if t == 0 {
            self.c0 * (self.n0 as f64).sqrt()
        } else {
            self.c * (self.n as f64).sqrt()
        }
    }
}

fn draw_matrix(cfg: &ExperimentConfig, purpose: Purpose, realization: usize, t: usize, rows: usize) -> Result<DenseMatrix> {
    let mut rng = stream(cfg.master_seed, purpose, realization as u64, t as u64);
    let g = gaussian_unit_columns_from(&mut rng, rows, cfg.model.m())?;
    Ok(match cfg.ensemble {
        MatrixEnsemble::Gaussian => g,
        MatrixEnsemble::Orthonormal => {
            let q = g.as_nalgebra().clone().qr().q();
            DenseMatrix::from_fn(rows, cfg.model.m(), |i, j| q[(i, j)])
        }
    })
}

/// The sensing matrices of one realization, drawn lazily for varying `A_t`.
pub struct Sensing<'a> {
    cfg: &'a ExperimentConfig,
    realization: usize,
    initial: DenseMatrix,
    fixed: Option<DenseMatrix>,
}

impl<'a> Sensing<'a> {
    pub fn new(cfg: &'a ExperimentConfig, realization: usize) -> Result<Self> {
        let initial = draw_matrix(cfg, Purpose::InitialMatrix, realization, 0, cfg.n0)?;
        let fixed = match cfg.matrix_mode {
            MatrixMode::Fixed => Some(draw_matrix(cfg, Purpose::Matrix, realization, 0, cfg.n)?),
            MatrixMode::Varying => None,
        };
        Ok(Self { cfg, realization, initial, fixed })
    }

    /// `A_t` and its noise half-width.
    pub fn matrix(&self, t: usize) -> Result<(std::borrow::Cow<'_, DenseMatrix>, NoiseSpec)> {
        use std::borrow::Cow;
        if t == 0 {
            return Ok((Cow::Borrowed(&self.initial), NoiseSpec::new(self.cfg.c0)?));
        }
        let a = match &self.fixed {
            Some(a) => Cow::Borrowed(a),
            None => Cow::Owned(draw_matrix(self.cfg, Purpose::Matrix, self.realization, t, self.cfg.n)?),
        };
        Ok((a, NoiseSpec::new(self.cfg.c)?))
    }

    pub fn noise(&self, t: usize, rows: usize, spec: NoiseSpec) -> Result<Vec<f64>> {
        bounded_uniform_noise_from(&mut stream(self.cfg.master_seed, Purpose::Noise, self.realization as u64, t as u64), rows, spec)
    }
}

/// Signal sequence of one realization.
pub fn realization_signals(cfg: &ExperimentConfig, realization: usize) -> Result<Vec<Vec<f64>>> {
    let mut rng = stream(cfg.master_seed, Purpose::Signal, realization as u64, 0);
    Ok(cfg.model.generate(cfg.frames, &mut rng)?.0)
}

/// Largest spread ratio seen so far, as `(sqrt(S_a) ratio, ratio, samples)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpreadMax {
    pub zeta: f64,
    pub normalized: f64,
    pub samples: usize,
}

impl SpreadMax {
    fn push(&mut self, e: &[f64], s_a: usize) {
        if let Ok(z) = estimate_zeta(&[(e, s_a)]) {
            self.zeta = self.zeta.max(z.zeta);
            self.normalized = self.normalized.max(z.normalized);
            self.samples += 1;
        }
    }

    fn merge(&mut self, o: &SpreadMax) {
        self.zeta = self.zeta.max(o.zeta);
        self.normalized = self.normalized.max(o.normalized);
        self.samples += o.samples;
    }

    fn estimate(&self) -> Option<crate::analysis::ZetaEstimate> {
        (self.samples > 0).then_some(crate::analysis::ZetaEstimate { zeta: self.zeta, normalized: self.normalized, samples: self.samples })
    }
}

/// Everything one realization contributes, per algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationTrace {
    pub realization: usize,
    /// `frames[k][t]` for algorithm `cfg.algorithms[k]`.
    pub frames: Vec<Vec<FrameRecord>>,
    pub spread_modcs: Vec<SpreadMax>,
    pub spread_ls: Vec<SpreadMax>,
    pub violation_samples: Vec<Vec<String>>,
}

/// Runs every configured tracker over one realization, calling `visit` on
/// each output with the frame's truth, matrix and noise.
pub fn run_realization_with(
    cfg: &ExperimentConfig,
    realization: usize,
    mut visit: impl FnMut(&StepOutput, &[f64], &DenseMatrix, &[f64]),
) -> Result<RealizationTrace> {
    let xs = realization_signals(cfg, realization)?;
    let sensing = Sensing::new(cfg, realization)?;
    let mut trackers: Vec<Tracker> = cfg.algorithms.iter().map(|&a| Tracker::new(cfg.tracker_config(a))).collect::<Result<_>>()?;
    let k = trackers.len();
    let mut trace = RealizationTrace {
        realization,
        frames: vec![Vec::with_capacity(cfg.frames); k],
        spread_modcs: vec![SpreadMax::default(); k],
        spread_ls: vec![SpreadMax::default(); k],
        violation_samples: vec![Vec::new(); k],
    };
    let s_a = cfg.model.s_a().max(1);
    for (t, x) in xs.iter().enumerate() {
        let (a, spec) = sensing.matrix(t)?;
        let w = sensing.noise(t, a.rows(), spec)?;
        let frame = measure(&a, x, &w, t, spec)?;
        for (j, tr) in trackers.iter_mut().enumerate() {
            let out = tr.step(&frame, &a).map_err(|e| Error::State(format!("realization {realization}, t = {t}, {}: {e}", tr.config.algorithm.name())))?;
            let mut rec = FrameRecord::new(x, &out.x_hat, &out.support);
            rec.nonconverged = out.flags.nonconverged;
            rec.alpha_add_floor_unmet = out.flags.alpha_add_floor_unmet;
            rec.rank_deficient = out.flags.rank_deficient;
            rec.alpha_add_relaxed = out.flags.alpha_add_relaxed;
            if cfg.invariant_checks {
                let v = frame_invariants(&out, x, &a, &w);
                rec.violations = v.len() as u32;
                let samples = &mut trace.violation_samples[j];
                samples.extend(v.into_iter().take(VIOLATION_SAMPLES.saturating_sub(samples.len())));
            }
            if out.algorithm != Algorithm::NoisyL1 {
                let e: Vec<f64> = x.iter().zip(&out.x_hat_modcs).map(|(a, b)| a - b).collect();
                trace.spread_modcs[j].push(&e, s_a);
            }
            if let (Some(t_add), Some(x_add)) = (&out.add_support, &out.x_hat_add) {
                let e: Vec<f64> = t_add.iter().map(|&i| x[i] - x_add[i]).collect();
                trace.spread_ls[j].push(&e, s_a);
            }
            visit(&out, x, &a, &w);
            trace.frames[j].push(rec);
        }
    }
    Ok(trace)
}

pub fn run_realization(cfg: &ExperimentConfig, realization: usize) -> Result<RealizationTrace> {
    run_realization_with(cfg, realization, |_, _, _, _| {})
}

/// All realizations, in index order (computed in parallel).
pub fn run_realizations(cfg: &ExperimentConfig) -> Result<Vec<RealizationTrace>> {
    cfg.validate()?;
    (0..cfg.realizations).into_par_iter().map(|r| run_realization(cfg, r)).collect()
}

/// Folds realization traces (in the given order) into the metric series.
pub fn aggregate(cfg: &ExperimentConfig, traces: &[RealizationTrace]) -> Result<MetricsSeries> {
    if traces.is_empty() {
        return input("no realizations to aggregate");
    }
    let mut algorithms = Vec::with_capacity(cfg.algorithms.len());
    for (j, &algorithm) in cfg.algorithms.iter().enumerate() {
        let mut acc = vec![Accum::default(); cfg.frames];
        let mut flags = FlagCounts::default();
        let mut modcs = SpreadMax::default();
        let mut ls = SpreadMax::default();
        let mut samples = Vec::new();
        for tr in traces {
            let frames = tr.frames.get(j).filter(|f| f.len() == cfg.frames).ok_or_else(|| Error::State("trace does not match the config".into()))?;
            for (t, f) in frames.iter().enumerate() {
                acc[t].add(f);
                flags.alpha_add_floor_unmet += u64::from(f.alpha_add_floor_unmet);
                flags.rank_deficient += u64::from(f.rank_deficient);
                flags.alpha_add_relaxed += u64::from(f.alpha_add_relaxed);
            }
            modcs.merge(&tr.spread_modcs[j]);
            ls.merge(&tr.spread_ls[j]);
            for s in &tr.violation_samples[j] {
                if samples.len() < VIOLATION_SAMPLES {
                    samples.push(format!("realization {}: {s}", tr.realization));
                }
            }
        }
        algorithms.push(AlgorithmSeries {
            algorithm,
            nmse: acc.iter().map(Accum::nmse).collect(),
            extras: acc.iter().map(Accum::extras).collect(),
            misses: acc.iter().map(Accum::misses).collect(),
            violations: acc.iter().map(|a| a.violations).collect(),
            nonconverged: acc.iter().map(|a| a.nonconverged).collect(),
            flags,
            spread: SpreadSummary { modcs: modcs.estimate(), ls: ls.estimate() },
            violation_samples: samples,
        });
    }
    Ok(MetricsSeries { frames: cfg.frames, realizations: traces.len(), algorithms })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsSeries> {
    let traces = run_realizations(cfg)?;
    aggregate(cfg, &traces)
}
