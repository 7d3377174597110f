//! Recursive reconstruction: noisy l1 per frame, Modified-CS with
//! thresholding, and Modified-CS followed by add / least squares / delete.
//!
//! Each frame uses the previous support estimate as the known part `T`.
//! Thresholds can be fixed or set automatically from a running estimate of
//! the smallest nonzero magnitude and a conditioning floor on `A_T`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::numerics::{columns, least_squares, min_singular_value, norm2, norm_inf, pinv_solve, sub, DenseMatrix, IndexSet};
use crate::sensing::MeasurementFrame;
use crate::solver::{solve_modcs, SolverConfig, SolverResult, WeightedL1Problem};

/// Conditioning floor for automatically chosen supports.
pub const SIGMA_FLOOR: f64 = 0.4;
/// Default length of the smallest-magnitude averaging window.
pub const XMIN_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "noisy-l1", alias = "noisy_l1")]
    NoisyL1,
    #[serde(rename = "modcs")]
    ModCs,
    #[serde(rename = "modcs-add-ls-del", alias = "addlsdel", alias = "add-ls-del")]
    AddLsDel,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::NoisyL1, Algorithm::ModCs, Algorithm::AddLsDel];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::NoisyL1 => "noisy-l1",
            Algorithm::ModCs => "modcs",
            Algorithm::AddLsDel => "modcs-add-ls-del",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "noisy-l1" | "noisy_l1" | "l1" | "cs" => Ok(Algorithm::NoisyL1),
            "modcs" | "mod-cs" => Ok(Algorithm::ModCs),
            "modcs-add-ls-del" | "add-ls-del" | "addlsdel" => Ok(Algorithm::AddLsDel),
            _ => input(format!("unknown algorithm '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub algorithm: Algorithm,
    /// Support threshold for noisy l1 and Modified-CS.
    pub alpha: Threshold,
    pub alpha_add: Threshold,
    pub alpha_del: Threshold,
    pub xmin_window: usize,
    /// Keep the automatic deletion threshold at or above the residual
    /// correlation `||A_Tadd' (y - A x_modcs)||_inf`, so extras are still
    /// pruned once the minimum-magnitude estimate falls to the noise level.
    pub deletion_floor: bool,
    /// Lower an automatic `alpha_add` below the conditioning floor while the
    /// LS fit on `T_add` leaves a residual above `epsilon`.
    pub consistent_add: bool,
    pub solver: SolverConfig,
}

impl TrackerConfig {
    pub fn auto(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            alpha: Threshold::Auto,
            alpha_add: Threshold::Auto,
            alpha_del: Threshold::Auto,
            xmin_window: XMIN_WINDOW,
            deletion_floor: true,
            consistent_add: true,
            solver: SolverConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        for th in [self.alpha, self.alpha_add, self.alpha_del] {
            if let Threshold::Fixed(v) = th {
                if v.is_nan() || v < 0.0 {
                    return input(format!("threshold {v} must be >= 0"));
                }
            }
        }
        if self.xmin_window == 0 {
            return input("xmin window must hold at least one value");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    pub t: usize,
    /// `N_hat_{t-1}`, used as `T_t`.
    pub prev_support: IndexSet,
    pub xmin_window: VecDeque<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameFlags {
    pub nonconverged: bool,
    /// Even with no additions `sigma_min(A_T)` was below the floor.
    pub alpha_add_floor_unmet: bool,
    /// A least-squares step needed the pseudo-inverse or dropped additions.
    pub rank_deficient: bool,
    /// `alpha_add` was lowered past the conditioning floor to make the LS
    /// fit on `T_add` consistent with the noise bound.
    pub alpha_add_relaxed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub t: usize,
    pub algorithm: Algorithm,
    pub x_hat: Vec<f64>,
    pub x_hat_modcs: Vec<f64>,
    /// `T_t`, the support the solver treated as known.
    pub prior: IndexSet,
    pub support: IndexSet,
    pub add_support: Option<IndexSet>,
    pub x_hat_add: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub alpha_add: Option<f64>,
    pub alpha_del: Option<f64>,
    /// Smallest-magnitude estimate the automatic thresholds used.
    pub xmin_hat: Option<f64>,
    pub iterations: usize,
    pub exact: bool,
    pub flags: FrameFlags,
}

/// Support errors against a known signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportDiagnostics {
    /// `N \ T`
    pub delta: IndexSet,
    /// `T \ N`
    pub delta_e: IndexSet,
    /// `N \ T_tilde`
    pub misses: IndexSet,
    /// `T_tilde \ N`
    pub extras: IndexSet,
    pub add_misses: Option<IndexSet>,
    pub add_extras: Option<IndexSet>,
}

pub fn diagnostics(out: &StepOutput, x_true: &[f64]) -> SupportDiagnostics {
    let n = IndexSet::support(x_true);
    SupportDiagnostics {
        delta: n.difference(&out.prior),
        delta_e: out.prior.difference(&n),
        misses: n.difference(&out.support),
        extras: out.support.difference(&n),
        add_misses: out.add_support.as_ref().map(|s| n.difference(s)),
        add_extras: out.add_support.as_ref().map(|s| s.difference(&n)),
    }
}

/// `{i : |x_i| > alpha}`.
pub fn threshold_support(x: &[f64], alpha: f64) -> IndexSet {
    IndexSet::select(x, |v| v.abs() > alpha)
}

fn sigma_min_on(a: &DenseMatrix, set: &IndexSet) -> Result<f64> {
    min_singular_value(&columns(a, set)?)
}

/// `0` followed by the sorted distinct nonzero magnitudes of `values`.
fn grid(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut g: Vec<f64> = values.map(f64::abs).filter(|&v| v > 0.0).collect();
    g.push(0.0);
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Smallest index `k` in `lo..g.len()` where `ok(k)` holds, given that `ok` is
/// monotone and holds at the last index.
fn first_true(lo: usize, hi: usize, mut ok: impl FnMut(usize) -> Result<bool>) -> Result<usize> {
    let (mut lo, mut hi) = (lo, hi);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Smallest grid threshold whose support keeps only entries of at least
/// `0.5 xmin_hat` and has `sigma_min(A_T) >= 0.4`.
///
/// Raising the threshold shrinks the support, which can only raise both the
/// smallest kept magnitude and `sigma_min`, so the first admissible grid
/// point is found by bisection. The top of the grid gives the empty support
/// and is always admissible.
pub fn auto_alpha(x_hat_modcs: &[f64], a: &DenseMatrix, xmin_hat: f64) -> Result<f64> {
    if !(xmin_hat > 0.0) {
        return input(format!("xmin estimate must be positive, got {xmin_hat}"));
    }
    if x_hat_modcs.len() != a.cols() {
        return input("estimate length differs from the number of columns");
    }
    let g = grid(x_hat_modcs.iter().copied());
    let last = g.len() - 1;
    // first grid point whose next value (the smallest kept magnitude) is large enough
    let k1 = (0..last).find(|&k| g[k + 1] >= 0.5 * xmin_hat).unwrap_or(last);
    let k = first_true(k1, last, |k| Ok(sigma_min_on(a, &threshold_support(x_hat_modcs, g[k]))? >= SIGMA_FLOOR))?;
    Ok(g[k])
}

/// Smallest grid threshold on `T^c` with `sigma_min(A_{T u A_hat}) >= 0.4`.
/// The flag is set when even `A_T` alone misses the floor; the returned
/// threshold then admits no additions.
pub fn auto_alpha_add(x_hat_modcs: &[f64], a: &DenseMatrix, known: &IndexSet) -> Result<(f64, bool)> {
    if x_hat_modcs.len() != a.cols() {
        return input("estimate length differs from the number of columns");
    }
    let outside = known.complement(a.cols());
    let g = grid(outside.iter().map(|&i| x_hat_modcs[i]));
    let last = g.len() - 1;
    let with = |alpha: f64| known.union(&outside.iter().copied().filter(|&i| x_hat_modcs[i].abs() > alpha).collect());
    if sigma_min_on(a, known)? < SIGMA_FLOOR {
        return Ok((g[last], true));
    }
    let k = first_true(0, last, |k| Ok(sigma_min_on(a, &with(g[k]))? >= SIGMA_FLOOR))?;
    Ok((g[k], false))
}

/// `max(0, 0.7 xmin_hat - |A_Tadd' residual|_inf)`.
pub fn auto_alpha_del(xmin_hat: f64, a_tadd: &DenseMatrix, residual: &[f64]) -> Result<f64> {
    if !(xmin_hat > 0.0) {
        return input(format!("xmin estimate must be positive, got {xmin_hat}"));
    }
    if residual.len() != a_tadd.rows() {
        return input("residual length differs from the number of rows");
    }
    Ok((0.7 * xmin_hat - norm_inf(&a_tadd.tr_mul_vec(residual))).max(0.0))
}

/// Pushes `min_{j in support} |x_hat_j|` (unless the support is empty) and
/// returns the window mean, or `None` while the window is still empty.
pub fn update_xmin(window: &mut VecDeque<f64>, capacity: usize, support: &IndexSet, x_hat: &[f64]) -> Option<f64> {
    if let Some(v) = support.iter().map(|&i| x_hat[i].abs()).min_by(f64::total_cmp) {
        window.push_back(v);
        while window.len() > capacity {
            window.pop_front();
        }
    }
    window_mean(window)
}

fn window_mean(window: &VecDeque<f64>) -> Option<f64> {
    (!window.is_empty()).then(|| window.iter().sum::<f64>() / window.len() as f64)
}

/// LS on `set`, dropping entries of `droppable` (in the given order) while the
/// columns are rank deficient; falls back to the pseudo-inverse.
fn robust_ls(a: &DenseMatrix, set: &IndexSet, droppable: &[usize], y: &[f64]) -> Result<(IndexSet, Vec<f64>, bool)> {
    let mut set = set.clone();
    let mut dropped = false;
    let mut queue = droppable.iter();
    loop {
        let sub = columns(a, &set)?;
        match least_squares(&sub, y) {
            Ok(c) => return Ok((set.clone(), set.scatter(&c, a.cols()), dropped)),
            Err(Error::Singular { .. }) => match queue.next() {
                Some(&i) => {
                    set.remove(i);
                    dropped = true;
                }
                None => {
                    let c = pinv_solve(&sub, y)?;
                    return Ok((set.clone(), set.scatter(&c, a.cols()), true));
                }
            },
            Err(e) => return Err(e),
        }
    }
}

/// One tracker for one sequence.
#[derive(Clone, Debug)]
pub struct Tracker {
    pub config: TrackerConfig,
    pub state: TrackerState,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, state: TrackerState::default() })
    }

    pub fn step(&mut self, frame: &MeasurementFrame, a: &DenseMatrix) -> Result<StepOutput> {
        let (out, next) = match self.config.algorithm {
            Algorithm::NoisyL1 => noisy_l1_step(&self.state, frame, a, &self.config)?,
            Algorithm::ModCs => modcs_step(&self.state, frame, a, &self.config)?,
            Algorithm::AddLsDel => addlsdel_step(&self.state, frame, a, &self.config)?,
        };
        self.state = next;
        Ok(out)
    }
}

fn solve(state: &TrackerState, frame: &MeasurementFrame, a: &DenseMatrix, known: &IndexSet, cfg: &TrackerConfig) -> Result<SolverResult> {
    if frame.y.len() != a.rows() {
        return input(format!("frame has {} measurements, matrix has {} rows", frame.y.len(), a.rows()));
    }
    if known.max_index().is_some_and(|i| i >= a.cols()) {
        return Err(Error::State(format!("support estimate at t = {} exceeds the signal length", state.t)));
    }
    let p = WeightedL1Problem::new(a, &frame.y, frame.epsilon, known)?;
    solve_modcs(&p, &cfg.solver)
}

/// The averaged smallest-magnitude estimate. Before any support has been
/// seen: the smallest entry of `x` above the noise radius, since entries
/// below it are indistinguishable from noise (or the smallest nonzero entry
/// if none clears it).
fn xmin_estimate(state: &TrackerState, x: &[f64], epsilon: f64) -> Option<f64> {
    window_mean(&state.xmin_window).or_else(|| {
        let smallest_above = |floor: f64| x.iter().map(|v| v.abs()).filter(|&v| v > floor).min_by(f64::total_cmp);
        smallest_above(epsilon).or_else(|| smallest_above(0.0))
    })
}

fn threshold_step(
    state: &TrackerState,
    frame: &MeasurementFrame,
    a: &DenseMatrix,
    known: IndexSet,
    cfg: &TrackerConfig,
    algorithm: Algorithm,
) -> Result<(StepOutput, TrackerState)> {
    let sol = solve(state, frame, a, &known, cfg)?;
    let xmin_hat = xmin_estimate(state, &sol.beta, frame.epsilon);
    let alpha = match cfg.alpha {
        Threshold::Fixed(v) => v,
        Threshold::Auto => match xmin_hat {
            Some(xm) => auto_alpha(&sol.beta, a, xm)?,
            None => 0.0,
        },
    };
    let support = threshold_support(&sol.beta, alpha);
    let mut next = TrackerState { t: state.t + 1, prev_support: support.clone(), xmin_window: state.xmin_window.clone() };
    update_xmin(&mut next.xmin_window, cfg.xmin_window, &support, &sol.beta);
    let out = StepOutput {
        t: state.t,
        algorithm,
        x_hat: sol.beta.clone(),
        x_hat_modcs: sol.beta,
        prior: known,
        support,
        add_support: None,
        x_hat_add: None,
        alpha: Some(alpha),
        alpha_add: None,
        alpha_del: None,
        xmin_hat,
        iterations: sol.iterations,
        exact: sol.exact,
        flags: FrameFlags { nonconverged: !sol.converged, ..Default::default() },
    };
    Ok((out, next))
}

/// Noisy l1 on every frame; the support estimate is reported but not fed back.
pub fn noisy_l1_step(state: &TrackerState, frame: &MeasurementFrame, a: &DenseMatrix, cfg: &TrackerConfig) -> Result<(StepOutput, TrackerState)> {
    cfg.validate()?;
    threshold_step(state, frame, a, IndexSet::empty(), cfg, Algorithm::NoisyL1)
}

/// Modified-CS with `T = N_hat_{t-1}` (empty at the first frame), then
/// `T_tilde = {|x_hat| > alpha}`.
pub fn modcs_step(state: &TrackerState, frame: &MeasurementFrame, a: &DenseMatrix, cfg: &TrackerConfig) -> Result<(StepOutput, TrackerState)> {
    cfg.validate()?;
    threshold_step(state, frame, a, state.prev_support.clone(), cfg, Algorithm::ModCs)
}

struct Pass {
    alpha_add: f64,
    add_support: IndexSet,
    x_add: Vec<f64>,
    alpha_del: f64,
    support: IndexSet,
    x_hat: Vec<f64>,
}

fn add_ls_del(
    known: &IndexSet,
    x_modcs: &[f64],
    frame: &MeasurementFrame,
    a: &DenseMatrix,
    cfg: &TrackerConfig,
    xmin_hat: Option<f64>,
    flags: &mut FrameFlags,
) -> Result<Pass> {
    let alpha_add = match cfg.alpha_add {
        Threshold::Fixed(v) => v,
        Threshold::Auto => {
            let (v, unmet) = auto_alpha_add(x_modcs, a, known)?;
            flags.alpha_add_floor_unmet |= unmet;
            v
        }
    };
    let outside = known.complement(a.cols());
    let g = grid(outside.iter().map(|&i| x_modcs[i]));
    let mut k = g.partition_point(|&v| v < alpha_add);
    let mut alpha_add = alpha_add;
    let (add_support, x_add) = loop {
        let mut added: Vec<usize> = outside.iter().copied().filter(|&i| x_modcs[i].abs() > alpha_add).collect();
        added.sort_by(|&i, &j| x_modcs[i].abs().total_cmp(&x_modcs[j].abs()).then(i.cmp(&j)));
        let requested = known.union(&added.iter().copied().collect());
        let (add_support, x_add, dropped) = robust_ls(a, &requested, &added, &frame.y)?;
        // The true support always fits to within epsilon, so a worse fit
        // means T_add is missing something.
        let fits = || norm2(&sub(&frame.y, &a.mul_vec(&x_add))) <= frame.epsilon * (1.0 + 1e-9) + 1e-12;
        // Only candidates on the scale of the smallest tracked entry qualify.
        let relax = cfg.consistent_add && cfg.alpha_add == Threshold::Auto;
        let significant = || k > 0 && k < g.len() && xmin_hat.is_some_and(|xm| g[k] >= 0.5 * xm);
        if !relax || !significant() || fits() {
            flags.rank_deficient |= dropped;
            break (add_support, x_add);
        }
        k -= 1;
        alpha_add = g[k];
        flags.alpha_add_relaxed = true;
    };

    let alpha_del = match cfg.alpha_del {
        Threshold::Fixed(v) => v,
        Threshold::Auto => match xmin_hat {
            Some(xm) => {
                let residual: Vec<f64> = frame.y.iter().zip(a.mul_vec(x_modcs)).map(|(y, ax)| y - ax).collect();
                let a_tadd = columns(a, &add_support)?;
                let v = auto_alpha_del(xm, &a_tadd, &residual)?;
                if cfg.deletion_floor {
                    v.max(norm_inf(&a_tadd.tr_mul_vec(&residual)))
                } else {
                    v
                }
            }
            None => 0.0,
        },
    };
    let support: IndexSet = add_support.iter().copied().filter(|&i| x_add[i].abs() > alpha_del).collect();
    let (support, x_hat, dropped) = robust_ls(a, &support, &[], &frame.y)?;
    flags.rank_deficient |= dropped;
    Ok(Pass { alpha_add, add_support, x_add, alpha_del, support, x_hat })
}

/// Modified-CS, add (`> alpha_add`), LS on `T_add`, delete (`<= alpha_del`),
/// final LS on what is left.
pub fn addlsdel_step(state: &TrackerState, frame: &MeasurementFrame, a: &DenseMatrix, cfg: &TrackerConfig) -> Result<(StepOutput, TrackerState)> {
    cfg.validate()?;
    let known = state.prev_support.clone();
    let sol = solve(state, frame, a, &known, cfg)?;
    let x_modcs = &sol.beta;
    let mut flags = FrameFlags { nonconverged: !sol.converged, ..Default::default() };
    let xmin_hat = xmin_estimate(state, x_modcs, frame.epsilon);

    let pass = add_ls_del(&known, x_modcs, frame, a, cfg, xmin_hat, &mut flags)?;

    let mut next = TrackerState { t: state.t + 1, prev_support: pass.support.clone(), xmin_window: state.xmin_window.clone() };
    update_xmin(&mut next.xmin_window, cfg.xmin_window, &pass.support, &pass.x_hat);
    let out = StepOutput {
        t: state.t,
        algorithm: Algorithm::AddLsDel,
        x_hat: pass.x_hat,
        x_hat_modcs: sol.beta.clone(),
        prior: known,
        support: pass.support,
        add_support: Some(pass.add_support),
        x_hat_add: Some(pass.x_add),
        alpha: None,
        alpha_add: Some(pass.alpha_add),
        alpha_del: Some(pass.alpha_del),
        xmin_hat,
        iterations: sol.iterations,
        exact: sol.exact,
        flags,
    };
    Ok((out, next))
}
