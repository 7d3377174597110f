//! Randomized model with a large set, a decreasing set and bounded removal delay.
//!
//! New elements grow for `d_min` steps and then join the large set `L`.
//! Each step `S_d,t` members of `L` start to decay; decaying members are
//! removed within `b` steps. With `early_removal` every decay cohort of
//! size `s` has at least `ceil(k s / b)` members removed `k` steps in.
//!
//! Decay rates are drawn from the stated ranges but restricted so that an
//! element stays strictly positive until its deadline; removal then never
//! has to exceed `S_a` per step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{choose, random_sign, round_half_up, AddRecord, Cohort, SparseSequenceState, StepCounts};
use crate::error::{input, Error, Result};
use crate::numerics::IndexSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model2Params {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "S_a")]
    pub s_a: usize,
    pub d_min: usize,
    pub a_min: f64,
    pub r_min: f64,
    pub b: usize,
    pub m: usize,
    pub ell: f64,
}

impl Model2Params {
    /// Fills in `ell = a_min + d_min r_min`.
    pub fn new(s: usize, s_a: usize, d_min: usize, a_min: f64, r_min: f64, b: usize, m: usize) -> Result<Self> {
        let p = Self { s, s_a, d_min, a_min, r_min, b, m, ell: a_min + d_min as f64 * r_min };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_min == 0 || self.b == 0 {
            return input("d_min and b must be at least 1");
        }
        if !(self.a_min > 0.0 && self.a_min.is_finite() && self.r_min > 0.0 && self.r_min.is_finite()) {
            return input("a_min and r_min must be positive");
        }
        let ell = self.a_min + self.d_min as f64 * self.r_min;
        if (self.ell - ell).abs() > 1e-9 * ell {
            return input(format!("ell = {} but a_min + d_min r_min = {ell}", self.ell));
        }
        if (self.d_min + self.b + 1) * self.s_a > self.s {
            return input(format!(
                "(d_min + b + 1) S_a = {} exceeds S = {}",
                (self.d_min + self.b + 1) * self.s_a,
                self.s
            ));
        }
        if self.s == 0 || self.s + self.s_a > self.m {
            return input(format!("need 1 <= S and S + S_a <= m, got S = {}, S_a = {}, m = {}", self.s, self.s_a, self.m));
        }
        Ok(())
    }
}

/// Uniform on `(lo, hi]`.
fn half_open<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return hi;
    }
    hi - rng.gen_range(0.0..hi - lo)
}

/// Uniform on `(lo, hi)`.
fn open<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    loop {
        let v = lo + (hi - lo) * rng.gen::<f64>();
        if v > lo && v < hi {
            return v;
        }
    }
}

pub fn gen_model2_initial<R: Rng + ?Sized>(p: &Model2Params, rng: &mut R) -> Result<SparseSequenceState> {
    p.validate()?;
    let mu1: f64 = rng.gen_range(0.9..=1.0);
    let s0 = round_half_up(mu1 * p.s as f64).max((p.d_min + p.b + 1) * p.s_a).min(p.s);
    let mut state = SparseSequenceState::empty(p.m);
    let chosen = rand::seq::index::sample(rng, p.m, s0).into_vec();
    for &i in &chosen {
        state.magnitudes[i] = half_open(rng, p.ell, p.ell + p.r_min);
        state.signs[i] = random_sign(rng);
        state.add_times[i].push(0);
    }
    state.support = IndexSet::from_unsorted(chosen);
    state.large = state.support.clone();
    Ok(state)
}

/// How many members of a cohort must be gone `k` steps after it started.
fn quota(cohort: &Cohort, k: usize, b: usize, early_removal: bool) -> usize {
    if k >= b {
        cohort.size
    } else if early_removal {
        (k * cohort.size).div_ceil(b)
    } else {
        0
    }
}

/// `k` smallest-magnitude members of `from` (ties by lowest index).
fn smallest(state: &SparseSequenceState, from: impl IntoIterator<Item = usize>, k: usize) -> Vec<usize> {
    let mut v: Vec<usize> = from.into_iter().collect();
    v.sort_by(|&a, &b| state.magnitudes[a].total_cmp(&state.magnitudes[b]).then(a.cmp(&b)));
    v.truncate(k);
    v
}

pub fn step_model2<R: Rng + ?Sized>(
    state: &SparseSequenceState,
    p: &Model2Params,
    early_removal: bool,
    rng: &mut R,
) -> Result<SparseSequenceState> {
    p.validate()?;
    if state.m != p.m {
        return input(format!("state has m = {}, params have m = {}", state.m, p.m));
    }
    let t = state.t + 1;
    let prev_large = &state.large;
    let prev_sd = &state.small_decreasing;

    // sizes
    let (s_at, s_dt, s_rt) = if t <= p.b {
        (0, p.s_a, 0)
    } else {
        let mu2: f64 = rng.gen_range(0.9..=1.0);
        let decayed: usize = state.counts.iter().take(t - p.b + 1).map(|c| c.decreasing).sum();
        let added: usize = state.counts.iter().take(t).map(|c| c.added).sum();
        let s_at = round_half_up(mu2 * (decayed as f64 - added as f64)).min(p.s_a);
        let mu3: f64 = rng.gen_range(0.5..=1.0);
        let mu4: f64 = rng.gen_range(0.1..=0.3);
        let s_rt = (mu4 * prev_sd.len() as f64).ceil() as usize;
        (s_at, (mu3 * p.s_a as f64).ceil() as usize, s_rt)
    };
    if s_dt > prev_large.len() {
        return Err(Error::Model(format!("{s_dt} elements must start decaying but the large set has {}", prev_large.len())));
    }

    // removals: cohort deadlines first, then the smallest decaying elements
    let mut mandatory = Vec::new();
    for cohort in &state.cohorts {
        let k = t - cohort.start;
        let must_have_left = quota(cohort, k, p.b, early_removal);
        let already = cohort.size - cohort.remaining.len();
        if must_have_left > already {
            mandatory.extend(smallest(state, cohort.remaining.iter().copied(), must_have_left - already));
        }
    }
    let mandatory = IndexSet::from_unsorted(mandatory);
    if mandatory.len() > p.s_a {
        return Err(Error::Model(format!("{} decaying elements are due at t = {t}, above S_a = {}", mandatory.len(), p.s_a)));
    }
    let target = s_rt.max(mandatory.len()).min(p.s_a).min(prev_sd.len());
    let extra = smallest(state, prev_sd.difference(&mandatory).iter().copied(), target - mandatory.len());
    let removed = mandatory.union(&IndexSet::from_unsorted(extra));

    let added = choose(rng, &state.support.complement(p.m), s_at);
    let decaying = choose(rng, prev_large, s_dt);

    let mut next = state.clone();
    next.t = t;
    let entering = state.added_at(t as isize - p.d_min as isize);
    let mut growing = IndexSet::empty();
    for tau in (t as isize - p.d_min as isize + 1)..t as isize {
        growing = growing.union(&state.added_at(tau));
    }

    for &i in &state.support {
        let m = state.magnitudes[i];
        let new = if removed.contains(i) {
            0.0
        } else if decaying.contains(i) {
            let excess = m - p.ell;
            // keep the result above (b - 1) ell / b so it can decay for b - 1 more steps
            let hi = (1.0 + p.ell / (p.b as f64 * excess)).min(1.44);
            let mu8 = open(rng, 1.0, hi);
            let v = m - mu8 * excess;
            if !(v > 0.0 && v < p.ell) {
                return Err(Error::State(format!("decay of index {i} from {m} left it at {v}")));
            }
            v
        } else if prev_sd.contains(i) {
            let cohort = state.cohorts.iter().find(|c| c.remaining.contains(i)).map(|c| c.start);
            let deadline = cohort.unwrap_or(t) + p.b;
            let step = p.ell / p.b as f64;
            let hi = (m / step - deadline.saturating_sub(t + 1) as f64).min(1.44);
            if hi <= 1.0 {
                return Err(Error::State(format!("index {i} cannot keep decaying until t = {deadline}")));
            }
            let mu7 = rng.gen_range(1.0..hi);
            m - mu7 * step
        } else if entering.contains(i) {
            let lo = p.r_min.max(p.ell - m);
            m + half_open(rng, lo, lo + p.r_min)
        } else if prev_large.contains(i) {
            loop {
                let v = m + half_open(rng, -(m - p.ell), p.r_min);
                if v > p.ell {
                    break v;
                }
            }
        } else if growing.contains(i) {
            let mu6: f64 = rng.gen_range(1.0..=1.44);
            m + mu6 * p.r_min
        } else {
            return Err(Error::State(format!("index {i} is in the support but in none of the model sets")));
        };
        next.magnitudes[i] = new;
        if new == 0.0 {
            next.signs[i] = 0;
        }
    }
    for &i in &added {
        let mu6: f64 = rng.gen_range(1.0..=1.44);
        next.magnitudes[i] = mu6 * p.a_min;
        next.signs[i] = random_sign(rng);
        next.add_times[i].push(t);
        next.additions.push(AddRecord { index: i, t, initial: next.magnitudes[i], increments: Vec::new() });
    }
    for rec in next.additions.iter_mut().rev() {
        if rec.t + p.d_min < t {
            break;
        }
        if rec.t < t && next.magnitudes[rec.index] > 0.0 {
            rec.increments.push(next.magnitudes[rec.index] - state.magnitudes[rec.index]);
        }
    }

    next.support = state.support.union(&added).difference(&removed);
    next.added = added.clone();
    next.removed = removed.clone();
    next.added_history.push(added);
    next.new_decreasing = decaying.clone();
    next.large = entering.union(prev_large).difference(&decaying);
    next.small_decreasing = prev_sd.union(&decaying).difference(&removed);
    next.cohorts = state
        .cohorts
        .iter()
        .map(|c| Cohort { start: c.start, size: c.size, remaining: c.remaining.difference(&removed) })
        .filter(|c| !c.remaining.is_empty())
        .collect();
    if !decaying.is_empty() {
        next.cohorts.push(Cohort { start: t, size: decaying.len(), remaining: decaying });
    }
    next.counts.push(StepCounts { added: s_at, decreasing: s_dt, removed: removed.len() });
    next.check()?;
    Ok(next)
}
