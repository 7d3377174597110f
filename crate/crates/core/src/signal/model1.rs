//! Ladder model: magnitudes live on the grid `r, 2r, ..., d r`.
//!
//! Every step adds `S_a` elements at `r`, moves `S_a` elements up from
//! each level below `d`, moves `S_a` elements down from each level above
//! `r` (including the top level) and removes `S_a` elements from `r`.
//! Which elements move is uniform among the members of the level.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{choose, random_sign, SparseSequenceState, StepCounts};
use crate::error::{input, Error, Result};
use crate::numerics::IndexSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model1Params {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "S_a")]
    pub s_a: usize,
    pub r: f64,
    pub d: usize,
    pub m: usize,
}

impl Model1Params {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return input("d must be at least 1");
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return input("r must be positive");
        }
        if self.s == 0 {
            return input("S must be at least 1");
        }
        if self.s < (2 * self.d - 2) * self.s_a {
            return input(format!("S = {} is below (2d-2) S_a = {}", self.s, (2 * self.d - 2) * self.s_a));
        }
        if self.s + self.s_a > self.m {
            return input(format!("S + S_a = {} exceeds m = {}", self.s + self.s_a, self.m));
        }
        Ok(())
    }

    /// `M = d r`.
    pub fn max_magnitude(&self) -> f64 {
        self.d as f64 * self.r
    }

    fn level(&self, magnitude: f64) -> usize {
        (magnitude / self.r).round() as usize
    }

    fn magnitude(&self, level: usize) -> f64 {
        level as f64 * self.r
    }
}

/// `S_t(j) = {i : 0 < |x_i| < j r}`.
pub fn small_set(state: &SparseSequenceState, j: usize, p: &Model1Params) -> IndexSet {
    let cut = (j as f64 - 0.5) * p.r;
    state.support.iter().copied().filter(|&i| state.magnitudes[i] < cut).collect()
}

/// Initial signal: `2 S_a` elements on each of `r, ..., (d-1) r`, the rest at `M`.
pub fn gen_model1_initial<R: Rng + ?Sized>(p: &Model1Params, rng: &mut R) -> Result<SparseSequenceState> {
    p.validate()?;
    let mut state = SparseSequenceState::empty(p.m);
    let chosen = rand::seq::index::sample(rng, p.m, p.s).into_vec();
    for (k, &i) in chosen.iter().enumerate() {
        let level = if k < (2 * p.d - 2) * p.s_a { k / (2 * p.s_a) + 1 } else { p.d };
        state.magnitudes[i] = p.magnitude(level);
        state.signs[i] = random_sign(rng);
        state.add_times[i].push(0);
    }
    state.support = IndexSet::from_unsorted(chosen);
    update_derived(&mut state, None, p);
    Ok(state)
}

fn levels(state: &SparseSequenceState, p: &Model1Params) -> Result<Vec<IndexSet>> {
    let mut by_level = vec![Vec::new(); p.d + 1];
    for &i in &state.support {
        let level = p.level(state.magnitudes[i]);
        if level == 0 || level > p.d || (state.magnitudes[i] - p.magnitude(level)).abs() > 1e-9 * p.r {
            return Err(Error::State(format!("index {i} is off the magnitude ladder")));
        }
        by_level[level].push(i);
    }
    let sets: Vec<IndexSet> = by_level.into_iter().map(IndexSet::from_unsorted).collect();
    for (j, set) in sets.iter().enumerate().take(p.d).skip(1) {
        if set.len() != 2 * p.s_a {
            return Err(Error::State(format!("level {j} holds {} elements, expected {}", set.len(), 2 * p.s_a)));
        }
    }
    if state.support.len() != p.s {
        return Err(Error::State(format!("support size {} differs from S = {}", state.support.len(), p.s)));
    }
    Ok(sets)
}

pub fn step_model1<R: Rng + ?Sized>(state: &SparseSequenceState, p: &Model1Params, rng: &mut R) -> Result<SparseSequenceState> {
    p.validate()?;
    let by_level = levels(state, p)?;
    let top = &by_level[p.d];
    if p.d >= 2 && top.len() < p.s_a {
        return Err(Error::Model(format!("only {} elements at the top level, {} must decrease", top.len(), p.s_a)));
    }
    if p.d == 1 && top.len() < p.s_a {
        return Err(Error::Model("fewer than S_a elements available for removal".into()));
    }

    let mut next = state.clone();
    next.t = state.t + 1;
    let mut new_level = vec![0usize; p.m];
    for &i in &state.support {
        new_level[i] = p.level(state.magnitudes[i]);
    }
    let mut removed = IndexSet::empty();
    if p.d == 1 {
        removed = choose(rng, top, p.s_a);
    } else {
        for (j, members) in by_level.iter().enumerate().take(p.d).skip(1) {
            let up = choose(rng, members, p.s_a);
            for &i in members {
                if up.contains(i) {
                    new_level[i] = j + 1;
                } else if j == 1 {
                    removed.insert(i);
                } else {
                    new_level[i] = j - 1;
                }
            }
        }
        for &i in &choose(rng, top, p.s_a) {
            new_level[i] = p.d - 1;
        }
    }
    for &i in &removed {
        new_level[i] = 0;
    }
    let added = choose(rng, &state.support.complement(p.m), p.s_a);
    for &i in &added {
        new_level[i] = 1;
        next.signs[i] = random_sign(rng);
        next.add_times[i].push(next.t);
    }
    for &i in &removed {
        next.signs[i] = 0;
    }
    for i in 0..p.m {
        next.magnitudes[i] = p.magnitude(new_level[i]);
    }
    next.support = state.support.union(&added).difference(&removed);
    next.added = added.clone();
    next.removed = removed.clone();
    next.added_history.push(added);
    update_derived(&mut next, Some(state), p);
    next.counts.push(StepCounts { added: p.s_a, decreasing: next.new_decreasing.len(), removed: p.s_a });
    Ok(next)
}

/// Large / decreasing sets under the ladder-as-special-case reading:
/// `ell = d r` and an addition window of `d` steps.
fn update_derived(state: &mut SparseSequenceState, prev: Option<&SparseSequenceState>, p: &Model1Params) {
    let t = state.t as isize;
    let mut window = IndexSet::empty();
    for tau in (t - p.d as isize + 1)..=t {
        window = window.union(&state.added_at(tau));
    }
    let ell = p.max_magnitude() - 0.5 * p.r;
    let large: IndexSet =
        state.support.iter().copied().filter(|&i| state.magnitudes[i] >= ell && !window.contains(i)).collect();
    match prev {
        None => {
            state.new_decreasing = IndexSet::empty();
            state.small_decreasing = IndexSet::empty();
        }
        Some(prev) => {
            state.new_decreasing = prev.large.difference(&large);
            state.small_decreasing = state
                .support
                .iter()
                .copied()
                .filter(|&i| !large.contains(i) && state.magnitudes[i] < prev.magnitudes[i])
                .collect();
        }
    }
    state.large = large;
}
