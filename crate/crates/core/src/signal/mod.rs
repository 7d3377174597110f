//! Ground-truth sparse sequences.
//!
//! Two generators are provided: the deterministic ladder model
//! ([`model1`]) and the randomized large-set/decay model ([`model2`]).
//! [`verify`] checks the model conditions on any sequence and [`seqfile`]
//! reads and writes the text format used by the command line tool.

pub mod model1;
pub mod model2;
pub mod seqfile;
pub mod verify;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::IndexSet;

pub use model1::{gen_model1_initial, small_set, step_model1, Model1Params};
pub use model2::{gen_model2_initial, step_model2, Model2Params};
pub use verify::{verify_assumptions, Clause, ModelClaim, ModelReport};

/// One addition event: index, time, initial magnitude and the magnitude
/// increments over the following steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddRecord {
    pub index: usize,
    pub t: usize,
    pub initial: f64,
    pub increments: Vec<f64>,
}

/// Per-step change counts `(S_a,t, S_d,t, S_r,t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub added: usize,
    pub decreasing: usize,
    pub removed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseSequenceState {
    pub t: usize,
    pub m: usize,
    pub magnitudes: Vec<f64>,
    pub signs: Vec<i8>,
    pub support: IndexSet,
    pub added: IndexSet,
    pub removed: IndexSet,
    /// Elements that left the large set at this step.
    pub new_decreasing: IndexSet,
    pub large: IndexSet,
    pub small_decreasing: IndexSet,
    /// Times at which each index entered the support.
    pub add_times: Vec<Vec<usize>>,
    pub additions: Vec<AddRecord>,
    /// Indexed by time.
    pub counts: Vec<StepCounts>,
    pub(crate) added_history: Vec<IndexSet>,
    pub(crate) cohorts: Vec<Cohort>,
}

/// Elements that started decreasing together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Cohort {
    pub start: usize,
    pub size: usize,
    pub remaining: IndexSet,
}

impl SparseSequenceState {
    pub(crate) fn empty(m: usize) -> Self {
        Self {
            t: 0,
            m,
            magnitudes: vec![0.0; m],
            signs: vec![0; m],
            support: IndexSet::empty(),
            added: IndexSet::empty(),
            removed: IndexSet::empty(),
            new_decreasing: IndexSet::empty(),
            large: IndexSet::empty(),
            small_decreasing: IndexSet::empty(),
            add_times: vec![Vec::new(); m],
            additions: Vec::new(),
            counts: vec![StepCounts::default()],
            added_history: vec![IndexSet::empty()],
            cohorts: Vec::new(),
        }
    }

    /// The signal `x_t = M_t * s_t`.
    pub fn x(&self) -> Vec<f64> {
        self.magnitudes.iter().zip(&self.signs).map(|(m, s)| m * f64::from(*s)).collect()
    }

    /// `A_tau` for an earlier step (empty for `tau <= 0` or out of range).
    pub fn added_at(&self, tau: isize) -> IndexSet {
        if tau <= 0 {
            return IndexSet::empty();
        }
        self.added_history.get(tau as usize).cloned().unwrap_or_default()
    }

    /// Checks the bookkeeping invariants tying the sets to the magnitudes.
    pub fn check(&self) -> Result<()> {
        let from_magnitudes = IndexSet::select(&self.magnitudes, |v| v > 0.0);
        if from_magnitudes != self.support {
            return Err(Error::State("support does not match the nonzero magnitudes".into()));
        }
        for i in 0..self.m {
            let nonzero = self.magnitudes[i] > 0.0;
            if nonzero != (self.signs[i] != 0) || self.magnitudes[i] < 0.0 || !self.magnitudes[i].is_finite() {
                return Err(Error::State(format!("index {i} has inconsistent magnitude and sign")));
            }
        }
        if !self.large.is_disjoint(&self.small_decreasing) {
            return Err(Error::State("large and small-decreasing sets overlap".into()));
        }
        Ok(())
    }
}

/// `I_t`: support elements whose magnitude did not decrease.
pub fn increasing_set(prev: &SparseSequenceState, cur: &SparseSequenceState) -> IndexSet {
    cur.support.iter().copied().filter(|&i| cur.magnitudes[i] >= prev.magnitudes[i]).collect()
}

/// Which generator drives the sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalModel {
    Assumptions1(Model1Params),
    Assumptions2(Model2Params),
    Assumptions3(Model2Params),
}

impl SignalModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            SignalModel::Assumptions1(p) => p.validate(),
            SignalModel::Assumptions2(p) | SignalModel::Assumptions3(p) => p.validate(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            SignalModel::Assumptions1(p) => p.m,
            SignalModel::Assumptions2(p) | SignalModel::Assumptions3(p) => p.m,
        }
    }

    pub fn s_a(&self) -> usize {
        match self {
            SignalModel::Assumptions1(p) => p.s_a,
            SignalModel::Assumptions2(p) | SignalModel::Assumptions3(p) => p.s_a,
        }
    }

    pub fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SparseSequenceState> {
        match self {
            SignalModel::Assumptions1(p) => gen_model1_initial(p, rng),
            SignalModel::Assumptions2(p) | SignalModel::Assumptions3(p) => gen_model2_initial(p, rng),
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &SparseSequenceState, rng: &mut R) -> Result<SparseSequenceState> {
        match self {
            SignalModel::Assumptions1(p) => step_model1(state, p, rng),
            SignalModel::Assumptions2(p) => step_model2(state, p, false, rng),
            SignalModel::Assumptions3(p) => step_model2(state, p, true, rng),
        }
    }

    /// The claim [`verify_assumptions`] should test a generated sequence against.
    pub fn claim(&self) -> ModelClaim {
        match self {
            SignalModel::Assumptions1(p) => ModelClaim::Assumptions1(p.clone()),
            SignalModel::Assumptions2(p) => ModelClaim::Assumptions2 { params: p.clone(), early_removal: false },
            SignalModel::Assumptions3(p) => ModelClaim::Assumptions2 { params: p.clone(), early_removal: true },
        }
    }

    /// `frames` consecutive signals starting at `t = 0`, plus the final state.
    pub fn generate<R: Rng + ?Sized>(&self, frames: usize, rng: &mut R) -> Result<(Vec<Vec<f64>>, SparseSequenceState)> {
        if frames == 0 {
            return Err(Error::Input("at least one frame required".into()));
        }
        self.validate()?;
        let mut state = self.initial(rng)?;
        let mut xs = vec![state.x()];
        for _ in 1..frames {
            state = self.step(&state, rng)?;
            xs.push(state.x());
        }
        Ok((xs, state))
    }
}

/// `[x]`: nearest integer, halves rounded up.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

pub(crate) fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> i8 {
    if rng.gen::<bool>() {
        1
    } else {
        -1
    }
}

/// `k` distinct elements of `from`, uniformly at random, as a set.
pub(crate) fn choose<R: Rng + ?Sized>(rng: &mut R, from: &IndexSet, k: usize) -> IndexSet {
    debug_assert!(k <= from.len());
    rand::seq::index::sample(rng, from.len(), k).into_iter().map(|p| from.as_slice()[p]).collect()
}
