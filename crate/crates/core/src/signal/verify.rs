//! Support-change statistics and model-condition checks for arbitrary
//! sparse sequences.

use serde::{Deserialize, Serialize};

use super::{Model1Params, Model2Params};
use crate::error::{input, Result};
use crate::numerics::IndexSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelClaim {
    Assumptions1(Model1Params),
    Assumptions2 { params: Model2Params, early_removal: bool },
    /// Statistics only.
    ObserveOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub pass: bool,
    /// First violation, empty when the clause holds.
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub frames: usize,
    pub m: usize,
    pub max_support: usize,
    pub max_added: usize,
    pub max_removed: usize,
    /// `max(max_added, max_removed)`.
    pub s_a: usize,
    /// Range of initial magnitudes over additions at `t > 0`.
    pub initial_range: Option<(f64, f64)>,
    /// Range of magnitude increments while a new element keeps growing.
    pub rate_range: Option<(f64, f64)>,
    /// Range of growth durations.
    pub duration_range: Option<(usize, usize)>,
    /// Longest decrease-to-removal delay; `None` when nothing was removed.
    /// Under a model-2 claim it is measured from leaving the large set, which
    /// is what the `b` bound constrains.
    pub removal_delay: Option<usize>,
    pub clauses: Vec<Clause>,
    /// The sufficient conditions on the change counts, reported separately.
    pub count_conditions: Vec<Clause>,
    pub pass: bool,
}

struct Checker {
    clauses: Vec<Clause>,
}

impl Checker {
    fn clause(&mut self, name: &str, first_violation: Option<String>) {
        self.clauses.push(Clause {
            name: name.into(),
            pass: first_violation.is_none(),
            detail: first_violation.unwrap_or_default(),
        });
    }
}

fn widen<T: PartialOrd + Copy>(range: &mut Option<(T, T)>, v: T) {
    *range = Some(match *range {
        None => (v, v),
        Some((lo, hi)) => (if v < lo { v } else { lo }, if v > hi { v } else { hi }),
    });
}

struct Seq<'a> {
    x: &'a [Vec<f64>],
    support: Vec<IndexSet>,
    added: Vec<IndexSet>,
    removed: Vec<IndexSet>,
}

impl Seq<'_> {
    fn mag(&self, t: usize, i: usize) -> f64 {
        self.x[t][i].abs()
    }

    /// Union of `A_tau` for `lo <= tau <= hi`, `tau >= 1`.
    fn added_between(&self, lo: isize, hi: isize) -> IndexSet {
        let mut out = IndexSet::empty();
        for tau in lo.max(1)..=hi {
            if let Some(a) = self.added.get(tau as usize) {
                out = out.union(a);
            }
        }
        out
    }
}

pub fn verify_assumptions(sequence: &[Vec<f64>], claim: &ModelClaim) -> Result<ModelReport> {
    let Some(first) = sequence.first() else {
        return input("empty sequence");
    };
    let m = first.len();
    if let Some(t) = sequence.iter().position(|x| x.len() != m) {
        return input(format!("frame {t} has length {}, frame 0 has length {m}", sequence[t].len()));
    }
    if sequence.iter().flatten().any(|v| !v.is_finite()) {
        return input("sequence contains non-finite values");
    }
    let support: Vec<IndexSet> = sequence.iter().map(|x| IndexSet::support(x)).collect();
    let mut added = vec![IndexSet::empty()];
    let mut removed = vec![IndexSet::empty()];
    for t in 1..sequence.len() {
        added.push(support[t].difference(&support[t - 1]));
        removed.push(support[t - 1].difference(&support[t]));
    }
    let seq = Seq { x: sequence, support, added, removed };

    let mut report = ModelReport {
        frames: sequence.len(),
        m,
        max_support: seq.support.iter().map(IndexSet::len).max().unwrap_or(0),
        max_added: seq.added.iter().map(IndexSet::len).max().unwrap_or(0),
        max_removed: seq.removed.iter().map(IndexSet::len).max().unwrap_or(0),
        s_a: 0,
        initial_range: None,
        rate_range: None,
        duration_range: None,
        removal_delay: None,
        clauses: Vec::new(),
        count_conditions: Vec::new(),
        pass: true,
    };
    report.s_a = report.max_added.max(report.max_removed);

    let frames = sequence.len();
    for t in 1..frames {
        for &i in &seq.added[t] {
            widen(&mut report.initial_range, seq.mag(t, i));
            let mut d = 0;
            let mut tau = t + 1;
            while tau < frames && seq.mag(tau, i) > seq.mag(tau - 1, i) {
                widen(&mut report.rate_range, seq.mag(tau, i) - seq.mag(tau - 1, i));
                d += 1;
                tau += 1;
            }
            widen(&mut report.duration_range, d);
        }
        for &i in &seq.removed[t] {
            // start of the final strictly decreasing run
            let mut s = t;
            while s >= 1 && seq.mag(s, i) < seq.mag(s - 1, i) && seq.mag(s - 1, i) > 0.0 {
                s -= 1;
            }
            let delay = (t - (s + 1).min(t)).max(1);
            report.removal_delay = Some(report.removal_delay.map_or(delay, |b: usize| b.max(delay)));
        }
    }

    match claim {
        ModelClaim::ObserveOnly => {}
        ModelClaim::Assumptions1(p) => {
            let mut c = Checker { clauses: Vec::new() };
            check_model1(&seq, p, &mut c);
            report.clauses = c.clauses;
        }
        ModelClaim::Assumptions2 { params, early_removal } => {
            let mut c = Checker { clauses: Vec::new() };
            let mut counts = Checker { clauses: Vec::new() };
            let delay = check_model2(&seq, params, *early_removal, &mut c, &mut counts);
            if delay.is_some() {
                report.removal_delay = delay;
            }
            report.clauses = c.clauses;
            report.count_conditions = counts.clauses;
        }
    }
    report.pass = report.clauses.iter().all(|c| c.pass);
    Ok(report)
}

fn first_failure(mut it: impl Iterator<Item = Option<String>>) -> Option<String> {
    it.find_map(|v| v)
}

fn sign_persistence(seq: &Seq, c: &mut Checker) {
    c.clause(
        "sign persistence",
        first_failure((1..seq.x.len()).map(|t| {
            seq.support[t]
                .intersection(&seq.support[t - 1])
                .iter()
                .find(|&&i| seq.x[t][i].signum() != seq.x[t - 1][i].signum())
                .map(|i| format!("index {i} flips sign at t = {t}"))
        })),
    );
}

fn check_model1(seq: &Seq, p: &Model1Params, c: &mut Checker) {
    let frames = seq.x.len();
    let level = |t: usize, i: usize| -> Option<usize> {
        let q = seq.mag(t, i) / p.r;
        let k = q.round();
        ((q - k).abs() <= 1e-9 * q.max(1.0) && k >= 1.0 && k <= p.d as f64).then_some(k as usize)
    };
    c.clause(
        "support size equals S",
        first_failure(
            (0..frames).map(|t| (seq.support[t].len() != p.s).then(|| format!("|N_{t}| = {}", seq.support[t].len()))),
        ),
    );
    c.clause(
        "S_a additions and removals",
        first_failure((1..frames).map(|t| {
            (seq.added[t].len() != p.s_a || seq.removed[t].len() != p.s_a).then(|| {
                format!("t = {t}: {} added, {} removed", seq.added[t].len(), seq.removed[t].len())
            })
        })),
    );
    c.clause(
        "magnitudes on the ladder",
        first_failure((0..frames).map(|t| {
            seq.support[t]
                .iter()
                .find(|&&i| level(t, i).is_none())
                .map(|i| format!("|x_{t}[{i}]| = {} is not a multiple of r in [r, d r]", seq.mag(t, *i)))
        })),
    );
    c.clause(
        "ladder counts",
        first_failure((0..frames).map(|t| {
            (1..=p.d).find_map(|j| {
                let below = seq.support[t].iter().filter(|&&i| seq.mag(t, i) < (j as f64 - 0.5) * p.r).count();
                (below != 2 * (j - 1) * p.s_a).then(|| format!("t = {t}: {below} elements below {j} r"))
            })
        })),
    );
    c.clause(
        "single-level moves",
        first_failure((1..frames).map(|t| {
            seq.support[t].intersection(&seq.support[t - 1]).iter().find_map(|&i| match (level(t - 1, i), level(t, i)) {
                (Some(a), Some(b)) if a.abs_diff(b) <= 1 => None,
                _ => Some(format!("index {i} jumps levels at t = {t}")),
            })
        })),
    );
    c.clause(
        "enter and leave at r",
        first_failure((1..frames).map(|t| {
            let bad_add = seq.added[t].iter().find(|&&i| level(t, i) != Some(1));
            let bad_rem = seq.removed[t].iter().find(|&&i| level(t - 1, i) != Some(1));
            bad_add
                .map(|i| format!("index {i} added at {} at t = {t}", seq.mag(t, *i)))
                .or(bad_rem.map(|i| format!("index {i} removed from {} at t = {t}", seq.mag(t - 1, *i))))
        })),
    );
    sign_persistence(seq, c);
}

fn check_model2(seq: &Seq, p: &Model2Params, early: bool, c: &mut Checker, counts: &mut Checker) -> Option<usize> {
    let frames = seq.x.len();
    let large: Vec<IndexSet> = (0..frames)
        .map(|t| {
            let recent = seq.added_between(t as isize - p.d_min as isize + 1, t as isize);
            seq.support[t].iter().copied().filter(|&i| !recent.contains(i) && seq.mag(t, i) >= p.ell).collect()
        })
        .collect();
    let decaying: Vec<IndexSet> =
        (0..frames).map(|t| if t == 0 { IndexSet::empty() } else { large[t - 1].difference(&large[t]) }).collect();
    let delay = (1..frames)
        .flat_map(|t| decaying[t].iter().filter_map(move |&i| (t..frames).find(|&tau| seq.mag(tau, i) == 0.0).map(|tau| tau - t)).collect::<Vec<_>>())
        .max();

    c.clause(
        "initial support at most S",
        (seq.support[0].len() > p.s).then(|| format!("|N_0| = {}", seq.support[0].len())),
    );
    c.clause(
        "support at most S",
        first_failure(
            (0..frames).map(|t| (seq.support[t].len() > p.s).then(|| format!("|N_{t}| = {}", seq.support[t].len()))),
        ),
    );
    c.clause(
        "at most S_a additions, removals and decays",
        first_failure((1..frames).map(|t| {
            let (a, r, b) = (seq.added[t].len(), seq.removed[t].len(), decaying[t].len());
            (a > p.s_a || r > p.s_a || b > p.s_a).then(|| format!("t = {t}: {a} added, {r} removed, {b} decaying"))
        })),
    );
    c.clause(
        "additions grow for d_min steps",
        first_failure((1..frames).map(|t| {
            seq.added[t].iter().find_map(|&i| {
                (t + 1..=(t + p.d_min).min(frames - 1))
                    .find(|&tau| seq.mag(tau, i) == 0.0 || seq.mag(tau, i) < seq.mag(tau - 1, i))
                    .map(|tau| format!("index {i} added at t = {t} shrinks at t = {tau}"))
            })
        })),
    );
    let tol = 1e-9 * p.ell;
    c.clause(
        "addition magnitudes",
        first_failure((1..frames).map(|t| {
            seq.added[t].iter().find_map(|&i| {
                if seq.mag(t, i) < p.a_min - tol {
                    return Some(format!("index {i} added at {} < a_min", seq.mag(t, i)));
                }
                (t + 1..=(t + p.d_min).min(frames - 1))
                    .find(|&tau| seq.mag(tau, i) - seq.mag(tau - 1, i) < p.r_min - tol)
                    .map(|tau| format!("index {i} grows by less than r_min at t = {tau}"))
            })
        })),
    );
    c.clause(
        "decaying elements removed within b",
        first_failure((1..frames).map(|t| {
            decaying[t].iter().find_map(|&i| {
                let mut tau = t;
                while tau < frames && seq.mag(tau, i) > 0.0 {
                    if tau >= t + p.b {
                        return Some(format!("index {i} decaying since t = {t} is still nonzero at t = {tau}"));
                    }
                    if tau + 1 < frames && seq.mag(tau + 1, i) >= seq.mag(tau, i) {
                        return Some(format!("index {i} decaying since t = {t} stops decreasing at t = {}", tau + 1));
                    }
                    tau += 1;
                }
                None
            })
        })),
    );
    let sd_bound = if early { (p.b + 1) as f64 / 2.0 } else { p.b as f64 } * p.s_a as f64;
    c.clause(
        "decreasing set bound",
        first_failure((1..frames).map(|t| {
            let sd = seq.support[t]
                .iter()
                .filter(|&&i| !large[t].contains(i) && seq.mag(t, i) < seq.mag(t - 1, i))
                .count();
            (sd as f64 > sd_bound).then(|| format!("|SD_{t}| = {sd} > {sd_bound}"))
        })),
    );
    if early {
        c.clause(
            "early removal quotas",
            first_failure((1..frames).map(|t| {
                let size = decaying[t].len();
                (1..p.b).filter(|k| t + k < frames).find_map(|k| {
                    // an element may be re-added later, so look for any zero in between
                    let gone = decaying[t].iter().filter(|&&i| (t + 1..=t + k).any(|tau| seq.mag(tau, i) == 0.0)).count();
                    (gone < (k * size).div_ceil(p.b))
                        .then(|| format!("only {gone} of {size} elements decaying since t = {t} removed by t = {}", t + k))
                })
            })),
        );
    }
    sign_persistence(seq, c);

    // Sufficient conditions on the counts.
    let s_a_t: Vec<usize> = seq.added.iter().map(IndexSet::len).collect();
    let s_d_t: Vec<usize> = decaying.iter().map(IndexSet::len).collect();
    counts.clause(
        "counts at most S_a",
        first_failure(
            (1..frames).map(|t| (s_a_t[t] > p.s_a || s_d_t[t] > p.s_a).then(|| format!("t = {t}: S_a,t = {}, S_d,t = {}", s_a_t[t], s_d_t[t]))),
        ),
    );
    let l0 = large[0].len();
    let s0 = seq.support[0].len();
    counts.clause(
        "initial large set",
        ((p.d_min + p.b + 1) * p.s_a > l0 || l0 > s0 || s0 > p.s)
            .then(|| format!("(d_min + b + 1) S_a = {}, |L_0| = {l0}, S_0 = {s0}, S = {}", (p.d_min + p.b + 1) * p.s_a, p.s)),
    );
    let prefix = |v: &[usize], upto: isize| -> usize { if upto < 1 { 0 } else { v[1..=(upto as usize).min(v.len() - 1)].iter().sum() } };
    counts.clause(
        "cumulative balance",
        first_failure((1..frames).map(|t| {
            let t = t as isize;
            let adds = prefix(&s_a_t, t);
            let decays = prefix(&s_d_t, t - p.b as isize);
            let cap = l0 + prefix(&s_a_t, t - p.b as isize - p.d_min as isize - 1);
            (adds > decays || decays > cap).then(|| format!("t = {t}: {adds} added, {decays} decayed, bound {cap}"))
        })),
    );
    delay
}
