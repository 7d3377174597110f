//! Executable sufficient conditions for the stability results.
//!
//! Each checker evaluates the numbered conditions of one result with both
//! sides reported, derives the constants they depend on, and lists the
//! conclusions that follow. Conclusions carry a machine-checkable [`Claim`]
//! where one exists, so a simulation trace can be audited frame by frame
//! with [`check_claims`].
//!
//! Hypotheses that cannot be evaluated from the inputs (the initial-time
//! condition, the false-addition budget, the error-spread assumptions
//! without a trace) are listed under `assumptions` rather than as
//! conditions; they never change the verdict.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::bounds::{c1_constant, DELTA_STAR};
use super::rip::{Provenance, RipSource, RipValue};
use crate::error::{input, Error, Result};
use crate::numerics::{norm2, sub, IndexSet};
use crate::signal::AddRecord;
use crate::trackers::StepOutput;

/// The modified-CS error radius `C_1(0.207) eps`, rounded as stated.
pub const MODCS_RADIUS: f64 = 7.50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "3.2")]
    General,
    #[serde(rename = "3.3")]
    GeneralAddLsDel,
    #[serde(rename = "4.3")]
    Ladder,
    #[serde(rename = "4.8")]
    LadderAddLsDel,
    #[serde(rename = "5.5")]
    Realistic,
    #[serde(rename = "5.9")]
    RealisticAddLsDel,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::General,
        TheoremId::GeneralAddLsDel,
        TheoremId::Ladder,
        TheoremId::LadderAddLsDel,
        TheoremId::Realistic,
        TheoremId::RealisticAddLsDel,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TheoremId::General => "3.2",
            TheoremId::GeneralAddLsDel => "3.3",
            TheoremId::Ladder => "4.3",
            TheoremId::LadderAddLsDel => "4.8",
            TheoremId::Realistic => "5.5",
            TheoremId::RealisticAddLsDel => "5.9",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.label() == s.trim())
            .ok_or_else(|| Error::Input(format!("unknown theorem '{s}' (expected one of 3.2, 3.3, 4.3, 4.8, 5.5, 5.9)")))
    }

    /// Whether the result is about the Add-LS-Del tracker.
    pub fn add_ls_del(self) -> bool {
        matches!(self, TheoremId::GeneralAddLsDel | TheoremId::LadderAddLsDel | TheoremId::RealisticAddLsDel)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Incomplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "=")]
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
            Relation::Eq => (lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
            Relation::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub id: String,
    pub description: String,
    pub lhs: Option<f64>,
    pub relation: Relation,
    pub rhs: Option<f64>,
    pub verdict: Verdict,
    pub provenance: String,
}

/// A frame-level statement that [`check_claims`] can test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "bound", rename_all = "snake_case")]
pub enum Claim {
    /// `|N_t \ N_hat_t| <= k`
    FinalMissesAtMost(usize),
    /// `N_hat_t \ N_t` is empty.
    FinalExtrasEmpty,
    /// `|N_hat_t| <= k`
    FinalSupportAtMost(usize),
    /// Every final miss has magnitude below the bound.
    FinalMissesBelow(f64),
    /// `|N_t \ T_t| <= k`
    PriorMissesAtMost(usize),
    /// `|T_t \ N_t| <= k`
    PriorExtrasAtMost(usize),
    /// `|T_t| <= k`
    PriorSupportAtMost(usize),
    /// `|N_t \ T_add| <= k`
    AddMissesAtMost(usize),
    /// `|T_add \ N_t| <= k`
    AddExtrasAtMost(usize),
    /// `|T_add| <= k`
    AddSupportAtMost(usize),
    /// `||x - x_modcs|| <= v`
    ModcsErrorAtMost(f64),
    /// `||x - x_hat|| <= v`
    FinalErrorAtMost(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conclusion {
    pub id: String,
    pub statement: String,
    /// First frame the conclusion is claimed for.
    pub from_t: usize,
    pub claim: Option<Claim>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub theorem: TheoremId,
    pub verdict: Verdict,
    pub conditions: Vec<Condition>,
    pub constants: BTreeMap<String, f64>,
    pub conclusions: Vec<Conclusion>,
    pub assumptions: Vec<String>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn condition(&self, id: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.id == id)
    }

    /// The machine-checkable conclusions.
    pub fn claims(&self) -> impl Iterator<Item = (&Conclusion, &Claim)> + '_ {
        self.conclusions.iter().filter_map(|c| c.claim.as_ref().map(|k| (c, k)))
    }
}

/// Parameters for all checkers; each checker reads the subset it needs and
/// reports the first missing one as an input error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremParams {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "S_a")]
    pub s_a: usize,
    pub epsilon: f64,
    pub alpha: Option<f64>,
    pub alpha_add: Option<f64>,
    pub alpha_del: Option<f64>,
    /// False additions allowed per frame.
    pub f: Option<usize>,
    pub r: Option<f64>,
    pub d: Option<usize>,
    pub d0: Option<usize>,
    pub zeta_m: Option<f64>,
    pub zeta_l: Option<f64>,
    pub b: Option<usize>,
    pub d_min: Option<usize>,
    pub a_min: Option<f64>,
    pub r_min: Option<f64>,
    pub ell: Option<f64>,
    /// Proportional early removal in force; when false the decreasing-set
    /// size `b S_a` replaces `((b+1)/2) S_a`.
    pub early_removal: Option<bool>,
}

/// Signal-side evidence for the conditions that depend on the sequence.
#[derive(Clone, Copy, Debug, Default)]
pub struct SignalTrace<'a> {
    pub signals: Option<&'a [Vec<f64>]>,
    pub additions: Option<&'a [AddRecord]>,
}

fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Input(format!("missing parameter {name}")))
}

struct Builder {
    report: ConditionReport,
}

impl Builder {
    fn new(theorem: TheoremId) -> Self {
        Self {
            report: ConditionReport {
                theorem,
                verdict: Verdict::Incomplete,
                conditions: Vec::new(),
                constants: BTreeMap::new(),
                conclusions: Vec::new(),
                assumptions: Vec::new(),
                notes: Vec::new(),
            },
        }
    }

    fn cond(&mut self, id: &str, description: String, lhs: Option<f64>, relation: Relation, rhs: Option<f64>, provenance: impl Into<String>) {
        let verdict = match (lhs, rhs) {
            (Some(l), Some(r)) if relation.holds(l, r) => Verdict::Pass,
            (Some(_), Some(_)) => Verdict::Fail,
            _ => Verdict::Incomplete,
        };
        self.report.conditions.push(Condition { id: id.into(), description, lhs, relation, rhs, verdict, provenance: provenance.into() });
    }

    fn rip(&mut self, id: &str, description: String, value: &Option<RipValue>, relation: Relation, rhs: f64) {
        let provenance = value.as_ref().map_or("not available".to_string(), |v| v.provenance.label());
        self.cond(id, description, value.as_ref().map(|v| v.value), relation, Some(rhs), provenance);
    }

    /// `alpha = target`, reporting whether the value was given or derived.
    fn threshold(&mut self, id: &str, name: &str, given: Option<f64>, target: Option<f64>, formula: &str) -> Option<f64> {
        let (lhs, provenance) = match given {
            Some(v) => (Some(v), "parameter"),
            None => (target, "derived"),
        };
        self.cond(id, format!("{name} = {formula}"), lhs, Relation::Eq, target, provenance);
        if let Some(v) = lhs {
            self.constant(name, v);
        }
        lhs
    }

    fn constant(&mut self, name: &str, value: f64) {
        self.report.constants.insert(name.into(), value);
    }

    fn conclude(&mut self, id: &str, statement: impl Into<String>, from_t: usize, claim: Option<Claim>) {
        self.report.conclusions.push(Conclusion { id: id.into(), statement: statement.into(), from_t, claim });
    }

    fn assume(&mut self, text: impl Into<String>) {
        self.report.assumptions.push(text.into());
    }

    fn note(&mut self, text: impl Into<String>) {
        self.report.notes.push(text.into());
    }

    fn finish(mut self) -> ConditionReport {
        let c = &self.report.conditions;
        self.report.verdict = if c.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if c.iter().all(|c| c.verdict == Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::Incomplete
        };
        self.report
    }
}

fn check_common(p: &TheoremParams) -> Result<()> {
    if p.s == 0 || p.s_a == 0 {
        return input("S and S_a must be at least 1");
    }
    if !(p.epsilon >= 0.0 && p.epsilon.is_finite()) {
        return input("epsilon must be finite and nonnegative");
    }
    Ok(())
}

/// Spread constant, defaulting to the always-valid worst case `sqrt(S_a)`.
fn zeta(b: &mut Builder, given: Option<f64>, name: &str, s_a: usize) -> Result<f64> {
    let cap = (s_a as f64).sqrt();
    match given {
        Some(z) if z > 0.0 && z <= cap * (1.0 + 1e-12) => Ok(z),
        Some(z) => input(format!("{name} = {z} must lie in (0, sqrt(S_a)] = (0, {cap}]")),
        None => {
            b.note(format!("{name} not given; using sqrt(S_a) = {cap}, for which the spread assumption always holds"));
            Ok(cap)
        }
    }
}

fn support_changes(signals: &[Vec<f64>]) -> (usize, usize) {
    let mut max_support = 0;
    let mut max_change = 0;
    let mut prev: Option<IndexSet> = None;
    for x in signals {
        let n = IndexSet::support(x);
        max_support = max_support.max(n.len());
        if let Some(prev) = &prev {
            max_change = max_change.max(n.difference(prev).len()).max(prev.difference(&n).len());
        }
        prev = Some(n);
    }
    (max_support, max_change)
}

/// The sequence-level hypotheses shared by the general results.
fn trace_hypotheses(b: &mut Builder, p: &TheoremParams, trace: &SignalTrace) {
    match trace.signals {
        Some(signals) => {
            let (support, change) = support_changes(signals);
            b.cond("H1", "max_t |N_t| <= S".into(), Some(support as f64), Relation::Le, Some(p.s as f64), "trace");
            b.cond("H2", "max_t additions/removals <= S_a".into(), Some(change as f64), Relation::Le, Some(p.s_a as f64), "trace");
        }
        None => b.assume("|N_t| <= S and at most S_a additions and removals per frame"),
    }
}

/// `max_t |{i in N_t : |x_i| <= threshold}|`.
fn max_small(signals: &[Vec<f64>], threshold: f64) -> usize {
    signals.iter().map(|x| x.iter().filter(|v| **v != 0.0 && v.abs() <= threshold).count()).max().unwrap_or(0)
}

fn small_entries(b: &mut Builder, id: &str, p: &TheoremParams, trace: &SignalTrace, threshold: f64, what: &str) {
    b.constant("B_t threshold", threshold);
    match trace.signals {
        Some(signals) => b.cond(
            id,
            format!("max_t |B_t| <= S_a, B_t = {{i in N_t : |x_i| <= {what}}}"),
            Some(max_small(signals, threshold) as f64),
            Relation::Le,
            Some(p.s_a as f64),
            "trace",
        ),
        None => b.assume(format!("|B_t| <= S_a with B_t = {{i in N_t : |x_i| <= {what} = {threshold}}}")),
    }
}

fn initial_time(b: &mut Builder, text: &str) {
    b.assume(format!("initial time: n_0 large enough that {text} at t = 0 (checked at t = 0 by the conclusion verifier)"));
}

/// General results: bounded support size and bounded change counts only.
pub fn check_theorem_general(which: TheoremId, p: &TheoremParams, rip: &dyn RipSource, trace: &SignalTrace) -> Result<ConditionReport> {
    check_common(p)?;
    let (s, sa, eps) = (p.s, p.s_a, p.epsilon);
    let radius = MODCS_RADIUS * eps;
    let mut b = Builder::new(which);
    trace_hypotheses(&mut b, p, trace);
    let d6 = rip.delta(s + 6 * sa)?;
    if let Some(v) = d6.as_ref().filter(|v| v.value < 0.5) {
        b.constant("C1", c1_constant(v.value)?);
    }
    let final_claims = |b: &mut Builder| {
        b.conclude("1", format!("|final misses| <= S_a = {sa}"), 0, Some(Claim::FinalMissesAtMost(sa)));
        b.conclude("1", "final extras empty", 0, Some(Claim::FinalExtrasEmpty));
        b.conclude("1", format!("|final support| <= S = {s}"), 0, Some(Claim::FinalSupportAtMost(s)));
        b.conclude("2", format!("|Delta_t| <= 2 S_a = {}", 2 * sa), 1, Some(Claim::PriorMissesAtMost(2 * sa)));
        b.conclude("2", format!("|T_t| <= S = {s}"), 1, Some(Claim::PriorSupportAtMost(s)));
        b.conclude("2", format!("|Delta_e,t| <= S_a = {sa}"), 1, Some(Claim::PriorExtrasAtMost(sa)));
    };
    match which {
        TheoremId::General => {
            let alpha = b.threshold("1", "alpha", p.alpha, Some(radius), "7.50 eps");
            b.rip("2", format!("delta_(S+6S_a) = delta_{} <= 0.207", s + 6 * sa), &d6, Relation::Le, DELTA_STAR);
            small_entries(&mut b, "3", p, trace, alpha.unwrap_or(radius) + radius, "alpha + 7.50 eps");
            initial_time(&mut b, "the final estimate has no misses and no extras");
            final_claims(&mut b);
            b.conclude("3", format!("||x_t - x_hat_t|| <= 7.50 eps = {radius}"), 0, Some(Claim::FinalErrorAtMost(radius)));
        }
        TheoremId::GeneralAddLsDel => {
            let f = need(p.f, "f")?;
            let alpha_add = need(p.alpha_add, "alpha_add")?;
            let target = 1.12 * eps + 0.261 * (sa as f64).sqrt() * (alpha_add + radius);
            b.constant("alpha_add", alpha_add);
            b.constant("f", f as f64);
            let alpha_del = b.threshold("1b", "alpha_del", p.alpha_del, Some(target), "1.12 eps + 0.261 sqrt(S_a) (alpha_add + 7.50 eps)");
            b.rip("2", format!("delta_(S+6S_a) = delta_{} <= 0.207", s + 6 * sa), &d6, Relation::Le, DELTA_STAR);
            let d2 = rip.delta(s + 2 * sa + f)?;
            b.rip("2", format!("delta_(S+2S_a+f) = delta_{} <= 0.207", s + 2 * sa + f), &d2, Relation::Le, DELTA_STAR);
            let alpha_del = alpha_del.unwrap_or(target);
            small_entries(&mut b, "3", p, trace, (alpha_add + radius).max(2.0 * alpha_del), "max(alpha_add + 7.50 eps, 2 alpha_del)");
            b.assume(format!("alpha_add admits at most f = {f} false additions per frame"));
            initial_time(&mut b, "the final estimate has no misses and no extras");
            final_claims(&mut b);
            b.conclude("3", format!("|Delta_add,t| <= S_a = {sa}"), 0, Some(Claim::AddMissesAtMost(sa)));
            b.conclude("3", format!("|Delta_e,add,t| <= S_a + f = {}", sa + f), 0, Some(Claim::AddExtrasAtMost(sa + f)));
            b.conclude("3", format!("|T_add,t| <= S + S_a + f = {}", s + sa + f), 0, Some(Claim::AddSupportAtMost(s + sa + f)));
            b.conclude("4", format!("||x_t - x_hat_modcs|| <= 7.50 eps = {radius}"), 0, Some(Claim::ModcsErrorAtMost(radius)));
            let bound = 1.12 * eps + 1.261 * 2.0 * alpha_del * (sa as f64).sqrt();
            b.conclude("5", format!("||x_t - x_hat_t|| <= 1.12 eps + 1.261 (2 alpha_del) sqrt(S_a) = {bound}"), 0, Some(Claim::FinalErrorAtMost(bound)));
            b.note("final error bound parsed as 1.12 eps + 1.261 (2 alpha_del) sqrt(S_a): misses have magnitude <= 2 alpha_del and number at most S_a");
        }
        _ => return input(format!("theorem {which} is not a general result")),
    }
    Ok(b.finish())
}

/// `k_1 = max(1, 2 d_0 - 2)`.
pub fn k1(d0: usize) -> usize {
    (2 * d0).saturating_sub(2).max(1)
}

/// `k_2 = max(0, 2 d_0 - 3)`.
pub fn k2(d0: usize) -> usize {
    (2 * d0).saturating_sub(3)
}

/// `k_3 = sqrt(sum_{j<d_0} j^2 + sum_{j<d_0-1} j^2)`.
pub fn k3(d0: usize) -> f64 {
    let sq = |n: usize| (1..=n).map(|j| (j * j) as f64).sum::<f64>();
    (sq(d0.saturating_sub(1)) + sq(d0.saturating_sub(2))).sqrt()
}

fn theta_or_zero(rip: &dyn RipSource, s1: usize, s2: usize) -> Result<Option<RipValue>> {
    if s2 == 0 {
        return Ok(Some(RipValue { value: 0.0, provenance: Provenance::Derived }));
    }
    rip.theta(s1, s2)
}

/// Ladder model results.
pub fn check_theorem_model1(which: TheoremId, p: &TheoremParams, rip: &dyn RipSource) -> Result<ConditionReport> {
    check_common(p)?;
    let (s, sa, eps) = (p.s, p.s_a, p.epsilon);
    let r = need(p.r, "r")?;
    let d = need(p.d, "d")?;
    let d0 = need(p.d0, "d0")?;
    if d0 == 0 || d0 > d {
        return input(format!("d0 = {d0} must satisfy 1 <= d0 <= d = {d}"));
    }
    let radius = MODCS_RADIUS * eps;
    let sqrt_sa = (sa as f64).sqrt();
    let mut b = Builder::new(which);
    let zeta_m = zeta(&mut b, p.zeta_m, "zeta_M", sa)?;
    let spread_m = zeta_m / sqrt_sa * radius;
    let (k1, k2, k3) = (k1(d0), k2(d0), k3(d0));
    b.constant("k1", k1 as f64);
    b.constant("k2", k2 as f64);
    b.constant("k3", k3);
    b.constant("zeta_M", zeta_m);
    b.assume("the ladder change model holds (S_a additions and removals, magnitudes on r, ..., d r)");
    b.assume(format!("||x_t - x_hat_modcs||_inf <= zeta_M / sqrt(S_a) ||x_t - x_hat_modcs|| with zeta_M = {zeta_m}"));
    let final_claims = |b: &mut Builder| {
        b.conclude("1", format!("|final support| <= S = {s}"), 0, Some(Claim::FinalSupportAtMost(s)));
        b.conclude("1", "final extras empty", 0, Some(Claim::FinalExtrasEmpty));
        b.conclude("1", format!("final misses lie in S_t(d0) = {{0 < |x_i| < d0 r = {}}}", d0 as f64 * r), 0, Some(Claim::FinalMissesBelow((d0 as f64 - 0.5) * r)));
        b.conclude("1", format!("|final misses| <= 2 (d0 - 1) S_a = {}", 2 * (d0 - 1) * sa), 0, Some(Claim::FinalMissesAtMost(2 * (d0 - 1) * sa)));
        b.conclude("2", format!("|T_t| <= S = {s}"), 1, Some(Claim::PriorSupportAtMost(s)));
        b.conclude("2", format!("|Delta_e,t| <= S_a = {sa}"), 1, Some(Claim::PriorExtrasAtMost(sa)));
        b.conclude("2", format!("|Delta_t| <= k1 S_a = {}", k1 * sa), 1, Some(Claim::PriorMissesAtMost(k1 * sa)));
    };
    let index = s + (2 * k1 + 1) * sa;
    let d_main = rip.delta(index)?;
    if let Some(v) = d_main.as_ref().filter(|v| v.value < 0.5) {
        b.constant("C1", c1_constant(v.value)?);
    }
    match which {
        TheoremId::Ladder => {
            let alpha = b.threshold("1", "alpha", p.alpha, Some(spread_m), "zeta_M / sqrt(S_a) 7.50 eps");
            b.rip("2", format!("delta_(S+(2k1+1)S_a) = delta_{index} <= 0.207"), &d_main, Relation::Le, DELTA_STAR);
            let g = (alpha.unwrap_or(spread_m) + spread_m) / d0 as f64;
            b.constant("G", g);
            b.cond("3", "r >= G = (alpha + zeta_M / sqrt(S_a) 7.50 eps) / d0".into(), Some(r), Relation::Ge, Some(g), "parameter");
            b.note("G uses (alpha + zeta_M / sqrt(S_a) 7.50 eps) / d0; the printed definition carries a stray trailing factor eps");
            initial_time(&mut b, "final misses lie in S_0(d0), no extras, |final support| <= S");
            final_claims(&mut b);
            b.conclude("3", format!("||x_t - x_hat_modcs|| <= 7.50 eps = {radius}"), 1, Some(Claim::ModcsErrorAtMost(radius)));
        }
        TheoremId::LadderAddLsDel => {
            let f = need(p.f, "f")?;
            let alpha_add = need(p.alpha_add, "alpha_add")?;
            let zeta_l = zeta(&mut b, p.zeta_l, "zeta_L", sa)?;
            b.constant("zeta_L", zeta_l);
            b.constant("alpha_add", alpha_add);
            b.constant("f", f as f64);
            b.assume(format!("||(x_t - x_hat_add)_T_add||_inf <= zeta_L / sqrt(S_a) ||(x_t - x_hat_add)_T_add|| with zeta_L = {zeta_l}"));
            b.assume(format!("alpha_add admits at most f = {f} false additions per frame"));
            let theta = theta_or_zero(rip, s + sa + f, k2 * sa)?;
            let th = theta.as_ref().map(|v| v.value);
            if let Some(t) = th {
                b.constant("theta", t);
            }
            let target = th.map(|t| (2.0 / sa as f64).sqrt() * zeta_l * eps + 2.0 * k3 * t * zeta_l * r);
            let alpha_del = b.threshold(
                "1b",
                "alpha_del",
                p.alpha_del,
                target,
                "sqrt(2 / S_a) zeta_L eps + 2 k3 theta_(S+S_a+f, k2 S_a) zeta_L r",
            );
            b.rip("2a", format!("delta_(S+S_a(1+2k1)) = delta_{index} <= 0.207"), &d_main, Relation::Le, DELTA_STAR);
            let db = rip.delta(s + sa + f)?;
            b.rip("2b", format!("delta_(S+S_a+f) = delta_{} < 1/2", s + sa + f), &db, Relation::Lt, 0.5);
            let theta_cap = if k3 == 0.0 { f64::INFINITY } else { d0 as f64 / (8.0 * k3 * zeta_l) };
            b.rip("2c", format!("theta_(S+S_a+f, k2 S_a) = theta_({},{}) < d0 / (8 k3 zeta_L)", s + sa + f, k2 * sa), &theta, Relation::Lt, theta_cap);
            let g1 = (alpha_add + spread_m) / d0 as f64;
            let g2 = th.map(|t| {
                let den = d0 as f64 - 4.0 * k3 * t * zeta_l;
                if den > 0.0 {
                    2.0 * 2f64.sqrt() * zeta_l * eps / (sqrt_sa * den)
                } else {
                    f64::INFINITY
                }
            });
            b.constant("G1", g1);
            if let Some(g2) = g2 {
                b.constant("G2", g2);
            }
            b.cond("3", "r >= max(G1, G2)".into(), Some(r), Relation::Ge, g2.map(|g2| g1.max(g2)), "parameter");
            initial_time(&mut b, "final misses lie in S_0(d0), no extras, |final support| <= S");
            final_claims(&mut b);
            b.conclude("3", format!("|T_add,t| <= S + S_a + f = {}", s + sa + f), 0, Some(Claim::AddSupportAtMost(s + sa + f)));
            b.conclude("3", format!("|Delta_e,add,t| <= S_a + f = {}", sa + f), 0, Some(Claim::AddExtrasAtMost(sa + f)));
            b.conclude("3", format!("|Delta_add,t| <= k2 S_a = {}", k2 * sa), 0, Some(Claim::AddMissesAtMost(k2 * sa)));
            b.conclude("4", format!("||x_t - x_hat_modcs|| <= C1(S+S_a+2k1 S_a) eps <= 7.50 eps = {radius}"), 0, Some(Claim::ModcsErrorAtMost(radius)));
            let bound = 1.261 * k3 * sqrt_sa * r + 1.12 * eps;
            b.conclude("5", format!("||x_t - x_hat_t|| <= 1.261 k3 sqrt(S_a) r + 1.12 eps = {bound}"), 0, Some(Claim::FinalErrorAtMost(bound)));
            if alpha_del.is_none() {
                b.note("alpha_del could not be derived without theta");
            }
        }
        _ => return input(format!("theorem {which} is not a ladder-model result")),
    }
    Ok(b.finish())
}

/// `min{ell, min_j min_t (a_{j,t} + sum of the first d0 increments)}` from
/// the generator's addition records.
pub fn entry_magnitude(ell: f64, additions: &[AddRecord], d0: usize) -> f64 {
    additions.iter().map(|a| a.initial + a.increments.iter().take(d0).sum::<f64>()).fold(ell, f64::min)
}

/// Realistic-model results (early removal on by default; off gives the
/// `b S_a` variant).
pub fn check_theorem_model2(which: TheoremId, p: &TheoremParams, rip: &dyn RipSource, trace: &SignalTrace) -> Result<ConditionReport> {
    check_common(p)?;
    let (s, sa, eps) = (p.s, p.s_a, p.epsilon);
    let bb = need(p.b, "b")?;
    let d_min = need(p.d_min, "d_min")?;
    let d0 = need(p.d0, "d0")?;
    let ell = need(p.ell, "ell")?;
    if d0 == 0 || d0 > d_min {
        return input(format!("d0 = {d0} must satisfy 1 <= d0 <= d_min = {d_min}"));
    }
    let early = p.early_removal.unwrap_or(true);
    let radius = MODCS_RADIUS * eps;
    let sqrt_sa = (sa as f64).sqrt();
    let mut b = Builder::new(which);
    let zeta_m = zeta(&mut b, p.zeta_m, "zeta_M", sa)?;
    let spread_m = zeta_m / sqrt_sa * radius;
    b.constant("zeta_M", zeta_m);
    b.constant("ell", ell);
    // Size factor of the small-decreasing set.
    let pb = if early { (bb as f64 + 1.0) / 2.0 } else { bb as f64 };
    b.constant("decreasing-set factor", pb);
    if early {
        b.assume("the realistic change model with proportional early removal holds");
    } else {
        b.assume("the realistic change model holds (no early-removal guarantee)");
        b.note("b S_a replaces ((b+1)/2) S_a throughout");
    }
    b.assume(format!("||x_t - x_hat_modcs||_inf <= zeta_M / sqrt(S_a) ||x_t - x_hat_modcs|| with zeta_M = {zeta_m}"));
    let index = s + (3.0 * (pb + d0 as f64 + 1.0) * sa as f64).ceil() as usize;
    let d_main = rip.delta(index)?;
    b.constant("RIC index", index as f64);
    let miss_cap = ((pb + d0 as f64) * sa as f64).floor() as usize;
    let prior_cap = ((pb + d0 as f64 + 1.0) * sa as f64).floor() as usize;
    let entry = match (trace.additions, p.a_min, p.r_min) {
        (Some(adds), _, _) => Some((entry_magnitude(ell, adds, d0), "trace")),
        (None, Some(a), Some(r)) => Some((ell.min(a + d0 as f64 * r), "sufficient form min(ell, a_min + d0 r_min)")),
        _ => None,
    };
    let entry_cond = |b: &mut Builder, rhs: f64, what: &str| match entry {
        Some((lhs, provenance)) => b.cond("3", format!("min(ell, min_j (a_j + first d0 increments)) > {what}"), Some(lhs), Relation::Gt, Some(rhs), provenance),
        None => b.cond("3", format!("min(ell, min_j (a_j + first d0 increments)) > {what}"), None, Relation::Gt, Some(rhs), "needs a_min and r_min or an addition trace"),
    };
    let final_claims = |b: &mut Builder, id: &str, prior_id: &str| {
        b.conclude(id, format!("|final misses| <= {} = {miss_cap}", if early { "((b+1)/2 + d0) S_a" } else { "(b + d0) S_a" }), 0, Some(Claim::FinalMissesAtMost(miss_cap)));
        b.conclude(id, "final extras empty", 0, Some(Claim::FinalExtrasEmpty));
        b.conclude(id, format!("|final support| <= S = {s}"), 0, Some(Claim::FinalSupportAtMost(s)));
        b.conclude(prior_id, format!("|Delta_t| <= {prior_cap}"), 1, Some(Claim::PriorMissesAtMost(prior_cap)));
        b.conclude(prior_id, format!("|T_t| <= S = {s}"), 1, Some(Claim::PriorSupportAtMost(s)));
    };
    match which {
        TheoremId::Realistic => {
            let alpha = b.threshold("1a", "alpha", p.alpha, Some(spread_m), "zeta_M / sqrt(S_a) 7.50 eps");
            b.rip("2a", format!("delta_(S+3(pb+d0+1)S_a) = delta_{index} <= 0.207"), &d_main, Relation::Le, DELTA_STAR);
            entry_cond(&mut b, alpha.unwrap_or(spread_m) + spread_m, "alpha + zeta_M / sqrt(S_a) 7.50 eps");
            initial_time(&mut b, &format!("|final misses| <= {miss_cap} and no extras"));
            final_claims(&mut b, "1", "2");
            b.conclude("2", format!("|Delta_e,t| <= S_a = {sa}"), 1, Some(Claim::PriorExtrasAtMost(sa)));
            b.conclude("3", format!("||x_t - x_hat_t|| <= 7.50 eps = {radius}"), 0, Some(Claim::FinalErrorAtMost(radius)));
        }
        TheoremId::RealisticAddLsDel => {
            let f = need(p.f, "f")?;
            let alpha_add = need(p.alpha_add, "alpha_add")?;
            let zeta_l = zeta(&mut b, p.zeta_l, "zeta_L", sa)?;
            b.constant("zeta_L", zeta_l);
            b.constant("alpha_add", alpha_add);
            b.constant("f", f as f64);
            b.assume(format!("||(x_t - x_hat_add)_T_add||_inf <= zeta_L / sqrt(S_a) ||(x_t - x_hat_add)_T_add|| with zeta_L = {zeta_l}"));
            b.assume(format!("alpha_add admits at most f = {f} false additions per frame"));
            let h = (pb + d0 as f64).sqrt() * (alpha_add + spread_m);
            b.constant("h", h);
            let target = 1.12 * zeta_l / sqrt_sa * eps + 0.261 * zeta_l * h;
            let alpha_del = b.threshold("1b", "alpha_del", p.alpha_del, Some(target), "1.12 zeta_L / sqrt(S_a) eps + 0.261 zeta_L h").unwrap_or(target);
            b.rip("2a", format!("delta_(S+3(pb S_a+d0 S_a+S_a)) = delta_{index} <= 0.207"), &d_main, Relation::Le, DELTA_STAR);
            let db = rip.delta(s + sa + f)?;
            b.rip("2b", format!("delta_(S+S_a+f) = delta_{} <= 0.207", s + sa + f), &db, Relation::Le, DELTA_STAR);
            let s2 = ((pb + d0 as f64) * sa as f64).ceil() as usize;
            let theta = theta_or_zero(rip, s + sa + f, s2)?;
            b.rip("2c", format!("theta_(S+S_a+f, (pb+d0)S_a) = theta_({},{s2}) <= 0.207", s + sa + f), &theta, Relation::Le, DELTA_STAR);
            entry_cond(&mut b, (alpha_add + spread_m).max(2.0 * alpha_del), "max(alpha_add + zeta_M / sqrt(S_a) 7.50 eps, 2 alpha_del)");
            initial_time(&mut b, &format!("|final misses| <= {miss_cap} and no extras"));
            b.conclude("1", format!("final misses lie in SD_t and the additions of the last d0 = {d0} frames"), 0, None);
            final_claims(&mut b, "2", "3");
            b.conclude("4", format!("||x_t - x_hat_modcs|| <= 7.50 eps = {radius}"), 0, Some(Claim::ModcsErrorAtMost(radius)));
            let bound = 1.12 * eps + 1.261 * ((pb + d0 as f64) * sa as f64).sqrt() * (alpha_del + radius);
            b.conclude("5", format!("||x_t - x_hat_t|| <= 1.12 eps + 1.261 sqrt((pb + d0) S_a) (alpha_del + 7.50 eps) = {bound}"), 0, Some(Claim::FinalErrorAtMost(bound)));
            b.note("final error bound parsed as 1.12 eps + 1.261 sqrt((pb + d0) S_a) (alpha_del + 7.50 eps)");
        }
        _ => return input(format!("theorem {which} is not a realistic-model result")),
    }
    Ok(b.finish())
}

/// Dispatches to the checker for `which`.
pub fn check_theorem(which: TheoremId, p: &TheoremParams, rip: &dyn RipSource, trace: &SignalTrace) -> Result<ConditionReport> {
    match which {
        TheoremId::General | TheoremId::GeneralAddLsDel => check_theorem_general(which, p, rip, trace),
        TheoremId::Ladder | TheoremId::LadderAddLsDel => check_theorem_model1(which, p, rip),
        TheoremId::Realistic | TheoremId::RealisticAddLsDel => check_theorem_model2(which, p, rip, trace),
    }
}

/// Violations of the report's machine-checkable conclusions on one frame.
pub fn check_claims(report: &ConditionReport, x: &[f64], out: &StepOutput) -> Vec<String> {
    let n = IndexSet::support(x);
    let mut violations = Vec::new();
    let add = out.add_support.as_ref();
    for (c, claim) in report.claims() {
        if out.t < c.from_t {
            continue;
        }
        let count = |set: IndexSet, k: usize| (set.len() > k).then(|| format!("{} (observed {})", c.statement, set.len()));
        let err = |v: f64, bound: f64| (v > bound * (1.0 + 1e-12)).then(|| format!("{} (observed {v})", c.statement));
        let v = match claim {
            Claim::FinalMissesAtMost(k) => count(n.difference(&out.support), *k),
            Claim::FinalExtrasEmpty => count(out.support.difference(&n), 0),
            Claim::FinalSupportAtMost(k) => count(out.support.clone(), *k),
            Claim::FinalMissesBelow(limit) => n
                .difference(&out.support)
                .iter()
                .find(|&&i| x[i].abs() >= *limit)
                .map(|&i| format!("{} (index {i} missed at |x| = {})", c.statement, x[i].abs())),
            Claim::PriorMissesAtMost(k) => count(n.difference(&out.prior), *k),
            Claim::PriorExtrasAtMost(k) => count(out.prior.difference(&n), *k),
            Claim::PriorSupportAtMost(k) => count(out.prior.clone(), *k),
            Claim::AddMissesAtMost(k) => add.and_then(|a| count(n.difference(a), *k)),
            Claim::AddExtrasAtMost(k) => add.and_then(|a| count(a.difference(&n), *k)),
            Claim::AddSupportAtMost(k) => add.and_then(|a| count(a.clone(), *k)),
            Claim::ModcsErrorAtMost(bound) => err(norm2(&sub(x, &out.x_hat_modcs)), *bound),
            Claim::FinalErrorAtMost(bound) => err(norm2(&sub(x, &out.x_hat)), *bound),
        };
        if let Some(v) = v {
            violations.push(format!("t = {}: {v}", out.t));
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::rip::{AssertedRip, BruteForceRip, DEFAULT_BUDGET};
    use crate::sensing::gen_gaussian_unit_columns;

    fn asserted(delta: f64) -> AssertedRip {
        AssertedRip { deltas: [(1000, delta)].into_iter().collect(), thetas: BTreeMap::new() }
    }

    fn general(eps: f64) -> TheoremParams {
        TheoremParams { s: 3, s_a: 1, epsilon: eps, ..Default::default() }
    }

    #[test]
    fn ids_round_trip() {
        for id in TheoremId::ALL {
            assert_eq!(TheoremId::parse(id.label()).unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{}\"", id.label()));
        }
        assert!(TheoremId::parse("9.9").is_err());
    }

    #[test]
    fn k_constants() {
        assert_eq!((k1(2), k2(2), k3(2)), (2, 1, 1.0));
        assert_eq!((k1(1), k2(1), k3(1)), (1, 0, 0.0));
        // d0 = 3: 1 + 4 + 1 = 6
        assert!((k3(3) - 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_sequence_passes_with_good_delta() {
        let zeros = vec![vec![0.0; 10]; 4];
        let trace = SignalTrace { signals: Some(&zeros), additions: None };
        let r = check_theorem_general(TheoremId::General, &general(0.1), &asserted(0.1), &trace).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r:#?}");
        assert_eq!(r.condition("3").unwrap().lhs, Some(0.0));
    }

    #[test]
    fn wrong_alpha_fails_condition_one() {
        let p = TheoremParams { alpha: Some(0.5), ..general(0.1) };
        let r = check_theorem_general(TheoremId::General, &p, &asserted(0.1), &SignalTrace::default()).unwrap();
        assert_eq!(r.condition("1").unwrap().verdict, Verdict::Fail);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn bruteforce_delta_reported_on_both_sides() {
        let a = gen_gaussian_unit_columns(10, 16, 7).unwrap();
        let rip = BruteForceRip::single(a.clone(), DEFAULT_BUDGET);
        let r = check_theorem_general(TheoremId::General, &general(0.01), &rip, &SignalTrace::default()).unwrap();
        let c = r.condition("2").unwrap();
        let direct = crate::analysis::ric_bruteforce(&a, 9, DEFAULT_BUDGET).unwrap().delta;
        assert_eq!(c.lhs, Some(direct));
        assert_eq!(c.rhs, Some(0.207));
        assert!(direct > 0.207);
        assert_eq!(c.verdict, Verdict::Fail);
    }

    #[test]
    fn missing_delta_is_incomplete() {
        let rip = AssertedRip::default();
        let r = check_theorem_general(TheoremId::General, &general(0.1), &rip, &SignalTrace::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Incomplete);
    }

    #[test]
    fn ladder_g_matches_worst_case_restatement() {
        let eps = 0.02;
        let p = TheoremParams { r: Some(1.0), d: Some(4), d0: Some(2), zeta_m: Some(1.0), ..general(eps) };
        let r = check_theorem_model1(TheoremId::Ladder, &p, &asserted(0.1)).unwrap();
        // zeta_M = sqrt(S_a) = 1, d0 = 2: G = 2 * 7.50 eps / 2.
        assert!((r.constants["G"] - 7.5 * eps).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Pass);
        let bad = TheoremParams { d0: Some(5), ..p };
        assert!(check_theorem_model1(TheoremId::Ladder, &bad, &asserted(0.1)).is_err());
    }

    #[test]
    fn ladder_d0_one_claims_no_misses() {
        let p = TheoremParams { r: Some(1.0), d: Some(3), d0: Some(1), ..general(0.001) };
        let r = check_theorem_model1(TheoremId::Ladder, &p, &asserted(0.1)).unwrap();
        assert!(r.claims().any(|(_, c)| *c == Claim::FinalMissesAtMost(0)));
    }

    #[test]
    fn ladder_add_ls_del_thresholds() {
        let eps = 0.01;
        let mut rip = asserted(0.1);
        rip.thetas.insert((5, 1), 0.05);
        let p = TheoremParams {
            r: Some(1.0),
            d: Some(4),
            d0: Some(2),
            f: Some(1),
            alpha_add: Some(0.05),
            zeta_m: Some(0.9),
            zeta_l: Some(0.8),
            ..general(eps)
        };
        let r = check_theorem_model1(TheoremId::LadderAddLsDel, &p, &rip).unwrap();
        let expected = 2f64.sqrt() * 0.8 * eps + 2.0 * 0.05 * 0.8;
        assert!((r.constants["alpha_del"] - expected).abs() < 1e-15);
        let g2 = 2.0 * 2f64.sqrt() * 0.8 * eps / (2.0 - 4.0 * 0.05 * 0.8);
        assert!((r.constants["G2"] - g2).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Pass, "{r:#?}");
    }

    #[test]
    fn realistic_index_and_h() {
        let p = TheoremParams {
            s: 20,
            s_a: 2,
            epsilon: 0.0,
            b: Some(3),
            d_min: Some(3),
            d0: Some(2),
            ell: Some(3.0),
            a_min: Some(1.0),
            r_min: Some(1.0),
            f: Some(2),
            alpha_add: Some(0.1),
            ..Default::default()
        };
        let r = check_theorem_model2(TheoremId::Realistic, &p, &asserted(0.1), &SignalTrace::default()).unwrap();
        assert_eq!(r.constants["RIC index"], (20 + 15 * 2) as f64);
        // eps = 0: the magnitude requirement collapses to 0.
        assert_eq!(r.condition("3").unwrap().rhs, Some(0.0));
        assert_eq!(r.verdict, Verdict::Pass);
        let r = check_theorem_model2(TheoremId::RealisticAddLsDel, &p, &asserted(0.1), &SignalTrace::default()).unwrap();
        assert!((r.constants["h"] - 2.0 * 0.1).abs() < 1e-15);
        let corollary = TheoremParams { early_removal: Some(false), ..p };
        let r = check_theorem_model2(TheoremId::Realistic, &corollary, &asserted(0.1), &SignalTrace::default()).unwrap();
        assert_eq!(r.constants["RIC index"], (20 + 3 * 6 * 2) as f64);
    }

    #[test]
    fn entry_magnitude_uses_first_d0_increments() {
        let adds = vec![
            AddRecord { index: 0, t: 1, initial: 0.5, increments: vec![0.2, 0.3, 5.0] },
            AddRecord { index: 1, t: 2, initial: 0.1, increments: vec![1.0, 1.0] },
        ];
        assert!((entry_magnitude(9.0, &adds, 2) - 1.0).abs() < 1e-15);
        assert_eq!(entry_magnitude(0.7, &adds, 2), 0.7);
    }

    #[test]
    fn pure_predicate() {
        let p = general(0.05);
        let a = check_theorem(TheoremId::General, &p, &asserted(0.3), &SignalTrace::default()).unwrap();
        let b = check_theorem(TheoremId::General, &p, &asserted(0.3), &SignalTrace::default()).unwrap();
        assert_eq!(a, b);
    }
}
