//! Exact restricted isometry / orthogonality constants by enumeration.
//!
//! Both constants only depend on the Gram matrix `G = A'A`, so it is formed
//! once and every subset reads a principal (or off-diagonal) block of it.
//! The work is split on the first index of the subset and spread over the
//! rayon pool; min/max reductions are exact, so the result does not depend
//! on scheduling.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::numerics::DenseMatrix;

/// Default cap on the number of subsets (or subset pairs) enumerated.
pub const DEFAULT_BUDGET: u64 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub s: usize,
    /// `1 - min sigma_min^2(A_T)` over `|T| = s`.
    pub delta_left: f64,
    /// `max sigma_max^2(A_T) - 1` over `|T| = s`, floored at 0.
    pub delta_right: f64,
    pub delta: f64,
    pub subsets_examined: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocEstimate {
    pub s1: usize,
    pub s2: usize,
    pub theta: f64,
    pub pairs_examined: u64,
}

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn check_budget(required: u128, budget: u64) -> Result<()> {
    if required > budget as u128 {
        return Err(Error::Budget { required, budget });
    }
    Ok(())
}

/// Calls `f` on every `k`-subset of `lo..hi` (ascending) with `prefix` prepended.
fn for_each_subset(prefix: &mut Vec<usize>, lo: usize, hi: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == 0 {
        f(prefix);
        return;
    }
    for i in lo..=(hi - k) {
        prefix.push(i);
        for_each_subset(prefix, i + 1, hi, k - 1, f);
        prefix.pop();
    }
}

/// Runs `visit` on every `k`-subset of `0..m`, in parallel over the first
/// element, and folds per-thread accumulators with `merge`.
fn par_subsets<T, V, M>(m: usize, k: usize, init: T, visit: V, merge: M) -> T
where
    T: Clone + Send + Sync,
    V: Fn(&mut T, &[usize]) + Sync,
    M: Fn(T, T) -> T + Sync + Send,
{
    if k == 0 {
        let mut acc = init;
        visit(&mut acc, &[]);
        return acc;
    }
    (0..=(m - k))
        .into_par_iter()
        .map(|first| {
            let mut acc = init.clone();
            let mut prefix = vec![first];
            for_each_subset(&mut prefix, first + 1, m, k - 1, &mut |t| visit(&mut acc, t));
            acc
        })
        .reduce(|| init.clone(), &merge)
}

fn gram(a: &DenseMatrix) -> DMatrix<f64> {
    let g = a.as_nalgebra();
    g.transpose() * g
}

fn block(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| g[(rows[i], cols[j])])
}

/// Exact `delta_S` over all `|T| = s` column subsets.
///
/// `s` above the number of columns is clamped to it: with the "all
/// `|T| <= S`" reading of the definition, larger sets add nothing.
pub fn ric_bruteforce(a: &DenseMatrix, s: usize, budget: u64) -> Result<RipEstimate> {
    let m = a.cols();
    let k = s.min(m);
    let required = binomial(m, k);
    check_budget(required, budget)?;
    if k == 0 {
        return Ok(RipEstimate { s, delta_left: 0.0, delta_right: 0.0, delta: 0.0, subsets_examined: 0 });
    }
    let g = gram(a);
    let (lo, hi, count) = par_subsets(
        m,
        k,
        (f64::INFINITY, f64::NEG_INFINITY, 0u64),
        |acc, t| {
            let eig = block(&g, t, t).symmetric_eigenvalues();
            acc.0 = acc.0.min(eig.min());
            acc.1 = acc.1.max(eig.max());
            acc.2 += 1;
        },
        |x, y| (x.0.min(y.0), x.1.max(y.1), x.2 + y.2),
    );
    let delta_left = (1.0 - lo.max(0.0)).max(0.0);
    let delta_right = (hi - 1.0).max(0.0);
    Ok(RipEstimate { s, delta_left, delta_right, delta: delta_left.max(delta_right), subsets_examined: count })
}

/// Exact `theta_{s1,s2}`: the largest `||A_T1' A_T2||` over disjoint pairs.
pub fn roc_bruteforce(a: &DenseMatrix, s1: usize, s2: usize, budget: u64) -> Result<RocEstimate> {
    let m = a.cols();
    if s1 + s2 > m {
        return input(format!("no disjoint pair of sizes {s1} and {s2} among {m} columns"));
    }
    let required = binomial(m, s1).saturating_mul(binomial(m - s1, s2));
    check_budget(required, budget)?;
    if s1 == 0 || s2 == 0 {
        return Ok(RocEstimate { s1, s2, theta: 0.0, pairs_examined: 0 });
    }
    let g = gram(a);
    let (theta, count) = par_subsets(
        m,
        s1,
        (0.0f64, 0u64),
        |acc, t1| {
            let rest: Vec<usize> = (0..m).filter(|i| !t1.contains(i)).collect();
            for_each_subset(&mut Vec::with_capacity(s2), 0, rest.len(), s2, &mut |pos| {
                let t2: Vec<usize> = pos.iter().map(|&p| rest[p]).collect();
                let b = block(&g, t1, &t2);
                // The smaller of B B' and B' B carries the same top eigenvalue.
                let sq = if s1 <= s2 { &b * b.transpose() } else { b.transpose() * &b };
                acc.0 = acc.0.max(sq.symmetric_eigenvalues().max().max(0.0).sqrt());
                acc.1 += 1;
            });
        },
        |x, y| (x.0.max(y.0), x.1 + y.1),
    );
    Ok(RocEstimate { s1, s2, theta, pairs_examined: count })
}

/// Where a constant used by a condition came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Exhaustive enumeration over the given number of subsets.
    BruteForce { subsets: u64, matrices: usize },
    /// Supplied by the caller and not checked.
    AssertedUnverified,
    /// A caller-supplied bound for a larger index, valid by monotonicity.
    AssertedByMonotonicity { from: String },
    Derived,
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::BruteForce { subsets, matrices } => format!("brute force ({subsets} subsets, {matrices} matrices)"),
            Provenance::AssertedUnverified => "asserted (unverified)".into(),
            Provenance::AssertedByMonotonicity { from } => format!("asserted (unverified), bounded by {from}"),
            Provenance::Derived => "derived".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipValue {
    pub value: f64,
    pub provenance: Provenance,
}

/// Access to `delta_S` and `theta_{S1,S2}` for the condition checkers.
///
/// `Ok(None)` means the value is not available (the report is then
/// incomplete); errors such as a budget refusal are propagated.
pub trait RipSource: Sync {
    fn delta(&self, s: usize) -> Result<Option<RipValue>>;
    fn theta(&self, s1: usize, s2: usize) -> Result<Option<RipValue>>;
}

/// Exact constants of one or more matrices; with several (a time-varying
/// `A_t`), each constant is the maximum over them. Values are memoized.
pub struct BruteForceRip {
    matrices: Vec<DenseMatrix>,
    budget: u64,
    deltas: Mutex<HashMap<usize, RipValue>>,
    thetas: Mutex<HashMap<(usize, usize), RipValue>>,
}

impl BruteForceRip {
    pub fn new(matrices: Vec<DenseMatrix>, budget: u64) -> Result<Self> {
        if matrices.is_empty() {
            return input("at least one matrix required");
        }
        let m = matrices[0].cols();
        if matrices.iter().any(|a| a.cols() != m) {
            return input("all matrices must have the same number of columns");
        }
        Ok(Self { matrices, budget, deltas: Mutex::default(), thetas: Mutex::default() })
    }

    pub fn single(a: DenseMatrix, budget: u64) -> Self {
        Self { matrices: vec![a], budget, deltas: Mutex::default(), thetas: Mutex::default() }
    }

    pub fn cols(&self) -> usize {
        self.matrices[0].cols()
    }
}

impl RipSource for BruteForceRip {
    fn delta(&self, s: usize) -> Result<Option<RipValue>> {
        if let Some(v) = self.deltas.lock().unwrap().get(&s) {
            return Ok(Some(v.clone()));
        }
        let mut value = 0.0f64;
        let mut subsets = 0;
        for a in &self.matrices {
            let est = ric_bruteforce(a, s, self.budget)?;
            value = value.max(est.delta);
            subsets += est.subsets_examined;
        }
        let v = RipValue { value, provenance: Provenance::BruteForce { subsets, matrices: self.matrices.len() } };
        self.deltas.lock().unwrap().insert(s, v.clone());
        Ok(Some(v))
    }

    fn theta(&self, s1: usize, s2: usize) -> Result<Option<RipValue>> {
        if let Some(v) = self.thetas.lock().unwrap().get(&(s1, s2)) {
            return Ok(Some(v.clone()));
        }
        // Past the column count the pair constraint is unsatisfiable; the
        // delta bound is the best available statement.
        if s1 + s2 > self.cols() {
            return self.delta(s1 + s2);
        }
        let mut value = 0.0f64;
        let mut subsets = 0;
        for a in &self.matrices {
            let est = roc_bruteforce(a, s1, s2, self.budget)?;
            value = value.max(est.theta);
            subsets += est.pairs_examined;
        }
        let v = RipValue { value, provenance: Provenance::BruteForce { subsets, matrices: self.matrices.len() } };
        self.thetas.lock().unwrap().insert((s1, s2), v.clone());
        Ok(Some(v))
    }
}

/// Caller-supplied upper bounds. A missing index is filled from the nearest
/// larger asserted one (`delta` is monotone in `S`, `theta` in both
/// arguments, and `theta_{S1,S2} <= delta_{S1+S2}`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssertedRip {
    pub deltas: BTreeMap<usize, f64>,
    pub thetas: BTreeMap<(usize, usize), f64>,
}

impl RipSource for AssertedRip {
    fn delta(&self, s: usize) -> Result<Option<RipValue>> {
        Ok(self.deltas.range(s..).next().map(|(&k, &value)| RipValue {
            value,
            provenance: if k == s {
                Provenance::AssertedUnverified
            } else {
                Provenance::AssertedByMonotonicity { from: format!("delta_{k}") }
            },
        }))
    }

    fn theta(&self, s1: usize, s2: usize) -> Result<Option<RipValue>> {
        if s2 == 0 || s1 == 0 {
            return Ok(Some(RipValue { value: 0.0, provenance: Provenance::Derived }));
        }
        if let Some(&value) = self.thetas.get(&(s1, s2)) {
            return Ok(Some(RipValue { value, provenance: Provenance::AssertedUnverified }));
        }
        let dominating = self
            .thetas
            .iter()
            .filter(|(&(a, b), _)| a >= s1 && b >= s2)
            .min_by(|x, y| x.1.total_cmp(y.1));
        if let Some((&(a, b), &value)) = dominating {
            return Ok(Some(RipValue { value, provenance: Provenance::AssertedByMonotonicity { from: format!("theta_{a},{b}") } }));
        }
        Ok(self.delta(s1 + s2)?.map(|d| RipValue {
            value: d.value,
            provenance: Provenance::AssertedByMonotonicity { from: format!("delta_{}", s1 + s2) },
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{columns, extreme_singular_values, IndexSet};
    use crate::sensing::gen_gaussian_unit_columns;

    /// Cyclic Jacobi on a small symmetric matrix; returns the eigenvalues.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    /// Descending-order recursive enumeration with explicit Gram blocks.
    fn delta_oracle(a: &DenseMatrix, s: usize) -> (f64, f64) {
        fn rec(start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == 0 {
                out.push(cur.clone());
                return;
            }
            for i in (0..start).rev() {
                if i + 1 < k {
                    break;
                }
                cur.push(i);
                rec(i, k - 1, cur, out);
                cur.pop();
            }
        }
        let mut subsets = Vec::new();
        rec(a.cols(), s, &mut Vec::new(), &mut subsets);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in subsets {
            let g: Vec<Vec<f64>> = t
                .iter()
                .map(|&i| t.iter().map(|&j| (0..a.rows()).map(|r| a.get(r, i) * a.get(r, j)).sum()).collect())
                .collect();
            for e in jacobi_eigenvalues(g) {
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
        (1.0 - lo.max(0.0), (hi - 1.0).max(0.0))
    }

    fn orthonormal(n: usize, seed: u64) -> DenseMatrix {
        let g = gen_gaussian_unit_columns(n, n, seed).unwrap();
        let q = g.as_nalgebra().clone().qr().q();
        DenseMatrix::from_fn(n, n, |i, j| q[(i, j)])
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(16, 9), 11440);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(200, 0), 1);
    }

    #[test]
    fn orthonormal_has_zero_constants() {
        let q = orthonormal(8, 3);
        for s in 1..=8 {
            assert!(ric_bruteforce(&q, s, DEFAULT_BUDGET).unwrap().delta < 1e-10);
        }
        assert!(roc_bruteforce(&q, 2, 3, DEFAULT_BUDGET).unwrap().theta < 1e-10);
    }

    #[test]
    fn duplicated_column_has_unit_left_constant() {
        let mut a = gen_gaussian_unit_columns(6, 9, 11).unwrap();
        for r in 0..6 {
            a.set(r, 4, a.get(r, 1));
        }
        let est = ric_bruteforce(&a, 2, DEFAULT_BUDGET).unwrap();
        assert!((est.delta_left - 1.0).abs() < 1e-12);
        assert_eq!(est.subsets_examined, 36);
    }

    #[test]
    fn matches_reenumeration_oracle() {
        for seed in 0..5 {
            let a = gen_gaussian_unit_columns(8, 12, 100 + seed).unwrap();
            let est = ric_bruteforce(&a, 3, DEFAULT_BUDGET).unwrap();
            let (left, right) = delta_oracle(&a, 3);
            assert!((est.delta_left - left).abs() < 1e-9, "{} vs {left}", est.delta_left);
            assert!((est.delta_right - right).abs() < 1e-9);
            assert_eq!(est.subsets_examined, 220);
        }
    }

    #[test]
    fn left_constant_matches_svd_path() {
        let a = gen_gaussian_unit_columns(7, 10, 5).unwrap();
        let mut lo: f64 = f64::INFINITY;
        for i in 0..10 {
            for j in i + 1..10 {
                let (smin, _) = extreme_singular_values(&columns(&a, &IndexSet::new(vec![i, j]).unwrap()).unwrap()).unwrap();
                lo = lo.min(smin * smin);
            }
        }
        let est = ric_bruteforce(&a, 2, DEFAULT_BUDGET).unwrap();
        assert!((est.delta_left - (1.0 - lo)).abs() < 1e-9);
    }

    #[test]
    fn roc_of_singletons_is_coherence() {
        let a = gen_gaussian_unit_columns(6, 10, 21).unwrap();
        let mut mu: f64 = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    let ip: f64 = (0..6).map(|r| a.get(r, i) * a.get(r, j)).sum();
                    mu = mu.max(ip.abs());
                }
            }
        }
        let est = roc_bruteforce(&a, 1, 1, DEFAULT_BUDGET).unwrap();
        assert!((est.theta - mu).abs() < 1e-12);
        assert_eq!(est.pairs_examined, 90);
    }

    #[test]
    fn budget_is_enforced() {
        let a = gen_gaussian_unit_columns(5, 30, 1).unwrap();
        assert!(matches!(ric_bruteforce(&a, 10, 1000), Err(Error::Budget { .. })));
        assert!(matches!(roc_bruteforce(&a, 3, 3, 1000), Err(Error::Budget { .. })));
    }

    #[test]
    fn asserted_values_fill_by_monotonicity() {
        let rip = AssertedRip { deltas: [(9, 0.1), (12, 0.3)].into_iter().collect(), thetas: BTreeMap::new() };
        let d = rip.delta(7).unwrap().unwrap();
        assert_eq!(d.value, 0.1);
        assert!(matches!(d.provenance, Provenance::AssertedByMonotonicity { .. }));
        assert_eq!(rip.delta(12).unwrap().unwrap().provenance, Provenance::AssertedUnverified);
        assert!(rip.delta(13).unwrap().is_none());
        assert_eq!(rip.theta(4, 5).unwrap().unwrap().value, 0.1);
    }

    #[test]
    fn monotone_in_s_and_theta_below_delta() {
        for seed in 0..4 {
            let a = gen_gaussian_unit_columns(8, 12, 40 + seed).unwrap();
            let d: Vec<f64> = (1..=5).map(|s| ric_bruteforce(&a, s, DEFAULT_BUDGET).unwrap().delta).collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            let th = roc_bruteforce(&a, 2, 2, DEFAULT_BUDGET).unwrap().theta;
            assert!(th <= d[3] + 1e-12);
        }
    }
}
