//! Weighted l1 minimization `min |b_{T^c}|_1  s.t.  |y - A b|_2 <= eps`.
//!
//! The solver is an over-relaxed scaled ADMM on the split `b = z`:
//! the `b` step is the Euclidean projection onto the data-constraint set
//! (computed through the eigendecomposition of `A A'`), the `z` step is
//! soft thresholding on `T^c` and the identity on `T`. Once the iterate
//! has settled on a support the KKT system on that support is solved in
//! closed form; if the resulting point passes the sign and dual checks it
//! is the exact optimum and is returned directly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::numerics::{columns, least_squares, norm1, norm2, norm_inf, sub, DenseMatrix, IndexSet};

#[derive(Clone, Copy, Debug)]
pub struct WeightedL1Problem<'a> {
    pub a: &'a DenseMatrix,
    pub y: &'a [f64],
    pub epsilon: f64,
    /// Entries with zero weight.
    pub known: &'a IndexSet,
}

impl<'a> WeightedL1Problem<'a> {
    pub fn new(a: &'a DenseMatrix, y: &'a [f64], epsilon: f64, known: &'a IndexSet) -> Result<Self> {
        let p = Self { a, y, epsilon, known };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.y.len() != self.a.rows() {
            return input(format!("y has length {}, A has {} rows", self.y.len(), self.a.rows()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return input(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return input("y has non-finite entries");
        }
        if let Some(max) = self.known.max_index() {
            if max >= self.a.cols() {
                return input(format!("known support index {max} out of range"));
            }
        }
        Ok(())
    }

    /// `|b_{T^c}|_1`.
    pub fn objective(&self, beta: &[f64]) -> f64 {
        beta.iter().enumerate().filter(|(i, _)| !self.known.contains(*i)).map(|(_, v)| v.abs()).sum()
    }

    pub fn residual(&self, beta: &[f64]) -> f64 {
        norm2(&sub(self.y, &self.a.mul_vec(beta)))
    }

    /// Absolute feasibility slack `1e-6 * max(1, |y|)`.
    pub fn feas_tol(&self) -> f64 {
        1e-6 * norm2(self.y).max(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    /// Multiplier on the automatic initial penalty.
    pub penalty: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iterations: 5000, primal_tol: 1e-7, dual_tol: 1e-7, penalty: 1.0 }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.primal_tol > 0.0) || !(self.dual_tol > 0.0) || !(self.penalty > 0.0) {
            return input("solver settings must all be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub beta: Vec<f64>,
    pub iterations: usize,
    /// `eps - |y - A b|`.
    pub feasibility_slack: f64,
    pub objective: f64,
    pub converged: bool,
    /// The returned point satisfied the exact KKT conditions on its support.
    pub exact: bool,
}

/// Eigendecomposition of `A A'` plus `A' Q`, reusable across solves that
/// share the matrix.
#[derive(Clone, Debug)]
pub struct SensingFactor {
    q: DMatrix<f64>,
    lambda: Vec<f64>,
    w: DMatrix<f64>,
    positive: Vec<bool>,
}

impl SensingFactor {
    pub fn new(a: &DenseMatrix) -> Self {
        let an = a.as_nalgebra();
        let gram = an * an.transpose();
        let eig = SymmetricEigen::new(gram);
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
        let cut = 1e-12 * lmax.max(f64::MIN_POSITIVE);
        let lambda: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let positive = lambda.iter().map(|&v| v > cut).collect();
        let w = an.tr_mul(&eig.eigenvectors);
        Self { q: eig.eigenvectors, lambda, w, positive }
    }

    /// Part of `|A b - y|` no choice of `b` can remove.
    fn residual_floor(&self, y: &[f64]) -> f64 {
        let qy = self.q.tr_mul(&DVector::from_column_slice(y));
        qy.iter().zip(&self.positive).filter(|(_, p)| !**p).map(|(v, _)| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean projection of `v` onto `{b : |A b - y| <= eps}`.
    fn project(&self, a: &DenseMatrix, y: &DVector<f64>, eps: f64, v: &DVector<f64>, out: &mut DVector<f64>) {
        let mut r0 = y.clone();
        r0.gemv(1.0, a.as_nalgebra(), v, -1.0);
        if r0.norm() <= eps {
            out.copy_from(v);
            return;
        }
        let qv = self.q.tr_mul(&r0);
        let floor2: f64 = qv.iter().zip(&self.positive).filter(|(_, p)| !**p).map(|(x, _)| x * x).sum();
        let mut coef = DVector::zeros(qv.len());
        if eps == 0.0 || floor2.sqrt() >= eps {
            for i in 0..qv.len() {
                if self.positive[i] {
                    coef[i] = qv[i] / self.lambda[i];
                }
            }
        } else {
            let mu = self.multiplier(&qv, eps);
            for i in 0..qv.len() {
                if self.positive[i] {
                    coef[i] = mu * qv[i] / (1.0 + mu * self.lambda[i]);
                }
            }
        }
        out.copy_from(v);
        out.gemv(-1.0, &self.w, &coef, 1.0);
    }

    /// Root of `sum q_i^2 / (1 + mu l_i)^2 = eps^2` by Newton on
    /// `1/sqrt(f) - 1/eps`, which is concave and increasing in `mu`.
    fn multiplier(&self, qv: &DVector<f64>, eps: f64) -> f64 {
        let mut mu = 0.0f64;
        for _ in 0..100 {
            let (mut f, mut df) = (0.0, 0.0);
            for i in 0..qv.len() {
                let d = 1.0 + mu * self.lambda[i];
                let q2 = qv[i] * qv[i];
                f += q2 / (d * d);
                df += self.lambda[i] * q2 / (d * d * d);
            }
            let h = 1.0 / f.sqrt() - 1.0 / eps;
            if h.abs() <= 1e-15 / eps || df <= 0.0 {
                break;
            }
            let step = h / (df * f.powf(-1.5));
            mu -= step;
            if step.abs() <= 1e-15 * mu.abs() {
                break;
            }
        }
        mu.max(0.0)
    }
}

struct Polished {
    beta: Vec<f64>,
    exact: bool,
}

/// Solves the KKT system on `support` for the sign pattern `signs`
/// (`signs[i]` is used on `support \ T`).
fn polish(p: &WeightedL1Problem, support: &IndexSet, signs: &[f64]) -> Option<Polished> {
    let a = p.a;
    let n = a.rows();
    if support.len() > n {
        return None;
    }
    let m = a.cols();
    let feas_tol = p.feas_tol();
    if support.is_empty() {
        let r = norm2(p.y);
        return (r <= p.epsilon + feas_tol).then(|| Polished { beta: vec![0.0; m], exact: true });
    }
    let sub_a = columns(a, support).ok()?;
    let svd = sub_a.as_nalgebra().clone().svd(true, true);
    let s = &svd.singular_values;
    if !(s.min() > crate::numerics::RANK_TOLERANCE * s.max()) {
        return None;
    }
    let u = svd.u.as_ref()?;
    let vt = svd.v_t.as_ref()?;
    let y = DVector::from_column_slice(p.y);
    let uty = u.tr_mul(&y);
    let c = DVector::from_iterator(
        support.len(),
        support.iter().map(|&i| if p.known.contains(i) { 0.0 } else { signs[i] }),
    );
    // b_ls = V S^-1 U'y,  d = (A'A)^-1 c = V S^-2 V' c
    let vtc = vt * &c;
    let mut b_ls = DVector::zeros(support.len());
    let mut d = DVector::zeros(support.len());
    let mut ctd = 0.0;
    for k in 0..s.len() {
        let col = vt.row(k).transpose();
        b_ls.axpy(uty[k] / s[k], &col, 1.0);
        d.axpy(vtc[k] / (s[k] * s[k]), &col, 1.0);
        ctd += (vtc[k] / s[k]).powi(2);
    }
    let r_ls2 = (y.norm_squared() - uty.norm_squared()).max(0.0);
    let eps = p.epsilon;
    let c_is_zero = c.iter().all(|v| *v == 0.0);

    let (coef, rho) = if c_is_zero {
        if r_ls2.sqrt() > eps + feas_tol {
            return None;
        }
        (b_ls, 0.0)
    } else if eps > 0.0 {
        let gap = eps * eps - r_ls2;
        if gap <= 0.0 {
            return None;
        }
        let rho = (gap / ctd).sqrt();
        (&b_ls - &d * rho, rho)
    } else {
        if r_ls2.sqrt() > feas_tol {
            return None;
        }
        (b_ls, 0.0)
    };
    let beta = support.scatter(coef.as_slice(), m);
    if beta.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let r = sub(p.y, &a.mul_vec(&beta));
    if norm2(&r) > eps + feas_tol {
        return None;
    }
    let signs_ok = support
        .iter()
        .zip(c.iter())
        .all(|(&i, &ci)| ci == 0.0 || beta[i] * ci > 0.0);
    let exact = signs_ok && {
        if c_is_zero {
            true
        } else if eps > 0.0 {
            let g = a.tr_mul_vec(&r);
            let bound = rho * (1.0 + 1e-9) + 1e-14 * norm_inf(&g);
            (0..m).filter(|j| !support.contains(*j)).all(|j| g[j].abs() <= bound)
        } else {
            // min-norm dual  A_S (A_S'A_S)^-1 c = U S^-1 V' c
            let mut dual = DVector::zeros(n);
            for k in 0..s.len() {
                dual.axpy(vtc[k] / s[k], &u.column(k), 1.0);
            }
            let g = a.tr_mul_vec(dual.as_slice());
            (0..m).filter(|j| !support.contains(*j)).all(|j| g[j].abs() <= 1.0 + 1e-9)
        }
    };
    Some(Polished { beta, exact })
}

fn result_for(p: &WeightedL1Problem, beta: Vec<f64>, iterations: usize, converged: bool, exact: bool) -> SolverResult {
    let residual = p.residual(&beta);
    SolverResult {
        objective: p.objective(&beta),
        feasibility_slack: p.epsilon - residual,
        beta,
        iterations,
        converged,
        exact,
    }
}

/// Modified-CS: `min |b_{T^c}|_1 s.t. |y - A b| <= eps`.
pub fn solve_modcs(p: &WeightedL1Problem, cfg: &SolverConfig) -> Result<SolverResult> {
    let factor = SensingFactor::new(p.a);
    solve_modcs_with(p, &factor, cfg)
}

/// Noisy l1: the same program with `T` empty.
pub fn solve_noisy_l1(a: &DenseMatrix, y: &[f64], epsilon: f64, cfg: &SolverConfig) -> Result<SolverResult> {
    let empty = IndexSet::empty();
    solve_modcs(&WeightedL1Problem::new(a, y, epsilon, &empty)?, cfg)
}

/// As [`solve_modcs`] with a precomputed factor of `A`.
pub fn solve_modcs_with(p: &WeightedL1Problem, factor: &SensingFactor, cfg: &SolverConfig) -> Result<SolverResult> {
    p.validate()?;
    cfg.validate()?;
    let a = p.a;
    let (n, m) = (a.rows(), a.cols());
    let eps = p.epsilon;
    let feas_tol = p.feas_tol();
    let floor = factor.residual_floor(p.y);
    if floor > eps + feas_tol {
        return Err(Error::Infeasible(format!(
            "no point reaches |y - A b| <= {eps}; the smallest residual is {floor:e}"
        )));
    }
    // a zero-objective point is optimal if one exists
    if let Some(z) = polish(p, p.known, &vec![0.0; m]) {
        return Ok(result_for(p, z.beta, 0, true, true));
    }

    let weighted: Vec<bool> = (0..m).map(|i| !p.known.contains(i)).collect();
    let y = DVector::from_column_slice(p.y);
    let scale = norm_inf(&a.tr_mul_vec(p.y)).max(1e-300);
    let mut rho = cfg.penalty * 10.0 / scale;
    let relax = 1.6;

    let mut beta = DVector::zeros(m);
    let mut z = DVector::<f64>::zeros(m);
    let mut u = DVector::<f64>::zeros(m);
    let mut v = DVector::zeros(m);
    let mut last_pattern: Vec<i8> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let _ = n;

    for k in 1..=cfg.max_iterations {
        iterations = k;
        v.copy_from(&z);
        v -= &u;
        factor.project(a, &y, eps, &v, &mut beta);
        let z_old = z.clone();
        let thr = 1.0 / rho;
        for i in 0..m {
            let h = relax * beta[i] + (1.0 - relax) * z_old[i];
            let t = h + u[i];
            z[i] = if weighted[i] { t.signum() * (t.abs() - thr).max(0.0) } else { t };
            u[i] = t - z[i];
        }
        let r = (&beta - &z).norm();
        let s = rho * (&z - &z_old).norm();
        let eps_pri = cfg.primal_tol * beta.norm().max(z.norm()) + 1e-300;
        let eps_dual = cfg.dual_tol * rho * u.norm() + 1e-300;

        if k % 10 == 0 {
            let pattern: Vec<i8> = z.iter().map(|v| v.signum() as i8 * (*v != 0.0) as i8).collect();
            if pattern != last_pattern {
                let support: IndexSet =
                    (0..m).filter(|&i| z[i] != 0.0 && weighted[i]).chain(p.known.iter().copied()).collect();
                let signs: Vec<f64> = z.iter().map(|v| v.signum()).collect();
                if let Some(pol) = polish(p, &support, &signs) {
                    if pol.exact {
                        return Ok(result_for(p, pol.beta, k, true, true));
                    }
                }
                last_pattern = pattern;
            }
        }
        if r <= eps_pri && s <= eps_dual {
            converged = true;
            break;
        }
        if k % 10 == 0 {
            if r > 10.0 * s {
                rho *= 2.0;
                u /= 2.0;
            } else if s > 10.0 * r {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }

    // best feasible candidate among the polished, thresholded and projected points
    let mut candidates: Vec<(Vec<f64>, bool)> = Vec::new();
    let support: IndexSet =
        (0..m).filter(|&i| z[i] != 0.0 && weighted[i]).chain(p.known.iter().copied()).collect();
    let signs: Vec<f64> = z.iter().map(|v| v.signum()).collect();
    if let Some(pol) = polish(p, &support, &signs) {
        if pol.exact {
            return Ok(result_for(p, pol.beta, iterations, true, true));
        }
        candidates.push((pol.beta, false));
    }
    candidates.push((z.as_slice().to_vec(), false));
    candidates.push((beta.as_slice().to_vec(), false));
    let best = candidates
        .into_iter()
        .filter(|(b, _)| p.residual(b) <= eps + feas_tol)
        .min_by(|x, y| p.objective(&x.0).total_cmp(&p.objective(&y.0)));
    let beta = match best {
        Some((b, _)) => b,
        None => {
            // the projection is feasible up to rounding; fall back to it
            beta.as_slice().to_vec()
        }
    };
    Ok(result_for(p, beta, iterations, converged, false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub pass: bool,
    pub residual: f64,
    pub epsilon: f64,
    /// Dual scale used for the alignment test.
    pub rho: Option<f64>,
    /// Largest violation found (0 on a pass).
    pub max_violation: f64,
    pub reason: String,
}

/// First-order optimality check for `beta`.
///
/// For `eps > 0` the test is on `g = A'(y - A b)`: `g_T = 0`, `g_i = rho
/// sign(b_i)` on the weighted support and `|g_i| <= rho` elsewhere. For
/// `eps = 0` the residual vanishes, so instead a dual vector in `range(A')`
/// is searched for with the same sign/box pattern.
pub fn kkt_certificate(p: &WeightedL1Problem, beta: &[f64], tol: f64) -> CertReport {
    let a = p.a;
    let m = a.cols();
    let eps = p.epsilon;
    let scale = norm_inf(&a.tr_mul_vec(p.y)).max(1.0);
    let r = sub(p.y, &a.mul_vec(beta));
    let residual = norm2(&r);
    let slack = p.feas_tol();
    let fail = |reason: String, viol: f64, rho: Option<f64>| CertReport {
        pass: false,
        residual,
        epsilon: eps,
        rho,
        max_violation: viol,
        reason,
    };
    if beta.len() != m || beta.iter().any(|v| !v.is_finite()) {
        return fail("beta has the wrong length or non-finite entries".into(), f64::INFINITY, None);
    }
    if residual > eps * (1.0 + tol) + slack {
        return fail(format!("infeasible: residual {residual:e} > {eps:e}"), residual - eps, None);
    }
    let objective = p.objective(beta);
    if eps > 0.0 && residual < eps * (1.0 - tol) {
        return if objective <= tol * scale {
            CertReport { pass: true, residual, epsilon: eps, rho: None, max_violation: 0.0, reason: "interior point with zero objective".into() }
        } else {
            fail(format!("interior point with nonzero objective {objective:e}"), objective, None)
        };
    }
    if objective <= tol * scale {
        return CertReport { pass: true, residual, epsilon: eps, rho: None, max_violation: 0.0, reason: "feasible point with zero objective".into() };
    }
    let big: Vec<usize> = (0..m).filter(|&i| !p.known.contains(i) && beta[i].abs() > tol * scale).collect();
    if eps > 0.0 {
        let g = a.tr_mul_vec(&r);
        let t_viol = p.known.iter().map(|&i| g[i].abs()).fold(0.0, f64::max);
        if t_viol > tol * scale {
            return fail(format!("gradient on the known support is {t_viol:e}"), t_viol, None);
        }
        let aligned: Vec<f64> = big.iter().map(|&i| g[i] * beta[i].signum()).collect();
        let rest = (0..m)
            .filter(|&i| !p.known.contains(i) && !big.contains(&i))
            .map(|i| g[i].abs())
            .fold(0.0, f64::max);
        let hi = aligned.iter().copied().fold(rest, f64::max);
        let lo = aligned.iter().copied().fold(f64::INFINITY, f64::min);
        let rho = hi / (1.0 + tol);
        if lo < rho * (1.0 - tol) {
            return fail(format!("gradient alignment spread: min {lo:e}, needed {:e}", rho * (1.0 - tol)), rho * (1.0 - tol) - lo, Some(rho));
        }
        return CertReport { pass: true, residual, epsilon: eps, rho: Some(rho), max_violation: 0.0, reason: "kkt conditions hold".into() };
    }
    match dual_search(a, p.known, &big, beta, tol) {
        Ok(()) => CertReport { pass: true, residual, epsilon: eps, rho: Some(1.0), max_violation: 0.0, reason: "dual certificate found".into() },
        Err(viol) => fail(format!("no dual certificate within tolerance (violation {viol:e})"), viol, Some(1.0)),
    }
}

/// Smallest `s` such that some `g = A' lambda` lies within `s` of the box
/// `{g : g_S = sign(b_S), g_T = 0, |g_rest| <= 1}`, found as a small LP.
/// Succeeds when `s <= tol`.
fn dual_search(a: &DenseMatrix, known: &IndexSet, big: &[usize], beta: &[f64], tol: f64) -> std::result::Result<(), f64> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let (n, m) = (a.rows(), a.cols());
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let lambda: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let slack = lp.add_var(1.0, (0.0, f64::INFINITY));
    for i in 0..m {
        let (lo, hi) = if known.contains(i) {
            (0.0, 0.0)
        } else if big.contains(&i) {
            (beta[i].signum(), beta[i].signum())
        } else {
            (-1.0, 1.0)
        };
        let col = a.column(i);
        // lo - s <= a_i' lambda <= hi + s
        let upper: Vec<_> = lambda.iter().zip(col).map(|(&v, &c)| (v, c)).chain([(slack, -1.0)]).collect();
        lp.add_constraint(upper.as_slice(), ComparisonOp::Le, hi);
        let lower: Vec<_> = lambda.iter().zip(col).map(|(&v, &c)| (v, c)).chain([(slack, 1.0)]).collect();
        lp.add_constraint(lower.as_slice(), ComparisonOp::Ge, lo);
    }
    match lp.solve() {
        Ok(sol) if sol.objective() <= tol => Ok(()),
        Ok(sol) => Err(sol.objective()),
        Err(_) => Err(f64::INFINITY),
    }
}

/// Exhaustive search over supports for `eps = 0`: every `U` with `|U| <= n`
/// and `A_U` of full column rank is solved exactly; the candidate with the
/// smallest `|b_{T^c}|_1` wins.
pub fn bp_enumeration_oracle(a: &DenseMatrix, y: &[f64], known: &IndexSet) -> Result<(Vec<f64>, f64)> {
    let (n, m) = (a.rows(), a.cols());
    if m > 14 || n > 10 {
        return input(format!("enumeration oracle limited to m <= 14, n <= 10 (got {n}x{m})"));
    }
    if y.len() != n {
        return input("y has the wrong length");
    }
    let accept = 1e-9 * norm2(y).max(1.0);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1u32 << m) {
        if mask.count_ones() as usize > n {
            continue;
        }
        let u: IndexSet = (0..m).filter(|j| mask >> j & 1 == 1).collect();
        let beta = if u.is_empty() {
            vec![0.0; m]
        } else {
            match least_squares(&columns(a, &u)?, y) {
                Ok(coef) => u.scatter(&coef, m),
                Err(Error::Singular { .. }) => continue,
                Err(e) => return Err(e),
            }
        };
        if norm2(&sub(y, &a.mul_vec(&beta))) > accept {
            continue;
        }
        let obj: f64 = norm1(&u.difference(known).gather(&beta));
        if best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((beta, obj));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no support reproduces y exactly".into()))
}
