//! Per-frame identities every tracker output must satisfy.
//!
//! * detection/deletion facts: an entry larger than threshold plus the
//!   estimation error is kept, a zero entry is dropped once the threshold
//!   covers the error;
//! * the LS error on `T_add` equals `-(A_T'A_T)^-1 A_T'(w + A_D x_D)` with
//!   `D = N \ T_add` (evaluated through an explicit inverse, not the
//!   solver's SVD path);
//! * set identities: `N = (T u Delta) \ Delta_e`, `T_add = T u {|x_modcs| > alpha_add}`,
//!   `N_hat = {i in T_add : |x_add| > alpha_del}` (or `{|x_modcs| > alpha}`).
//!
//! Frames flagged rank deficient are exempt from the identities that assume
//! full-rank least squares.

use nalgebra::{DMatrix, DVector};

use crate::numerics::{columns, norm_inf, sub, DenseMatrix, IndexSet};
use crate::trackers::{Algorithm, StepOutput};

/// Tolerance for the LS error identity.
pub const LS_IDENTITY_TOL: f64 = 1e-8;

fn slack(v: f64) -> f64 {
    1e-12 * (1.0 + v.abs())
}

/// Violations of the per-frame identities; empty when all hold.
pub fn frame_invariants(out: &StepOutput, x: &[f64], a: &DenseMatrix, w: &[f64]) -> Vec<String> {
    let mut v = Vec::new();
    let t = out.t;
    let n = IndexSet::support(x);
    let prior = &out.prior;
    let delta = n.difference(prior);
    let delta_e = prior.difference(&n);
    if prior.union(&delta).difference(&delta_e) != n {
        v.push(format!("t = {t}: N != (T u Delta) \\ Delta_e"));
    }
    let e_modcs = sub(x, &out.x_hat_modcs);
    let e_inf = norm_inf(&e_modcs);
    match out.algorithm {
        Algorithm::NoisyL1 | Algorithm::ModCs => {
            let Some(alpha) = out.alpha else {
                v.push(format!("t = {t}: threshold missing"));
                return v;
            };
            if IndexSet::select(&out.x_hat_modcs, |z| z.abs() > alpha) != out.support {
                v.push(format!("t = {t}: support is not {{|x_modcs| > alpha}}"));
            }
            for &i in n.iter() {
                if x[i].abs() > alpha + e_inf + slack(x[i]) && !out.support.contains(i) {
                    v.push(format!("t = {t}: index {i} with |x| = {} > alpha + ||e||_inf not detected", x[i].abs()));
                }
            }
            if alpha >= e_inf + slack(alpha) {
                if let Some(i) = delta_e.iter().find(|&&i| out.support.contains(i)) {
                    v.push(format!("t = {t}: zero entry {i} of T kept although alpha >= ||e||_inf"));
                }
            }
        }
        Algorithm::AddLsDel => add_ls_del(out, x, a, w, &n, e_inf, &mut v),
    }
    v
}

fn add_ls_del(out: &StepOutput, x: &[f64], a: &DenseMatrix, w: &[f64], n: &IndexSet, e_inf: f64, v: &mut Vec<String>) {
    let t = out.t;
    let (Some(t_add), Some(x_add), Some(alpha_add), Some(alpha_del)) = (&out.add_support, &out.x_hat_add, out.alpha_add, out.alpha_del) else {
        v.push(format!("t = {t}: add step output missing"));
        return;
    };
    let exact_ls = !out.flags.rank_deficient;
    let added = IndexSet::select(&out.x_hat_modcs, |z| z.abs() > alpha_add).difference(&out.prior);
    if exact_ls && out.prior.union(&added) != *t_add {
        v.push(format!("t = {t}: T_add != T u {{|x_modcs| > alpha_add}}"));
    }
    if exact_ls {
        let kept: IndexSet = t_add.iter().copied().filter(|&i| x_add[i].abs() > alpha_del).collect();
        if kept != out.support {
            v.push(format!("t = {t}: final support != {{i in T_add : |x_add| > alpha_del}}"));
        }
    }
    if !out.support.is_subset(t_add) {
        v.push(format!("t = {t}: final support not inside T_add"));
    }
    if let Some(i) = (0..x.len()).find(|&i| !t_add.contains(i) && x_add[i] != 0.0) {
        v.push(format!("t = {t}: x_add nonzero at {i} outside T_add"));
    }
    // Detection: large entries outside T enter T_add.
    for &i in n.iter() {
        if !out.prior.contains(i) && x[i].abs() > alpha_add + e_inf + slack(x[i]) && !t_add.contains(i) {
            v.push(format!("t = {t}: index {i} with |x| = {} > alpha_add + ||e||_inf not added", x[i].abs()));
        }
    }
    let e_add: Vec<f64> = t_add.iter().map(|&i| x[i] - x_add[i]).collect();
    let e_add_inf = norm_inf(&e_add);
    if exact_ls {
        // No false deletion of large entries; all zeros of T_add deleted once alpha_del covers the error.
        for &i in t_add.intersection(n).iter() {
            if x[i].abs() > alpha_del + e_add_inf + slack(x[i]) && !out.support.contains(i) {
                v.push(format!("t = {t}: index {i} with |x| = {} > alpha_del + ||e_add||_inf deleted", x[i].abs()));
            }
        }
        if alpha_del >= e_add_inf + slack(alpha_del) {
            if let Some(i) = t_add.difference(n).iter().find(|&&i| out.support.contains(i)) {
                v.push(format!("t = {t}: zero entry {i} of T_add kept although alpha_del >= ||e_add||_inf"));
            }
        }
    }
    if exact_ls && !t_add.is_empty() {
        if let Some(msg) = ls_identity(a, t_add, n, x, w, &e_add) {
            v.push(format!("t = {t}: {msg}"));
        }
    }
}

/// `(x - x_add)_T = -(A_T'A_T)^-1 A_T'(w + A_D x_D)`, `D = N \ T`: the LS
/// estimate is `x_T` plus the projected noise and leakage, so the error
/// carries the opposite sign.
fn ls_identity(a: &DenseMatrix, t_add: &IndexSet, n: &IndexSet, x: &[f64], w: &[f64], e_add: &[f64]) -> Option<String> {
    let at = columns(a, t_add).ok()?;
    let missed = n.difference(t_add);
    let mut rhs = DVector::from_column_slice(w);
    for &j in missed.iter() {
        for (r, c) in a.column(j).iter().enumerate() {
            rhs[r] += c * x[j];
        }
    }
    let at = at.as_nalgebra();
    let gram: DMatrix<f64> = at.transpose() * at;
    let Some(inv) = gram.try_inverse() else {
        return Some("A_T_add' A_T_add not invertible".into());
    };
    let predicted = -(inv * (at.transpose() * rhs));
    let gap = predicted.iter().zip(e_add).map(|(p, e)| (p - e).abs()).fold(0.0, f64::max);
    (gap > LS_IDENTITY_TOL).then(|| format!("LS error identity off by {gap:e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{gen_bounded_uniform_noise, gen_gaussian_unit_columns, measure, NoiseSpec};
    use crate::trackers::{Tracker, TrackerConfig};

    fn frames() -> (DenseMatrix, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let a = gen_gaussian_unit_columns(30, 60, 8).unwrap();
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for t in 0..6 {
            let mut x = vec![0.0; 60];
            for (k, i) in [3, 9, 17, 25, 40].iter().enumerate() {
                x[*i] = if k % 2 == 0 { 2.0 + t as f64 * 0.1 } else { -1.5 };
            }
            if t >= 3 {
                x[50] = 1.0;
            }
            xs.push(x);
            ws.push(gen_bounded_uniform_noise(30, NoiseSpec::new(0.01).unwrap(), t).unwrap());
        }
        (a, xs, ws)
    }

    #[test]
    fn trackers_satisfy_invariants() {
        let (a, xs, ws) = frames();
        for alg in Algorithm::ALL {
            let mut tr = Tracker::new(TrackerConfig::auto(alg)).unwrap();
            for (t, (x, w)) in xs.iter().zip(&ws).enumerate() {
                let f = measure(&a, x, w, t, NoiseSpec::new(0.01).unwrap()).unwrap();
                let out = tr.step(&f, &a).unwrap();
                let v = frame_invariants(&out, x, &a, w);
                assert!(v.is_empty(), "{alg:?}: {v:?}");
            }
        }
    }

    #[test]
    fn tampered_output_is_caught() {
        let (a, xs, ws) = frames();
        let mut tr = Tracker::new(TrackerConfig::auto(Algorithm::AddLsDel)).unwrap();
        let f = measure(&a, &xs[0], &ws[0], 0, NoiseSpec::new(0.01).unwrap()).unwrap();
        let mut out = tr.step(&f, &a).unwrap();
        let i = out.add_support.as_ref().unwrap().as_slice()[0];
        out.x_hat_add.as_mut().unwrap()[i] += 1e-3;
        let v = frame_invariants(&out, &xs[0], &a, &ws[0]);
        assert!(v.iter().any(|m| m.contains("LS error identity")), "{v:?}");

        let mut tr = Tracker::new(TrackerConfig::auto(Algorithm::ModCs)).unwrap();
        let mut out = tr.step(&f, &a).unwrap();
        out.support = IndexSet::empty();
        assert!(!frame_invariants(&out, &xs[0], &a, &ws[0]).is_empty());
    }
}
