//! Closed-form error-bound constants and the error-spread estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{norm2, norm_inf};

/// RIC level at which the modified-CS constant reaches 7.50.
pub const DELTA_STAR: f64 = 0.207;

/// `C_1 = 4 sqrt(1 + delta) / (1 - 2 delta)`, the modified-CS error constant.
pub fn c1_constant(delta: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::Domain(format!("C1 needs 0 <= delta < 0.5, got {delta}")));
    }
    Ok(4.0 * (1.0 + delta).sqrt() / (1.0 - 2.0 * delta))
}

/// Coefficients `(a, b)` of the LS error bound `a eps + b ||x_Delta||`.
pub fn ls_error_coefficients(delta_t: f64, theta: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&delta_t) || theta < 0.0 || !theta.is_finite() {
        return Err(Error::Domain(format!("LS bound needs 0 <= delta < 1 and theta >= 0, got {delta_t}, {theta}")));
    }
    Ok((1.0 / (1.0 - delta_t).sqrt(), 1.0 + theta / (1.0 - delta_t)))
}

/// `eps / sqrt(1 - delta) + (1 + theta / (1 - delta)) ||x_Delta||`.
pub fn ls_error_bound(delta_t: f64, theta: f64, epsilon: f64, x_delta_norm: f64) -> Result<f64> {
    let (a, b) = ls_error_coefficients(delta_t, theta)?;
    Ok(a * epsilon + b * x_delta_norm)
}

/// Smallest spread constant consistent with a set of error vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaEstimate {
    /// `sqrt(S_a) max ||e||_inf / ||e||_2`.
    pub zeta: f64,
    /// `zeta / sqrt(S_a)`.
    pub normalized: f64,
    pub samples: usize,
}

/// Spread constants of the modified-CS error and of the LS error on `T_add`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadEstimate {
    pub zeta_m: f64,
    pub zeta_l: f64,
    pub samples: usize,
}

/// `zeta = sqrt(S_a) max_k ||e_k||_inf / ||e_k||_2`, maximized over all
/// supplied frames. Zero error vectors carry no information and are skipped.
pub fn estimate_zeta<E: AsRef<[f64]>>(traces: &[(E, usize)]) -> Result<ZetaEstimate> {
    let mut zeta: f64 = 0.0;
    let mut normalized: f64 = 0.0;
    let mut samples = 0;
    for (e, s_a) in traces {
        let e = e.as_ref();
        let n2 = norm2(e);
        if n2 == 0.0 {
            continue;
        }
        if *s_a == 0 {
            return Err(Error::Input("S_a must be at least 1".into()));
        }
        let ratio = norm_inf(e) / n2;
        normalized = normalized.max(ratio);
        zeta = zeta.max((*s_a as f64).sqrt() * ratio);
        samples += 1;
    }
    if samples == 0 {
        return Err(Error::Domain("every error vector is zero; spread is undefined".into()));
    }
    Ok(ZetaEstimate { zeta, normalized, samples })
}

/// Both spread constants from per-frame error vectors.
pub fn estimate_spread<E: AsRef<[f64]>>(modcs: &[(E, usize)], ls: &[(E, usize)]) -> Result<SpreadEstimate> {
    let m = estimate_zeta(modcs)?;
    let l = estimate_zeta(ls)?;
    Ok(SpreadEstimate { zeta_m: m.zeta, zeta_l: l.zeta, samples: m.samples.min(l.samples) })
}
