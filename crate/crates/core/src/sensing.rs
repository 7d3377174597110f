//! Measurement model `y_t = A_t x_t + w_t` with bounded uniform noise.
//!
//! Random streams: every draw is made from a ChaCha8 generator keyed by
//! `(master_seed, purpose)` with stream id `(realization << 32) | t`, so a
//! realization's draws never depend on how many other realizations ran.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::numerics::{norm2, DenseMatrix};

/// Separate seed domains so that e.g. the signal and the noise of one
/// realization never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Signal,
    Matrix,
    InitialMatrix,
    Noise,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Signal => 0x5349_474e,
            Purpose::Matrix => 0x4d41_5458,
            Purpose::InitialMatrix => 0x4d41_5430,
            Purpose::Noise => 0x4e4f_4953,
        }
    }
}

/// Generator for `(master_seed, purpose, realization, t)`.
pub fn stream(master_seed: u64, purpose: Purpose, realization: u64, t: u64) -> ChaCha8Rng {
    assert!(realization < 1 << 32 && t < 1 << 32, "stream id overflow");
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ purpose.tag().rotate_left(32));
    rng.set_stream((realization << 32) | t);
    rng
}

/// Per-entry noise half-width `c_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub c: f64,
}

impl NoiseSpec {
    pub fn new(c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return input(format!("noise half-width must be finite and >= 0, got {c}"));
        }
        Ok(Self { c })
    }

    /// Worst-case l2 norm of `n` entries: `c * sqrt(n)`.
    pub fn epsilon(&self, n: usize) -> f64 {
        self.c * (n as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFrame {
    pub t: usize,
    pub y: Vec<f64>,
    pub epsilon: f64,
    pub n: usize,
    /// Half-width used to draw the noise.
    pub c: f64,
}

/// `n x m` matrix with i.i.d. N(0,1) entries, columns scaled to unit norm.
pub fn gen_gaussian_unit_columns(n: usize, m: usize, seed: u64) -> Result<DenseMatrix> {
    gaussian_unit_columns_from(&mut ChaCha8Rng::seed_from_u64(seed), n, m)
}

pub fn gaussian_unit_columns_from<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Result<DenseMatrix> {
    if n == 0 || m == 0 {
        return input(format!("matrix shape {n}x{m} must be at least 1x1"));
    }
    // column-major fill so each column is drawn contiguously
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut col: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut norm = norm2(&col);
        while norm == 0.0 {
            col = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            norm = norm2(&col);
        }
        col.iter_mut().for_each(|v| *v /= norm);
        cols.push(col);
    }
    Ok(DenseMatrix::from_fn(n, m, |i, j| cols[j][i]))
}

/// `n` i.i.d. draws from uniform(-c, c).
pub fn gen_bounded_uniform_noise(n: usize, spec: NoiseSpec, seed: u64) -> Result<Vec<f64>> {
    bounded_uniform_noise_from(&mut ChaCha8Rng::seed_from_u64(seed), n, spec)
}

pub fn bounded_uniform_noise_from<R: Rng + ?Sized>(rng: &mut R, n: usize, spec: NoiseSpec) -> Result<Vec<f64>> {
    if n == 0 {
        return input("noise length must be at least 1");
    }
    NoiseSpec::new(spec.c)?;
    if spec.c == 0.0 {
        return Ok(vec![0.0; n]);
    }
    Ok((0..n).map(|_| rng.gen_range(-spec.c..=spec.c)).collect())
}

/// Builds `y = A x + w` and sets `epsilon = c * sqrt(n)`.
pub fn measure(a: &DenseMatrix, x: &[f64], w: &[f64], t: usize, spec: NoiseSpec) -> Result<MeasurementFrame> {
    if x.len() != a.cols() {
        return input(format!("signal has length {}, matrix has {} columns", x.len(), a.cols()));
    }
    if w.len() != a.rows() {
        return input(format!("noise has length {}, matrix has {} rows", w.len(), a.rows()));
    }
    let n = a.rows();
    let epsilon = spec.epsilon(n);
    if norm2(w) > epsilon * (1.0 + 1e-12) {
        return input(format!("noise norm {} exceeds the bound {epsilon}", norm2(w)));
    }
    let mut y = a.mul_vec(x);
    y.iter_mut().zip(w).for_each(|(v, e)| *v += e);
    Ok(MeasurementFrame { t, y, epsilon, n, c: spec.c })
}
