//! Check a stability theorem's conditions on a small matrix, then run the
//! tracker on sequences that satisfy the signal model and test its
//! conclusions frame by frame.

use modcs::analysis::{check_claims, check_theorem, BruteForceRip, SignalTrace, TheoremId, TheoremParams, DEFAULT_BUDGET};
use modcs::numerics::DenseMatrix;
use modcs::sensing::{bounded_uniform_noise_from, gen_gaussian_unit_columns, measure, stream, NoiseSpec, Purpose};
use modcs::signal::{Model2Params, SignalModel};
use modcs::trackers::{Algorithm, Threshold, Tracker, TrackerConfig};

/// Number of violated conclusions over all frames (expected 0).
pub fn run_example() -> modcs::Result<usize> {
    let m = 16;
    let g = gen_gaussian_unit_columns(m, m, 9)?;
    let q = g.as_nalgebra().clone().qr().q();
    let a = DenseMatrix::from_fn(m, m, |i, j| q[(i, j)]);

    let c = 0.001;
    let eps = c * (m as f64).sqrt();
    let params = TheoremParams { s: 3, s_a: 1, epsilon: eps, alpha: Some(7.5 * eps), ..Default::default() };
    let rip = BruteForceRip::single(a.clone(), DEFAULT_BUDGET);
    let report = check_theorem(TheoremId::General, &params, &rip, &SignalTrace::default())?;
    println!("theorem {} verdict {:?}", report.theorem, report.verdict);
    for cond in &report.conditions {
        println!("  {} {}: {:?} {} {:?}", cond.id, cond.description, cond.lhs, cond.relation.symbol(), cond.rhs);
    }

    let model = SignalModel::Assumptions2(Model2Params::new(3, 1, 1, 1.0, 1.0, 1, m)?);
    let mut cfg = TrackerConfig::auto(Algorithm::ModCs);
    cfg.alpha = Threshold::Fixed(7.5 * eps);
    let spec = NoiseSpec::new(c)?;
    let mut violations = 0;
    for seed in 0..5u64 {
        let (xs, _) = model.generate(30, &mut stream(seed, Purpose::Signal, 0, 0))?;
        let mut tracker = Tracker::new(cfg.clone())?;
        for (t, x) in xs.iter().enumerate() {
            let w = bounded_uniform_noise_from(&mut stream(seed, Purpose::Noise, 0, t as u64), m, spec)?;
            let out = tracker.step(&measure(&a, x, &w, t, spec)?, &a)?;
            let v = check_claims(&report, x, &out);
            violations += v.len();
            for msg in v {
                println!("seed {seed}: {msg}");
            }
        }
    }
    println!("conclusion violations: {violations}");
    Ok(violations)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example runs");
}
