//! Recover one sparse vector with and without a partial support estimate.
//!
//! Solves `min ||b_{T^c}||_1 s.t. ||y - A b|| <= eps` for a known part `T`
//! of the support, compares against plain noisy l1 (`T` empty), and checks
//! both answers with the optimality certificate.

use modcs::numerics::{norm2, sub, IndexSet};
use modcs::sensing::{gen_bounded_uniform_noise, gen_gaussian_unit_columns, measure, NoiseSpec};
use modcs::solver::{kkt_certificate, solve_modcs, SolverConfig, WeightedL1Problem};

pub struct Outcome {
    pub err_l1: f64,
    pub err_modcs: f64,
    pub certified: bool,
}

pub fn run_example() -> modcs::Result<Outcome> {
    let (n, m) = (30, 80);
    let a = gen_gaussian_unit_columns(n, m, 11)?;
    let mut x = vec![0.0; m];
    for (k, i) in [2, 9, 15, 23, 31, 40, 47, 52, 60, 66, 71, 78].into_iter().enumerate() {
        x[i] = if k % 3 == 0 { -1.5 } else { 1.0 + 0.1 * k as f64 };
    }
    let spec = NoiseSpec::new(0.01)?;
    let w = gen_bounded_uniform_noise(n, spec, 5)?;
    let frame = measure(&a, &x, &w, 0, spec)?;

    // Ten of the twelve nonzeros are known, plus one wrong index.
    let known = IndexSet::from_unsorted(vec![2, 9, 15, 23, 31, 40, 47, 52, 60, 66, 5]);
    let none = IndexSet::empty();
    let cfg = SolverConfig::default();

    let mut certified = true;
    let mut errs = Vec::new();
    for (name, t) in [("noisy l1", &none), ("modified cs", &known)] {
        let p = WeightedL1Problem::new(&a, &frame.y, frame.epsilon, t)?;
        let r = solve_modcs(&p, &cfg)?;
        let cert = kkt_certificate(&p, &r.beta, 1e-4);
        let err = norm2(&sub(&x, &r.beta)) / norm2(&x);
        println!("{name:<12} relative error {err:.2e}  iterations {:>4}  certificate {}", r.iterations, if cert.pass { "ok" } else { &cert.reason });
        certified &= cert.pass;
        errs.push(err);
    }
    Ok(Outcome { err_l1: errs[0], err_modcs: errs[1], certified })
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example runs");
}
