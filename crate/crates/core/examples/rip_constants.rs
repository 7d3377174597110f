//! Exact restricted isometry and orthogonality constants of a small matrix,
//! and the error-bound constants they feed.

use modcs::analysis::{c1_constant, ls_error_coefficients, ric_bruteforce, roc_bruteforce, DEFAULT_BUDGET};
use modcs::sensing::gen_gaussian_unit_columns;

pub fn run_example() -> modcs::Result<Vec<f64>> {
    let a = gen_gaussian_unit_columns(8, 12, 4)?;
    let mut deltas = Vec::new();
    for s in 1..=4 {
        let d = ric_bruteforce(&a, s, DEFAULT_BUDGET)?;
        println!("delta_{s} = {:.4}  (left {:.4}, right {:.4}, {} subsets)", d.delta, d.delta_left, d.delta_right, d.subsets_examined);
        deltas.push(d.delta);
    }
    let th = roc_bruteforce(&a, 2, 1, DEFAULT_BUDGET)?;
    println!("theta_2,1 = {:.4} over {} pairs", th.theta, th.pairs_examined);

    // The constants in the error bounds at the 0.207 operating point.
    let c1 = c1_constant(0.207)?;
    let (k_eps, k_miss) = ls_error_coefficients(0.207, 0.207)?;
    println!("C1(0.207) = {c1:.4}   LS bound = {k_eps:.4} eps + {k_miss:.4} ||x_miss||");

    // Asking for too many subsets is refused rather than attempted.
    let big = gen_gaussian_unit_columns(20, 60, 1)?;
    if let Err(e) = ric_bruteforce(&big, 12, DEFAULT_BUDGET) {
        println!("refused: {e}");
    }
    Ok(deltas)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example runs");
}
