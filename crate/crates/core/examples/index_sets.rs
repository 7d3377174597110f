//! Support bookkeeping with sorted index sets, and least squares on a support.

use modcs::numerics::{least_squares_on, IndexSet};
use modcs::sensing::gen_gaussian_unit_columns;

pub fn run_example() -> modcs::Result<Vec<f64>> {
    let n = IndexSet::new(vec![1, 4, 7, 9])?;
    let t = IndexSet::from_unsorted(vec![9, 4, 2, 1]);
    let delta = n.difference(&t);
    let delta_e = t.difference(&n);
    println!("N = {:?}  T = {:?}", n.as_slice(), t.as_slice());
    println!("misses {:?}  extras {:?}", delta.as_slice(), delta_e.as_slice());
    assert_eq!(t.union(&delta).difference(&delta_e), n);

    let a = gen_gaussian_unit_columns(12, 10, 2)?;
    let mut x = vec![0.0; 10];
    for (&i, v) in n.iter().zip([1.0, -2.0, 0.5, 3.0]) {
        x[i] = v;
    }
    let y = a.mul_vec(&x);
    let coef = least_squares_on(&a, &n, &y)?;
    println!("LS on N recovers {coef:?}");
    Ok(coef)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example runs");
}
