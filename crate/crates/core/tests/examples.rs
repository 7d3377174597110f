// Every example must run; a few also report something worth checking.

#[path = "../examples/certify_theorem.rs"]
mod certify_theorem;
#[path = "../examples/index_sets.rs"]
mod index_sets;
#[path = "../examples/monte_carlo.rs"]
mod monte_carlo;
#[path = "../examples/recover_sequence.rs"]
mod recover_sequence;
#[path = "../examples/rip_constants.rs"]
mod rip_constants;
#[path = "../examples/signal_models.rs"]
mod signal_models;
#[path = "../examples/weighted_l1.rs"]
mod weighted_l1;

use modcs::trackers::Algorithm;

#[test]
fn weighted_l1_beats_plain_l1() {
    let o = weighted_l1::run_example().unwrap();
    assert!(o.certified);
    assert!(o.err_modcs < o.err_l1 / 5.0, "{} vs {}", o.err_modcs, o.err_l1);
}

#[test]
fn recover_sequence_tracks() {
    let r = recover_sequence::run_example().unwrap();
    let get = |alg| r.iter().find(|(a, _)| *a == alg).unwrap().1;
    assert!(get(Algorithm::ModCs) < get(Algorithm::NoisyL1));
    assert!(get(Algorithm::AddLsDel) < 0.05);
}

#[test]
fn signal_models_conform() {
    assert!(signal_models::run_example().unwrap());
}

#[test]
fn rip_constants_are_monotone() {
    let d = rip_constants::run_example().unwrap();
    assert!(d[0].abs() < 1e-12);
    assert!(d.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn certify_theorem_has_no_violations() {
    assert_eq!(certify_theorem::run_example().unwrap(), 0);
}

#[test]
fn monte_carlo_runs() {
    let s = monte_carlo::run_example().unwrap();
    assert_eq!(s.total_violations(), 0);
    assert_eq!(s.frames, 40);
}

#[test]
fn index_sets_ls() {
    let c = index_sets::run_example().unwrap();
    let want = [0.0, 1.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.5, 0.0, 3.0];
    assert!(c.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-9));
}
