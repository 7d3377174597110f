//! Generate sequences under both signal-change models, check them against
//! their own assumptions, and round-trip one through the sequence file format.

use modcs::sensing::{stream, Purpose};
use modcs::signal::seqfile::{read_sequence, write_sequence};
use modcs::signal::{verify_assumptions, Model1Params, Model2Params, ModelClaim, SignalModel};

/// Whether every generated sequence passed its own checks.
pub fn run_example() -> modcs::Result<bool> {
    let ladder = SignalModel::Assumptions1(Model1Params { s: 8, s_a: 1, r: 1.0, d: 4, m: 64 });
    let p2 = Model2Params::new(20, 2, 3, 1.0, 1.0, 3, 200)?;
    let mut all = true;
    for (name, model) in [
        ("ladder", ladder),
        ("assumptions 2", SignalModel::Assumptions2(p2.clone())),
        ("assumptions 3", SignalModel::Assumptions3(p2)),
    ] {
        let (xs, _) = model.generate(60, &mut stream(3, Purpose::Signal, 0, 0))?;
        let r = verify_assumptions(&xs, &model.claim())?;
        println!(
            "{name:<14} S {:>2}  S_a {}  removal delay {:?}  clauses {}/{} pass",
            r.max_support,
            r.s_a,
            r.removal_delay,
            r.clauses.iter().filter(|c| c.pass).count(),
            r.clauses.len()
        );
        all &= r.pass;

        let back = read_sequence(&write_sequence(&xs))?;
        all &= back == xs;
    }

    // A jump of three additions in one frame breaks S_a = 1.
    let mut xs = vec![vec![0.0; 10]; 2];
    xs[0][0] = 1.0;
    xs[1][0] = 1.0;
    for i in 1..4 {
        xs[1][i] = 1.0;
    }
    let r = verify_assumptions(&xs, &ModelClaim::ObserveOnly)?;
    println!("hand-made jump: S_a observed {}", r.s_a);
    Ok(all && r.s_a == 3)
}

#[allow(dead_code)]
fn main() {
    assert!(run_example().expect("example runs"));
}
