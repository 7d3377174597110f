//! Track a slowly changing sparse sequence with the three recursive
//! algorithms and print the per-frame reconstruction error.

use modcs::numerics::{norm2, sub};
use modcs::sensing::{bounded_uniform_noise_from, gaussian_unit_columns_from, measure, stream, NoiseSpec, Purpose};
use modcs::signal::{Model2Params, SignalModel};
use modcs::trackers::{Algorithm, Tracker, TrackerConfig};

/// Mean relative squared error over frames 10.. per algorithm.
pub fn run_example() -> modcs::Result<Vec<(Algorithm, f64)>> {
    let seed = 42;
    let model = SignalModel::Assumptions2(Model2Params::new(10, 1, 3, 1.0, 1.0, 3, 100)?);
    let frames = 40;
    let (xs, _) = model.generate(frames, &mut stream(seed, Purpose::Signal, 0, 0))?;

    // A tall first matrix so the first frame is recovered from scratch.
    let a0 = gaussian_unit_columns_from(&mut stream(seed, Purpose::InitialMatrix, 0, 0), 80, 100)?;
    let a = gaussian_unit_columns_from(&mut stream(seed, Purpose::Matrix, 0, 0), 30, 100)?;
    let frames_in: Vec<_> = xs
        .iter()
        .enumerate()
        .map(|(t, x)| {
            let (mat, c) = if t == 0 { (&a0, 0.005) } else { (&a, 0.1) };
            let spec = NoiseSpec::new(c)?;
            let w = bounded_uniform_noise_from(&mut stream(seed, Purpose::Noise, 0, t as u64), mat.rows(), spec)?;
            measure(mat, x, &w, t, spec)
        })
        .collect::<modcs::Result<_>>()?;

    let mut summary = Vec::new();
    for alg in Algorithm::ALL {
        let mut tracker = Tracker::new(TrackerConfig::auto(alg))?;
        let mut errs = Vec::new();
        for (t, (x, f)) in xs.iter().zip(&frames_in).enumerate() {
            let out = tracker.step(f, if t == 0 { &a0 } else { &a })?;
            errs.push((norm2(&sub(x, &out.x_hat)) / norm2(x)).powi(2));
        }
        let tail = &errs[10..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let every5: Vec<String> = errs.iter().step_by(5).map(|e| format!("{e:.1e}")).collect();
        println!("{:<18} mean {mean:.2e}  t=0,5,..: {}", alg.name(), every5.join(" "));
        summary.push((alg, mean));
    }
    Ok(summary)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example runs");
}
