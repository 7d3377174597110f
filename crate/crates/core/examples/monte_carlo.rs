//! A reduced-size Monte-Carlo experiment from the bundled config, with the
//! metric series exported as CSV and JSON.

use std::path::Path;

use modcs::config::ExperimentFile;
use modcs::harness::{export, run_experiment, Format, MetricsSeries, STEADY_STATE_FROM};

pub fn run_example() -> modcs::Result<MetricsSeries> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/fig5.cfg");
    let mut cfg = ExperimentFile::parse(&std::fs::read_to_string(path)?)?.build()?;
    cfg.realizations = 2;
    cfg.frames = 40;
    let series = run_experiment(&cfg)?;
    for s in &series.algorithms {
        let st = s.steady_state(STEADY_STATE_FROM);
        println!(
            "{:<18} nmse {:.4}  extras {:.3}  misses {:.3}  invariant violations {}",
            s.algorithm.name(),
            st.nmse.unwrap_or(f64::NAN),
            st.extras.unwrap_or(f64::NAN),
            st.misses.unwrap_or(f64::NAN),
            st.violations
        );
    }
    let dir = std::env::temp_dir().join("modcs-monte-carlo");
    std::fs::create_dir_all(&dir)?;
    export(&series, &dir.join("metrics.csv"), Format::Csv)?;
    export(&series, &dir.join("metrics.json"), Format::Json)?;
    println!("wrote {}", dir.display());
    Ok(series)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example runs");
}
