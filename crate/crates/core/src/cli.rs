//! The `modcs` command line: generate | run | certify | analyze.
//!
//! Exit codes: 0 success or PASS, 1 FAIL (or INCOMPLETE) verdict, 2 usage or
//! config error, 3 runtime error (including a brute-force budget refusal).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{check_theorem, BruteForceRip, ConditionReport, RipSource, SignalTrace, Verdict, DEFAULT_BUDGET};
use crate::config::{read_text, CertifyFile, ExperimentFile, ModelFile, PAPER_REALIZATIONS};
use crate::error::Error;
use crate::harness::{export, run_experiment, to_svg, Format, MetricsSeries, SteadyState, STEADY_STATE_FROM};
use crate::sensing::{stream, Purpose};
use crate::signal::seqfile::{read_sequence, write_sequence};
use crate::signal::{verify_assumptions, ModelClaim, ModelReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "modcs", version, about = "Recursive recovery of sparse signal sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a signal sequence from the [model] section of a config.
    Generate(GenerateArgs),
    /// Run a Monte-Carlo experiment and export the metric series.
    Run(RunArgs),
    /// Check a theorem's sufficient conditions.
    Certify(CertifyArgs),
    /// Report support-change statistics of a sequence file.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub config: PathBuf,
    /// Sequence file to write; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of frames (overrides the config).
    #[arg(long)]
    pub frames: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Output directory for metrics.csv, metrics.json and metrics.svg.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, conflicts_with = "paper_scale")]
    pub realizations: Option<usize>,
    /// Use the full 500-realization protocol.
    #[arg(long)]
    pub paper_scale: bool,
    /// Also write an SVG chart.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    pub config: PathBuf,
    /// Theorem id (3.2, 3.3, 4.3, 4.8, 5.5, 5.9); overrides the config.
    #[arg(long)]
    pub theorem: Option<String>,
    /// Sequence file used for the signal-dependent conditions.
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// Maximum number of subsets the brute-force constants may examine.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub sequence: PathBuf,
    /// Config whose [model] section is checked against the sequence;
    /// statistics only when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// A command's stdout text and exit status.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Input(_) | Error::Infeasible(_) | Error::Model(_) | Error::Domain(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (program name first) and runs the command. Usage errors
/// print clap's message and return 2.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command) -> crate::Result<Outcome> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct GenerateSummary {
    frames: usize,
    m: usize,
    max_support: usize,
    s_a: usize,
    out: Option<String>,
}

pub fn cmd_generate(a: &GenerateArgs) -> crate::Result<Outcome> {
    let file = ModelFile::parse(&read_text(&a.config)?)?;
    let model = file.model.build()?;
    let frames = a.frames.or(file.frames).ok_or_else(|| Error::Config("frames missing".into()))?;
    let seed = a.seed.unwrap_or(file.master_seed);
    let mut rng = stream(seed, Purpose::Signal, 0, 0);
    let (xs, _) = model.generate(frames, &mut rng)?;
    let text = write_sequence(&xs);
    let stats = verify_assumptions(&xs, &ModelClaim::ObserveOnly)?;
    let summary = GenerateSummary {
        frames: xs.len(),
        m: model.m(),
        max_support: stats.max_support,
        s_a: stats.s_a,
        out: a.out.as_ref().map(|p| p.display().to_string()),
    };
    let report = if a.common.json {
        json(&summary)
    } else {
        format!("frames {}  m {}  S (observed) {}  S_a (observed) {}\n", summary.frames, summary.m, summary.max_support, summary.s_a)
    };
    match &a.out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(Outcome { stdout: report, code: EXIT_OK })
        }
        None => {
            eprint!("{report}");
            Ok(Outcome { stdout: text, code: EXIT_OK })
        }
    }
}

#[derive(Serialize)]
struct AlgorithmSummary {
    algorithm: &'static str,
    steady_state: SteadyState,
    zeta_m_normalized: Option<f64>,
    zeta_l_normalized: Option<f64>,
}

#[derive(Serialize)]
struct RunSummary {
    realizations: usize,
    frames: usize,
    algorithms: Vec<AlgorithmSummary>,
    files: Vec<String>,
}

fn run_summary(series: &MetricsSeries, files: Vec<String>) -> RunSummary {
    RunSummary {
        realizations: series.realizations,
        frames: series.frames,
        algorithms: series
            .algorithms
            .iter()
            .map(|s| AlgorithmSummary {
                algorithm: s.algorithm.name(),
                steady_state: s.steady_state(STEADY_STATE_FROM),
                zeta_m_normalized: s.spread.modcs.map(|z| z.normalized),
                zeta_l_normalized: s.spread.ls.map(|z| z.normalized),
            })
            .collect(),
        files,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.5}"))
}

/// Writes the metric files for `series` into `dir`; returns their paths.
pub fn write_metrics(series: &MetricsSeries, dir: &Path, svg: bool) -> crate::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec![dir.join("metrics.csv"), dir.join("metrics.json")];
    export(series, &files[0], Format::Csv)?;
    export(series, &files[1], Format::Json)?;
    if svg {
        files.push(dir.join("metrics.svg"));
        std::fs::write(&files[2], to_svg(series))?;
    }
    Ok(files)
}

pub fn cmd_run(a: &RunArgs) -> crate::Result<Outcome> {
    let file = ExperimentFile::parse(&read_text(&a.config)?)?;
    let mut cfg = file.build()?;
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    if a.paper_scale {
        cfg.realizations = PAPER_REALIZATIONS;
    }
    if let Some(r) = a.realizations {
        cfg.realizations = r;
    }
    cfg.validate()?;
    let series = run_experiment(&cfg)?;
    let files = write_metrics(&series, &a.out, a.svg || file.svg)?;
    let summary = run_summary(&series, files.iter().map(|p| p.display().to_string()).collect());
    let violations = series.total_violations();
    let stdout = if a.common.json {
        json(&summary)
    } else {
        let mut s = format!("{} realizations x {} frames; means over t >= {STEADY_STATE_FROM}\n", summary.realizations, summary.frames);
        let _ = writeln!(s, "{:<18} {:>9} {:>9} {:>9} {:>10} {:>12}", "algorithm", "nmse", "extras", "misses", "violations", "nonconverged");
        for r in &summary.algorithms {
            let st = &r.steady_state;
            let _ = writeln!(
                s,
                "{:<18} {:>9} {:>9} {:>9} {:>10} {:>12}",
                r.algorithm,
                opt(st.nmse),
                opt(st.extras),
                opt(st.misses),
                st.violations,
                st.nonconverged
            );
        }
        for f in &summary.files {
            let _ = writeln!(s, "wrote {f}");
        }
        s
    };
    if violations > 0 {
        for s in &series.algorithms {
            for v in &s.violation_samples {
                eprintln!("{}: {v}", s.algorithm.name());
            }
        }
    }
    Ok(Outcome { stdout, code: if violations > 0 { EXIT_FAIL } else { EXIT_OK } })
}

fn verdict_code(v: Verdict) -> i32 {
    if v == Verdict::Pass {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

fn label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Incomplete => "INCOMPLETE",
    }
}

fn num(v: Option<f64>) -> String {
    v.map_or("?".into(), |v| format!("{v:.6}"))
}

pub fn render_report(r: &ConditionReport) -> String {
    let mut s = format!("theorem {}: {}\n", r.theorem, label(r.verdict));
    for c in &r.conditions {
        let _ = writeln!(
            s,
            "  [{}] {} {}: {} {} {} ({})",
            label(c.verdict),
            c.id,
            c.description,
            num(c.lhs),
            c.relation.symbol(),
            num(c.rhs),
            c.provenance
        );
    }
    for (k, v) in &r.constants {
        let _ = writeln!(s, "  constant {k} = {v}");
    }
    for a in &r.assumptions {
        let _ = writeln!(s, "  assumed: {a}");
    }
    for c in &r.conclusions {
        let _ = writeln!(s, "  concludes ({}, t >= {}): {}", c.id, c.from_t, c.statement);
    }
    for n in &r.notes {
        let _ = writeln!(s, "  note: {n}");
    }
    s
}

pub fn cmd_certify(a: &CertifyArgs) -> crate::Result<Outcome> {
    let file = CertifyFile::parse(&read_text(&a.config)?)?;
    let theorem = file.theorem(a.theorem.as_deref())?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let rip: Box<dyn RipSource> = if !file.matrix.is_empty() {
        let matrices = file.matrix.iter().map(|m| m.build(base)).collect::<crate::Result<Vec<_>>>()?;
        Box::new(BruteForceRip::new(matrices, a.budget)?)
    } else if let Some(asserted) = &file.asserted {
        Box::new(asserted.build()?)
    } else {
        return Err(Error::Config("certify needs a [[matrix]] or an [asserted] section".into()));
    };
    let signals = match &a.sequence {
        Some(p) => Some(read_sequence(&read_text(p)?)?),
        None => None,
    };
    let trace = SignalTrace { signals: signals.as_deref(), additions: None };
    let report = check_theorem(theorem, &file.params, rip.as_ref(), &trace)?;
    let stdout = if a.common.json { json(&report) } else { render_report(&report) };
    Ok(Outcome { stdout, code: verdict_code(report.verdict) })
}

fn render_model_report(r: &ModelReport) -> String {
    let mut s = format!("frames {}  m {}\n", r.frames, r.m);
    let _ = writeln!(s, "S (max support) {}  S_a {}  (max added {}, max removed {})", r.max_support, r.s_a, r.max_added, r.max_removed);
    let range = |v: Option<(f64, f64)>| v.map_or("-".into(), |(lo, hi)| format!("[{lo:.4}, {hi:.4}]"));
    let _ = writeln!(s, "initial magnitudes {}", range(r.initial_range));
    let _ = writeln!(s, "increase rates {}", range(r.rate_range));
    let _ = writeln!(s, "increase durations {}", r.duration_range.map_or("-".into(), |(lo, hi)| format!("[{lo}, {hi}]")));
    let _ = writeln!(s, "removal delay (b) {}", r.removal_delay.map_or("-".into(), |b| b.to_string()));
    for c in r.clauses.iter().chain(&r.count_conditions) {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            let _ = writeln!(s, "  [{verdict}] {}", c.name);
        } else {
            let _ = writeln!(s, "  [{verdict}] {}: {}", c.name, c.detail);
        }
    }
    let _ = writeln!(s, "{}", if r.pass { "PASS" } else { "FAIL" });
    s
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> crate::Result<Outcome> {
    let claim = match &a.model {
        Some(p) => ModelFile::parse(&read_text(p)?)?.model.build()?.claim(),
        None => ModelClaim::ObserveOnly,
    };
    let xs = read_sequence(&read_text(&a.sequence)?)?;
    let report = verify_assumptions(&xs, &claim)?;
    let stdout = if a.common.json { json(&report) } else { render_model_report(&report) };
    Ok(Outcome { stdout, code: if report.pass { EXIT_OK } else { EXIT_FAIL } })
}
