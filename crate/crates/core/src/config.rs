//! TOML configuration files for experiments, sequence generation and
//! certification.
//!
//! ```toml
//! master_seed = 1
//! frames = 200
//! realizations = 50
//! algorithms = ["noisy-l1", "modcs", "modcs-add-ls-del"]
//! matrix_mode = "fixed"          # or "varying"
//!
//! [sensing]
//! n0 = 160
//! n = 57
//! c0 = 0.01266
//! c = 0.1266
//!
//! [model]
//! kind = "assumptions2"          # assumptions1 | assumptions2 | assumptions3
//! S = 20
//! S_a = 2
//! d_min = 3
//! a_min = 1.0
//! r_min = 1.0
//! b = 3
//! m = 200
//!
//! [thresholds]                   # "auto" or a number
//! alpha = "auto"
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{AssertedRip, TheoremId, TheoremParams};
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, MatrixEnsemble, MatrixMode, ThresholdConfig};
use crate::numerics::DenseMatrix;
use crate::sensing::gen_gaussian_unit_columns;
use crate::signal::{Model1Params, Model2Params, SignalModel};
use crate::trackers::{Algorithm, Threshold};

/// Realization count of the full-scale protocol.
pub const PAPER_REALIZATIONS: usize = 500;

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSection {
    Assumptions1 {
        #[serde(rename = "S")]
        s: usize,
        #[serde(rename = "S_a")]
        s_a: usize,
        r: f64,
        d: usize,
        m: usize,
    },
    Assumptions2(Model2Section),
    Assumptions3(Model2Section),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model2Section {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "S_a")]
    pub s_a: usize,
    pub d_min: usize,
    pub a_min: f64,
    pub r_min: f64,
    pub b: usize,
    pub m: usize,
}

impl ModelSection {
    pub fn build(&self) -> Result<SignalModel> {
        let two = |p: &Model2Section| Model2Params::new(p.s, p.s_a, p.d_min, p.a_min, p.r_min, p.b, p.m).map_err(config_err);
        let model = match self {
            ModelSection::Assumptions1 { s, s_a, r, d, m } => SignalModel::Assumptions1(Model1Params { s: *s, s_a: *s_a, r: *r, d: *d, m: *m }),
            ModelSection::Assumptions2(p) => SignalModel::Assumptions2(two(p)?),
            ModelSection::Assumptions3(p) => SignalModel::Assumptions3(two(p)?),
        };
        model.validate().map_err(config_err)?;
        Ok(model)
    }
}

/// `"auto"` or a fixed value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdValue {
    Fixed(f64),
    Word(String),
}

impl ThresholdValue {
    fn build(&self) -> Result<Threshold> {
        match self {
            ThresholdValue::Fixed(v) => Ok(Threshold::Fixed(*v)),
            ThresholdValue::Word(w) if w == "auto" => Ok(Threshold::Auto),
            ThresholdValue::Word(w) => Err(Error::Config(format!("threshold must be \"auto\" or a number, got \"{w}\""))),
        }
    }
}

fn auto() -> ThresholdValue {
    ThresholdValue::Word("auto".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    #[serde(default = "auto")]
    pub alpha: ThresholdValue,
    #[serde(default = "auto")]
    pub alpha_add: ThresholdValue,
    #[serde(default = "auto")]
    pub alpha_del: ThresholdValue,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self { alpha: auto(), alpha_add: auto(), alpha_del: auto() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSection {
    pub n0: usize,
    pub n: usize,
    pub c0: f64,
    pub c: f64,
}

fn default_seed() -> u64 {
    1
}

fn all_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn fixed() -> MatrixMode {
    MatrixMode::Fixed
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    pub frames: usize,
    pub realizations: usize,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "fixed")]
    pub matrix_mode: MatrixMode,
    #[serde(default)]
    pub ensemble: MatrixEnsemble,
    #[serde(default = "yes")]
    pub invariant_checks: bool,
    /// Also write an SVG chart next to the CSV/JSON output.
    #[serde(default)]
    pub svg: bool,
    pub sensing: SensingSection,
    pub model: ModelSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn build(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            model: self.model.build()?,
            n0: self.sensing.n0,
            n: self.sensing.n,
            c0: self.sensing.c0,
            c: self.sensing.c,
            frames: self.frames,
            realizations: self.realizations,
            algorithms: self.algorithms.clone(),
            matrix_mode: self.matrix_mode,
            ensemble: self.ensemble,
            master_seed: self.master_seed,
            thresholds: ThresholdConfig {
                alpha: self.thresholds.alpha.build()?,
                alpha_add: self.thresholds.alpha_add.build()?,
                alpha_del: self.thresholds.alpha_del.build()?,
            },
            invariant_checks: self.invariant_checks,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    ExperimentFile::parse(&read_text(path)?)?.build()
}

/// The parts of a config that sequence generation and analysis need; any
/// other keys (an experiment file's sensing section, say) are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub frames: Option<usize>,
    pub model: ModelSection,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_err)
    }
}

/// Where the certification matrix comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSource {
    Gaussian {
        n: usize,
        m: usize,
        #[serde(default = "default_seed")]
        seed: u64,
        /// Copy column `[from, to]` (a coherent pair on purpose).
        #[serde(default)]
        duplicate: Option<[usize; 2]>,
    },
    /// Orthonormal columns from the QR factor of a Gaussian draw (`n >= m`).
    Orthonormal {
        n: usize,
        m: usize,
        #[serde(default = "default_seed")]
        seed: u64,
        #[serde(default)]
        duplicate: Option<[usize; 2]>,
    },
    /// Whitespace-separated rows, one per line; `#` starts a comment.
    File { path: String },
}

impl MatrixSource {
    pub fn build(&self, base: &Path) -> Result<DenseMatrix> {
        match self {
            MatrixSource::Gaussian { n, m, seed, duplicate } => {
                let a = gen_gaussian_unit_columns(*n, *m, *seed).map_err(config_err)?;
                copy_column(a, *duplicate)
            }
            MatrixSource::Orthonormal { n, m, seed, duplicate } => {
                if n < m {
                    return Err(Error::Config(format!("orthonormal columns need n >= m, got {n} x {m}")));
                }
                let g = gen_gaussian_unit_columns(*n, *m, *seed).map_err(config_err)?;
                let q = g.as_nalgebra().clone().qr().q();
                copy_column(DenseMatrix::from_fn(*n, *m, |i, j| q[(i, j)]), *duplicate)
            }
            MatrixSource::File { path } => parse_matrix(&read_text(&base.join(path))?),
        }
    }
}

fn copy_column(mut a: DenseMatrix, duplicate: Option<[usize; 2]>) -> Result<DenseMatrix> {
    if let Some([from, to]) = duplicate {
        if from >= a.cols() || to >= a.cols() {
            return Err(Error::Config(format!("duplicate column index out of range 0..{}", a.cols())));
        }
        for r in 0..a.rows() {
            a.set(r, to, a.get(r, from));
        }
    }
    Ok(a)
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        rows.push(row.map_err(|e| Error::Parse { line: k + 1, msg: format!("bad number: {e}") })?);
    }
    DenseMatrix::from_rows(&rows)
}

/// Caller-asserted constants, keyed `"k"` for `delta_k` and `"k1,k2"` for `theta`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertedSection {
    #[serde(default)]
    pub delta: BTreeMap<String, f64>,
    #[serde(default)]
    pub theta: BTreeMap<String, f64>,
}

impl AssertedSection {
    pub fn build(&self) -> Result<AssertedRip> {
        let idx = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Config(format!("bad index '{s}': {e}")));
        let mut rip = AssertedRip::default();
        for (k, v) in &self.delta {
            rip.deltas.insert(idx(k)?, *v);
        }
        for (k, v) in &self.theta {
            let (a, b) = k.split_once(',').ok_or_else(|| Error::Config(format!("theta key '{k}' must be \"S1,S2\"")))?;
            rip.thetas.insert((idx(a)?, idx(b)?), *v);
        }
        Ok(rip)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyFile {
    pub theorem: Option<String>,
    /// Several matrices stand for a time-varying `A_t`.
    #[serde(default)]
    pub matrix: Vec<MatrixSource>,
    pub params: TheoremParams,
    #[serde(default)]
    pub asserted: Option<AssertedSection>,
}

impl CertifyFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn theorem(&self, override_id: Option<&str>) -> Result<TheoremId> {
        match override_id.or(self.theorem.as_deref()) {
            Some(id) => TheoremId::parse(id).map_err(config_err),
            None => Err(Error::Config("no theorem given".into())),
        }
    }
}
