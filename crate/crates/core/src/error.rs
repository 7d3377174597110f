use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("matrix is rank deficient (sigma_min {sigma_min:e} <= {threshold:e})")]
    Singular { sigma_min: f64, threshold: f64 },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("signal model infeasible: {0}")]
    Model(String),

    #[error("inconsistent state: {0}")]
    State(String),

    #[error("enumeration needs {required} subsets but the budget is {budget}")]
    Budget { required: u128, budget: u64 },

    #[error("outside the bound's domain: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
