use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("photon number {n} exceeds truncation n_max = {n_max}")]
    Truncation { n: usize, n_max: usize },

    #[error("invalid photon statistics: {0}")]
    InvalidStatistics(String),

    #[error("normalization undefined: mean photon number is zero")]
    ZeroMean,

    #[error("estimator undefined: {0}")]
    UndefinedEstimator(String),

    #[error("no herald events recorded")]
    NoHeralds,

    #[error("fit dataset is empty or has fewer than {min} points")]
    EmptyDataset { min: usize },

    #[error("all fit weights are zero")]
    ZeroWeights,

    #[error("{0}")]
    Usage(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain { name, value, expected }
    }

    /// True for failures of the numerics rather than of the input format.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ZeroMean
                | Error::UndefinedEstimator(_)
                | Error::NoHeralds
                | Error::ZeroWeights
                | Error::Truncation { .. }
        )
    }
}
