use std::path::PathBuf;

use thiserror::Error;

use crate::data::Side;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
    Classification,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),
    #[error("input has no data rows")]
    Empty,
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` is missing or not a finite number (`{value}`)")]
    BadCell { row: usize, column: String, value: String },
    #[error("sequences have different lengths (x: {x}, y: {y}, t: {t})")]
    LengthMismatch { x: usize, y: usize, t: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("treatment value {value} at index {index} is outside [0, 1]")]
    TreatmentRange { index: usize, value: f64 },
    #[error("all observations lie on the {0} side of the cutoff")]
    OneSided(Side),
    #[error("the {side} side has {have} observation(s); at least {needed} are required")]
    TooFewObservations { side: Side, have: usize, needed: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient support on the {side} side at bandwidth {h}: fewer than {needed} distinct in-window points")]
    InsufficientSupport { side: Side, h: f64, needed: usize },
    #[error("no bandwidth admits well-defined weights on both sides")]
    NoValidBandwidth,
    #[error("all weights are zero")]
    ZeroWeights,
    #[error("standard deviation is zero at bandwidth {h}; variance estimates vanish in the window")]
    DegenerateVariance { h: f64 },
    #[error("rank-deficient design in {0}")]
    RankDeficient(&'static str),
    #[error("first-stage estimate {tau_t:.3e} is below the floor {floor:.1e}; the delta-method interval is undefined under weak identification")]
    WeakIdentification { tau_t: f64, floor: f64 },
    #[error("confidence set could not be classified after {expansions} grid expansions (roots: {roots:?}, tau_t CI: [{ci_lo}, {ci_hi}])")]
    Classification {
        expansions: usize,
        roots: Vec<f64>,
        ci_lo: f64,
        ci_hi: f64,
    },
    #[error("quadratic program did not converge after {0} iterations")]
    QpNonConvergence(usize),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Empty
            | Error::MissingColumn(_)
            | Error::BadCell { .. }
            | Error::LengthMismatch { .. }
            | Error::NonFinite(_)
            | Error::TreatmentRange { .. }
            | Error::OneSided(_)
            | Error::TooFewObservations { .. } => ErrorKind::Data,
            Error::Classification { .. } => ErrorKind::Classification,
            _ => ErrorKind::Numeric,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
