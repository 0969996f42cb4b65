use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument out of range: {0}")]
    InvalidRange(String),

    #[error("operation not supported for this law or model: {0}")]
    Unsupported(String),

    #[error("second moments are not finite for {0}")]
    InfiniteMoment(String),

    #[error("degenerate variance: the CLT scale constant is zero")]
    DegenerateVariance,

    #[error("model is not stable (E X(1) = {mean_increment} >= 0)")]
    UnstableModel { mean_increment: f64 },

    #[error("degenerate level: {0}")]
    DegenerateLevel(String),

    #[error("transform diverges: L12 = {0} >= 1")]
    DivergentTransform(f64),

    #[error("lattice too coarse: estimated error {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },

    #[error("lattice too large: {cells} cells exceeds the limit of {limit}")]
    GridTooLarge { cells: usize, limit: usize },

    #[error("numerical inversion did not reach tolerance: estimate {value}, error {error:.3e}")]
    AccuracyNotReached { value: f64, error: f64 },

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("root finder failed to converge after {0} iterations")]
    NoConvergence(usize),

    #[error("empty sample")]
    EmptySample,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
