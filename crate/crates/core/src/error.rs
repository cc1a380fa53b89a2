use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violates a documented precondition.
    InvalidParameter(&'static str),
    DimensionMismatch { expected: usize, found: usize },
    /// Two centers coincide, which makes the kernel matrix singular.
    DuplicatePoints { first: usize, second: usize },
    /// Cholesky broke down even with the largest jitter on the ladder.
    NotPositiveDefinite { pivot: usize, jitter: f64, condition_estimate: f64 },
    EmptyPointSet,
    NotEnoughPoints { requested: usize, available: usize },
    /// The query point is not one of the data sites.
    NotADataSite,
    /// A regularizer identity failed beyond tolerance.
    IdentityViolated { identity: &'static str, deviation: f64, tolerance: f64 },
    /// More than the admissible fraction of regression clusters were rank deficient.
    TooManyRejectedClusters { rejected: usize, total: usize },
    ControlOutOfBounds { index: usize, value: f64, bound: f64 },
    /// Expression parsing failure with byte offset.
    Parse { position: usize, message: &'static str },
    UnknownVariable { position: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::DuplicatePoints { first, second } => {
                write!(f, "points {first} and {second} coincide")
            }
            Error::NotPositiveDefinite { pivot, jitter, condition_estimate } => write!(
                f,
                "matrix not numerically positive definite (pivot {pivot}, jitter {jitter:e}, condition estimate {condition_estimate:e})"
            ),
            Error::EmptyPointSet => write!(f, "point set is empty"),
            Error::NotEnoughPoints { requested, available } => {
                write!(f, "requested {requested} points but only {available} available")
            }
            Error::NotADataSite => write!(f, "point is not a data site"),
            Error::IdentityViolated { identity, deviation, tolerance } => write!(
                f,
                "identity `{identity}` violated: deviation {deviation:e} exceeds {tolerance:e}"
            ),
            Error::TooManyRejectedClusters { rejected, total } => {
                write!(f, "{rejected} of {total} clusters rank deficient")
            }
            Error::ControlOutOfBounds { index, value, bound } => {
                write!(f, "control sample {index} has component {value} outside [-{bound}, {bound}]")
            }
            Error::Parse { position, message } => write!(f, "parse error at {position}: {message}"),
            Error::UnknownVariable { position } => write!(f, "unknown variable at {position}"),
        }
    }
}

impl core::error::Error for Error {}
