use thiserror::Error;

use crate::geometry::Point;

/// Every fallible operation in the crate returns this error.
///
/// Variants fall into two families that the CLI maps onto distinct exit
/// codes: configuration/input problems and numerical failures raised while
/// a run is in progress. See [`Error::is_config`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("reflection did not converge for point {0:?}")]
    ReflectionFailed(Point),

    #[error("rate `{name}` evaluated to {value} which exceeds its cap {cap}")]
    RateCap { name: &'static str, value: f64, cap: f64 },

    #[error("rate `{name}` is invalid ({value})")]
    InvalidRate { name: &'static str, value: f64 },

    #[error("pair rate requested for coincident positions {0:?}")]
    DegeneratePair(Point),

    #[error("placement produced a point outside the domain: {0:?}")]
    Placement(Point),

    #[error("channel `{0}` fired but its selection weights sum to zero")]
    StaleTotals(&'static str),

    #[error("population {population} exceeds the configured limit {limit} at t = {time}")]
    PopulationExplosion { population: usize, limit: usize, time: f64 },

    #[error("negative density {value} in cell {cell}")]
    Negativity { cell: usize, value: f64 },

    #[error("probability mass leaked through truncation: {leak:e} > {tolerance:e}")]
    Truncation { leak: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the user's configuration or inputs rather
    /// than by the numerics of a run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Input(_)
                | Error::DimensionMismatch { .. }
                | Error::RateCap { .. }
                | Error::InvalidRate { .. }
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ReflectionFailed(_)
                | Error::DegeneratePair(_)
                | Error::Placement(_)
                | Error::StaleTotals(_)
                | Error::PopulationExplosion { .. }
                | Error::Negativity { .. }
                | Error::Truncation { .. }
                | Error::Numerical(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
