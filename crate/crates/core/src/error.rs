use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its invariant.
    #[error("invalid `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// Argument outside the mathematical domain of a function.
    #[error("domain error in {func}: {reason}")]
    Domain { func: &'static str, reason: String },

    /// Sample moments cannot identify the distribution (zero spread).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Not enough threshold exceedances to emit an extreme-value estimate.
    #[error("estimate unavailable: {have} exceedances, need {need}")]
    EstimateUnavailable { have: usize, need: usize },

    #[error("empty input to {0}")]
    Empty(&'static str),

    /// Constant service rate does not exceed the mean arrival rate.
    #[error("unstable queue: service rate {service} <= arrival rate {arrival}")]
    Unstable { service: f64, arrival: f64 },

    #[error("moment of order {order} undefined for shape xi = {xi}")]
    UndefinedMoment { order: u8, xi: f64 },

    #[error("unknown scheme `{0}` (known: {1})")]
    UnknownScheme(String, String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A computed output failed a validity check before being written.
    #[error("invalid output: {0}")]
    InvalidOutput(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(func: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            func,
            reason: reason.into(),
        }
    }
}
