use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or configuration value violates its invariant.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// A monitored physical invariant drifted past its tolerance.
    #[error("numerical consistency failure at t = {t}: {quantity} = {value:e} (tolerance {tolerance:e})")]
    Numerical {
        quantity: &'static str,
        t: f64,
        value: f64,
        tolerance: f64,
    },

    /// The truncated Fock space of the oracle is no longer adequate.
    #[error("Fock cutoff leakage bound {bound:e} exceeds {limit:e}; raise n_max or shorten t_end")]
    CutoffLeakage { bound: f64, limit: f64 },

    #[error("unknown propagation method `{0}` (known: {1})")]
    UnknownMethod(String, String),

    #[error("traces are not sampled on the same time grid: {0}")]
    GridMismatch(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
