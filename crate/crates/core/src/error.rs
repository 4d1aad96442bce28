use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A special function or density was evaluated outside its domain.
    #[error("{func}: argument {value} is outside the domain ({expected})")]
    Domain {
        func: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The integrand produced NaN; `abscissa` is in the caller's variable.
    #[error("integrand returned NaN at abscissa {abscissa:e}")]
    NanIntegrand { abscissa: f64 },

    /// A single-integral shortcut disagreed with its double-integral source.
    #[error(
        "model consistency: {what}: single integral {single:.12e} vs double integral \
         {double:.12e} (|diff| = {diff:.3e}, limit {limit:.1e})"
    )]
    ModelConsistency {
        what: String,
        single: f64,
        double: f64,
        diff: f64,
        limit: f64,
    },

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
