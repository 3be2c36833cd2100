use std::fmt;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure raised by a user-supplied system function (drift, impulse map,
/// non-local map, history or generator matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct CallbackError(pub String);

impl fmt::Display for CallbackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CallbackError {}

impl From<String> for CallbackError {
    fn from(s: String) -> Self {
        CallbackError(s)
    }
}

impl From<&str> for CallbackError {
    fn from(s: &str) -> Self {
        CallbackError(s.to_owned())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside the domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {what} at t = {time}")]
    NonFinite { what: &'static str, time: f64 },

    #[error("{what} failed at t = {time}: {source}")]
    Callback {
        what: &'static str,
        time: f64,
        #[source]
        source: CallbackError,
    },

    #[error("invalid system: {}", format_violations(.0))]
    InvalidSpec(Vec<Violation>),

    #[error("trajectories are defined on different grids: {0}")]
    GridMismatch(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn callback(what: &'static str, time: f64, source: CallbackError) -> Self {
        Error::Callback { what, time, source }
    }
}
