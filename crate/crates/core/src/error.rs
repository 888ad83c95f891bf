//! Crate-wide error type for file-backed and multi-step operations.
//! Low-level value types keep their own focused parse errors and convert in.

use thiserror::Error;

use crate::addr::{Ip6, ParseAddrError, ParsePrefixError};

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    AddrParse(#[from] ParseAddrError),

    #[error(transparent)]
    PrefixParse(#[from] ParsePrefixError),

    #[error(transparent)]
    MacParse(#[from] crate::eui64::ParseMacError),

    #[error(transparent)]
    PrefixLoad(#[from] crate::prefix_map::LoadError),

    #[error(transparent)]
    OuiDb(#[from] crate::eui64::OuiDbError),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("response for unplanned target {0}")]
    UnplannedResponse(Ip6),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("line {line}: {reason}: {text:?}")]
    Line {
        line: usize,
        text: String,
        reason: String,
    },

    #[error("{malformed} of {total} lines malformed ({pct:.2}%), above the 1% limit")]
    MalformedRate {
        malformed: u64,
        total: u64,
        pct: f64,
    },

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Stable short tag for machine-readable error envelopes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyInput(_) => "empty_input",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::AddrParse(_) | Error::PrefixParse(_) | Error::MacParse(_) => "parse",
            Error::PrefixLoad(_) | Error::OuiDb(_) | Error::Line { .. } => "load",
            Error::Config(_) => "config",
            Error::Scenario(_) => "scenario",
            Error::UnplannedResponse(_) => "unplanned_response",
            Error::Argument(_) => "argument",
            Error::MalformedRate { .. } => "malformed_rate",
            Error::Other(_) => "other",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
