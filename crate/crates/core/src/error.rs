use thiserror::Error;

/// Errors produced by the optimizer, its math layer and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} is outside the domain of `{what}`")]
    Domain { what: String, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("malformed data: {0}")]
    MalformedData(String),

    #[error("missing result cell: {0}")]
    MissingCell(String),

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain_err(what: impl Into<String>, value: f64) -> Error {
    Error::Domain {
        what: what.into(),
        value,
    }
}
