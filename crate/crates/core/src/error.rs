use thiserror::Error;

/// Errors produced by the optmht core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("u = {u} is outside the domain of the {model} density")]
    Domain { model: &'static str, u: f64 },

    #[error("{0} does not support this operation")]
    UnsupportedVariant(&'static str),

    #[error("non-finite integrand value {value} at node ({}, {}, {})", node[0], node[1], node[2])]
    NonFinite { node: [f64; 3], value: f64 },

    #[error("invalid p-value at index {index}: {value}")]
    InvalidPValue { index: usize, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("replication {rep} failed: {source}")]
    Replication {
        rep: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}
