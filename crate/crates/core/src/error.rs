use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration cap exceeded for {what}: need {required}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        required: u128,
        cap: u128,
    },

    #[error("instance too large: needs {required_bytes} bytes, budget is {budget_bytes}")]
    Memory {
        required_bytes: u128,
        budget_bytes: u128,
    },

    #[error("chain is frozen: p = k = {0}, there are no swap moves")]
    FrozenChain(usize),

    #[error("energy undefined: instance has no positive tests")]
    UndefinedEnergy,

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
