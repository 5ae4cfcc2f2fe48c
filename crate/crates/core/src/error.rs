use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("field degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: u8, right: u8 },

    #[error("{what} out of domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("enumerating {what} needs 2^{size_log2} items, above the limit of {limit}")]
    EnumerationLimit { what: String, size_log2: u32, limit: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("query budget violated: {used} oracle calls against a budget of {budget}")]
    BudgetViolation { used: usize, budget: usize },

    #[error("protocol order error: {0}")]
    ProtocolOrder(String),

    #[error("verifier is not representable as a function oracle: {0}")]
    NotOracleRepresentable(String),

    #[error("cannot construct {0}")]
    NotConstructible(String),

    #[error("degenerate protocol: {0}")]
    DegenerateSpec(String),

    #[error("wrong protocol shape: expected {expected}, got {got}")]
    WrongShape { expected: String, got: String },
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { what, detail: detail.into() }
    }

    pub(crate) fn config(detail: impl Into<String>) -> Self {
        Error::Config(detail.into())
    }

    /// True for errors caused by resource limits or query budgets rather than
    /// malformed input.
    pub fn is_limit(&self) -> bool {
        matches!(self, Error::EnumerationLimit { .. } | Error::BudgetViolation { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that `2^size_log2` items fit under `limit`.
pub(crate) fn check_enumerable(what: impl Into<String>, size_log2: u32, limit: u64) -> Result<u64> {
    if size_log2 < 64 && (1u64 << size_log2) <= limit {
        Ok(1u64 << size_log2)
    } else {
        Err(Error::EnumerationLimit { what: what.into(), size_log2, limit })
    }
}
