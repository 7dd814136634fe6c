use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("observation {index} = {value} outside support [{lo}, {hi}]")]
    OutOfBounds {
        index: u64,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid stake {0} (must lie in [0, 1])")]
    InvalidStake(f64),

    #[error("stream desync: plus branch at k={plus}, minus branch at k={minus}")]
    StreamDesync { plus: u64, minus: u64 },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("effective stake undefined: every mixture node is absorbed")]
    UndefinedEffectiveStake,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("no positive growth: E(T) = {mean} is not below mu = {mu}")]
    NoPositiveGrowth { mean: f64, mu: f64 },

    #[error("expected sample number is infinite: lambda(c) = {lambda} <= 0")]
    InfiniteExpectedSample { lambda: f64 },

    #[error("constant observation {t} never drives the martingale to 1/alpha")]
    NeverRejects { t: f64 },

    #[error("exact stopping distribution unsupported: {0}")]
    StateSpaceTooLarge(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("session `{0}` not found")]
    SessionNotFound(String),

    #[error("stale expected_k {expected}: the session expects {actual}")]
    Conflict { expected: u64, actual: u64 },

    #[error("replay mismatch at event {index}: {reason}")]
    ReplayMismatch { index: usize, reason: String },

    #[error("storage error: {0}")]
    Storage(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Storage(e.to_string())
    }
}
