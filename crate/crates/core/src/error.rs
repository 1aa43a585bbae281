use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site outside bulk: {site} not in 1..={max}")]
    SiteOutsideBulk { site: i64, max: usize },

    #[error("non-summable kernel: {0}")]
    NonSummableKernel(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid rates: {0}")]
    InvalidRates(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("capacity overflow at site {site}: hard cap {cap}")]
    CapacityOverflow { site: usize, cap: u32 },

    #[error("configuration mismatch: {0}")]
    Mismatch(String),

    #[error("window of {requested} sites exceeds configured maximum {max}")]
    WindowTooLarge { requested: usize, max: usize },

    #[error("state space too large: {states} states (limit {limit})")]
    StateSpaceTooLarge { states: u128, limit: usize },

    #[error("cone violated: {0}")]
    ConeViolated(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("CFL violated: dt={dt} exceeds dx={dx}")]
    CflViolated { dt: f64, dx: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
