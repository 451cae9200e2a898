use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Variants carry enough context to be printed directly by the CLI; the FFI
/// layer maps each variant onto a stable integer code (see [`Error::code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("direction has zero length")]
    ZeroDirection,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point lies outside the domain")]
    PointOutside,
    #[error("point lies outside the sampling box of the sublevel domain")]
    OutsideBox,
    #[error("point lies outside the unit disc")]
    OutsideDisc,
    #[error("point lies at the puncture")]
    AtPuncture,
    #[error("point lies outside the ball")]
    OutsideBall,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("solver found no feasible disc: {0}")]
    Infeasible(String),
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("candidate function rejected: {0}")]
    CandidateInvalid(String),
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("normal set has rank {rank}, need at least {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("domain is not contained in the ball: {0}")]
    NotContained(String),
    #[error("chain construction failed: {0}")]
    ChainFailed(String),
    #[error("polyhedral domain appears to be empty")]
    EmptyDomain,
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable numeric code shared with the C ABI.
    pub fn code(&self) -> i32 {
        match self {
            Error::ZeroDirection => 10,
            Error::DimensionMismatch { .. } => 11,
            Error::InvalidInput(_) => 12,
            Error::PointOutside => 20,
            Error::OutsideBox => 21,
            Error::OutsideDisc => 22,
            Error::AtPuncture => 23,
            Error::OutsideBall => 24,
            Error::Syntax { .. } => 30,
            Error::UnknownVariable(_) => 31,
            Error::Domain(_) => 32,
            Error::NonFinite => 33,
            Error::Infeasible(_) => 40,
            Error::NoConvergence(_) => 41,
            Error::CandidateInvalid(_) => 50,
            Error::HypothesisFailed(_) => 51,
            Error::RankDeficient { .. } => 52,
            Error::NotContained(_) => 53,
            Error::ChainFailed(_) => 60,
            Error::EmptyDomain => 61,
            Error::ConstructionFailed(_) => 62,
            Error::Io(_) => 70,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
