use thiserror::Error;

/// Every failure the library can report. `code()` gives the stable
/// upper-case identifier that reports and the CLI print.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("d∘d is nonzero in degree {degree}")]
    DSquaredNonzero { degree: usize },
    #[error("generator {id} does not strictly lower the filtration under d")]
    FiltrationViolation { id: String },
    #[error("ring {0} is not a field")]
    NotAField(String),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("chain is not a boundary: {0}")]
    NotABoundary(String),
    #[error("boundary equation has rational but no ring solution")]
    UnsolvableOverRing,
    #[error("unknown model {0}")]
    UnknownModel(String),
    #[error("degenerate critical point near {0:?}")]
    DegenerateCriticalPoint(Vec<f64>),
    #[error("critical point census mismatch: {0}")]
    CensusMismatch(String),
    #[error("integration step limit exceeded from {0:?}")]
    StepLimitExceeded(Vec<f64>),
    #[error("trajectory left the model domain at {0:?}")]
    LeftDomain(Vec<f64>),
    #[error("saddle-to-saddle connection detected: {0}")]
    NontransverseConnection(String),
    #[error("bisection failed: {0}")]
    BisectionFailed(String),
    #[error("dual complex sign relation violated at ({p}, {q})")]
    DualmViolation { p: String, q: String },
    #[error("chain passes within the trivialization radius of {0}")]
    ChainTooCloseToCritical(String),
    #[error("nontransverse crossing persisted after jitter")]
    NontransverseCrossing,
    #[error("simultaneous crossing of both chains persisted after jitter")]
    SimultaneousCrossing,
    #[error("intersection not transverse after jitter")]
    NontransverseAfterJitter,
    #[error("cycle is not null-homologous")]
    NotNullHomologous,
    #[error("carriers intersect")]
    CarriersIntersect,
    #[error("boundary trajectories cannot be paired at {0}")]
    UnpairableDelta(String),
    #[error("no linked pair found")]
    NoLinkedPairFound,
    #[error("invalid circle configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DSquaredNonzero { .. } => "D_SQUARED_NONZERO",
            Error::FiltrationViolation { .. } => "FILTRATION_VIOLATION",
            Error::NotAField(_) => "NOT_A_FIELD",
            Error::DegreeMismatch(_) => "DEGREE_MISMATCH",
            Error::NotABoundary(_) => "NOT_A_BOUNDARY",
            Error::UnsolvableOverRing => "UNSOLVABLE_OVER_RING",
            Error::UnknownModel(_) => "UNKNOWN_MODEL",
            Error::DegenerateCriticalPoint(_) => "DEGENERATE_CRITICAL_POINT",
            Error::CensusMismatch(_) => "CENSUS_MISMATCH",
            Error::StepLimitExceeded(_) => "STEP_LIMIT_EXCEEDED",
            Error::LeftDomain(_) => "LEFT_DOMAIN",
            Error::NontransverseConnection(_) => "NONTRANSVERSE_CONNECTION",
            Error::BisectionFailed(_) => "BISECTION_FAILED",
            Error::DualmViolation { .. } => "DUALM_VIOLATION",
            Error::ChainTooCloseToCritical(_) => "CHAIN_TOO_CLOSE_TO_CRITICAL",
            Error::NontransverseCrossing => "NONTRANSVERSE_CROSSING",
            Error::SimultaneousCrossing => "SIMULTANEOUS_CROSSING",
            Error::NontransverseAfterJitter => "NONTRANSVERSE_AFTER_JITTER",
            Error::NotNullHomologous => "NOT_NULL_HOMOLOGOUS",
            Error::CarriersIntersect => "CARRIERS_INTERSECT",
            Error::UnpairableDelta(_) => "UNPAIRABLE_DELTA",
            Error::NoLinkedPairFound => "NO_LINKED_PAIR_FOUND",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::Unsupported(_) => "UNSUPPORTED",
            Error::Parse(_) => "PARSE_ERROR",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
