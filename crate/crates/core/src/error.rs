use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("invalid fractional order: {0}")]
    InvalidOrder(String),
    #[error("weight sign violation: {0}")]
    WeightSignViolation(String),
    #[error("(lambda, mu) must not both vanish")]
    ZeroParameters,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("sample array has {got} entries, grid has {expected} nodes")]
    SampleLengthMismatch { expected: usize, got: usize },
    #[error("non-finite weight value at node {0}")]
    NonFiniteWeight(usize),
    #[error("grid mismatch: expected {expected} nodes, got {got}")]
    GridMismatch { expected: usize, got: usize },
    #[error("regularization floor must be positive, got {0}")]
    NonpositiveEpsilon(f64),
    #[error("fiber parameter t must be positive, got {0}")]
    NonpositiveT(f64),
    #[error("squared norm must be positive, got {0}")]
    NonpositiveNorm(f64),
    #[error("singular integral K must be positive, got {0}")]
    NonpositiveK(f64),
    #[error("Sobolev constant estimate must be positive, got {0}")]
    NonpositiveS(f64),
    #[error("sup of b+ must be positive, got {0}")]
    NonpositiveBSup(f64),
    #[error("aggregate parameter Lambda must be positive, got {0}")]
    NonpositiveLambda(f64),
    #[error("no sign change found while bracketing a fiber root")]
    NoBracket,
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("direction search failed after {0} samples")]
    DirectionSearchFailed(usize),
    #[error("no admissible direction: every restart hit a fiber with no admissible root")]
    NoAdmissibleDirection,
    #[error("solver did not converge")]
    NotConverged,
    #[error("gap check requires converged inputs")]
    NotConvergedInput,
    #[error("every interior node is masked at delta = {0}")]
    AllMasked(f64),
    #[error("S estimate {s_est} exceeds the quotient {quotient} of a pair component")]
    CandidateNotIncluded { s_est: f64, quotient: f64 },
    #[error("form is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
