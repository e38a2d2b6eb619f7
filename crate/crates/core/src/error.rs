use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity {0} outside the supported range 1..={max}", max = crate::predicate::MAX_ARITY)]
    ArityOutOfRange(usize),

    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate value {0} is not +1 or -1")]
    NotASign(i64),

    #[error("predicate is not even: point {0:#x} satisfies P but its negation does not")]
    NotEven(u32),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error("invalid multigraph: {0}")]
    InvalidGraph(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("distribution has zero mass on the satisfying set")]
    ZeroSupportedMass,

    #[error("LP iteration limit ({0}) exceeded")]
    LpIterationLimit(usize),

    #[error("hyperplane has non-positive margin {0}")]
    NonPositiveMargin(f64),

    #[error("normalization did not converge within {0} doublings")]
    NormalizationDiverged(usize),

    #[error("planted generation exhausted its rejection budget after {attempts} attempts ({accepted} constraints accepted)")]
    RejectionBudget { attempts: usize, accepted: usize },

    #[error("empty assignment pool")]
    EmptyPool,

    #[error("instance/solution mismatch: {0}")]
    ShapeMismatch(String),

    #[error("certificate does not match the predicate: {0}")]
    CertificateMismatch(String),

    #[error("majority needs an odd number of inputs, got {0}")]
    EvenMajority(usize),

    #[error("{what} {got} exceeds the cap {cap}")]
    CapExceeded { what: &'static str, got: usize, cap: usize },

    #[error("function {0} is not odd")]
    NotOdd(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
