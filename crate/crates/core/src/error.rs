use thiserror::Error;

/// Errors raised by validation and by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state space must contain at least one state")]
    EmptyStateSpace,
    #[error("duplicate state label {0:?}")]
    DuplicateLabel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("negative entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },
    #[error("negative off-diagonal rate at ({row}, {col})")]
    NegativeOffDiagonal { row: usize, col: usize },
    #[error("row {row} sums to {sum}, outside tolerance")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("chain is not irreducible; invariant distribution is not unique")]
    NotIrreducible,
    #[error("linear solve residual {residual:e} exceeds tolerance")]
    SolverFailure { residual: f64 },
    #[error("state {0} has zero mass under the reference distribution")]
    ZeroMass(usize),
    #[error("distribution is not invariant (residual {residual:e})")]
    NotInvariant { residual: f64 },
    #[error("initial distribution charges state {0}, which has zero invariant mass")]
    NotAbsolutelyContinuous(usize),
    #[error("p = {0} is outside (1, inf]; p = 1 gives q = inf and a vacuous bound")]
    InvalidP(f64),
    #[error("observable is not centered: E_mu[f] = {mean:e}")]
    NotCentered { mean: f64 },
    #[error("gap is undefined on a one-state space")]
    DegenerateStateSpace,
    #[error("chain is not reversible (max |D P - P^T D| = {deviation:e})")]
    NotReversible { deviation: f64 },
    #[error("iterated Poincare gap is zero but Var[h] = {variance:e} > 0")]
    GapZero { variance: f64 },
    #[error("|theta| = {theta} must be below eta_p / (2M) = {limit}")]
    ThetaOutOfRange { theta: f64, limit: f64 },
    #[error("invalid bound query: {0}")]
    InvalidQuery(String),
    #[error("exact oracle needs {required} paths or count cells, cap is {cap}")]
    TooLarge { required: f64, cap: f64 },
    #[error("matrix exponential overflows (norm {norm:e})")]
    Overflow { norm: f64 },
    #[error("invalid counts: {successes} successes in {trials} trials")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("chain file: {0}")]
    Schema(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyStateSpace => "EmptyStateSpace",
            Error::DuplicateLabel(_) => "DuplicateLabel",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::NegativeOffDiagonal { .. } => "NegativeOffDiagonal",
            Error::RowSumViolation { .. } => "RowSumViolation",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::NotIrreducible => "NotIrreducible",
            Error::SolverFailure { .. } => "SolverFailure",
            Error::ZeroMass(_) => "ZeroMass",
            Error::NotInvariant { .. } => "NotInvariant",
            Error::NotAbsolutelyContinuous(_) => "NotAbsolutelyContinuous",
            Error::InvalidP(_) => "InvalidP",
            Error::NotCentered { .. } => "NotCentered",
            Error::DegenerateStateSpace => "DegenerateStateSpace",
            Error::NotReversible { .. } => "NotReversible",
            Error::GapZero { .. } => "GapZero",
            Error::ThetaOutOfRange { .. } => "ThetaOutOfRange",
            Error::InvalidQuery(_) => "InvalidQuery",
            Error::TooLarge { .. } => "TooLarge",
            Error::Overflow { .. } => "Overflow",
            Error::InvalidCounts { .. } => "InvalidCounts",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Schema(_) => "Schema",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
