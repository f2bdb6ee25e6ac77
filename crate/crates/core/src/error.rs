use thiserror::Error;

/// Failure modes of the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rank deficient matrix: {0}")]
    RankDeficient(String),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("integration failure: {0}")]
    IntegrationFailure(String),
    #[error("negative variance {0:e}")]
    NegativeVariance(f64),
    #[error("the admissible control set is empty")]
    InfeasibleU,
    #[error("singular saddle-point system: {0}")]
    SingularKkt(String),
    #[error("an observation point coincides with the estimation point")]
    PointOnTarget,
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("Riccati solution exceeded the blow-up bound near t = {0}")]
    BlowUp(f64),
    #[error("observation operator is not injective on the null space of the problem")]
    InjectivityFailure,
    #[error("coefficient derivatives are inconsistent: {0}")]
    CoefficientRoughness(String),
    #[error("boundary form completion is numerically singular")]
    SingularCompletion,
    #[error("saturating direction is degenerate")]
    DegenerateDirection,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
