use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("density has no positive weight")]
    EmptySupport,
    #[error("subset {subset:?} does not have {expected} elements drawn from a ground set of size {ground}")]
    ArityMismatch {
        subset: Vec<usize>,
        expected: usize,
        ground: usize,
    },
    #[error("negative or non-finite weight {0}")]
    NegativeWeight(f64),
    #[error("subset {0:?} listed more than once")]
    DuplicateKey(Vec<usize>),
    #[error("ground set of size {0} exceeds the 64-element bitmask limit")]
    GroundTooLarge(usize),
    #[error("coordinate {index} is negative ({value})")]
    NegativeCoordinate { index: usize, value: f64 },
    #[error("external field entry {index} is not positive ({value})")]
    NonpositiveField { index: usize, value: f64 },
    #[error("conditioning set has zero mass")]
    ZeroMassCondition,
    #[error("arity {ell} out of range for level {k}")]
    ArityOutOfRange { ell: usize, k: usize },
    #[error("up operator row for {0:?} has zero mass")]
    ZeroMassRow(Vec<usize>),
    #[error("state space of {states} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },
    #[error("superset completion of {0} elements exceeds the per-step budget")]
    MoveBudgetExceeded(usize),
    #[error("start state is not in the state space")]
    InvalidStart,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("function takes a negative value {0}")]
    NegativeFunction(f64),
    #[error("kernel is not reversible (detailed-balance residual {0:e})")]
    NonReversibleKernel(f64),
    #[error("base measure has a single support point")]
    DegenerateBase,
    #[error("ell = {ell} exceeds k - ceil(1/alpha) = {max}")]
    EllTooLarge { ell: usize, max: i64 },
    #[error("kernel is not ergodic")]
    NotErgodic,
    #[error("iteration cap {0} exceeded")]
    IterationCapExceeded(u64),
    #[error("rho0 must be positive, got {0}")]
    NonpositiveRho(f64),
    #[error("nu is not absolutely continuous with respect to mu")]
    SupportMismatch,
    #[error("marginal is infeasible for the support of mu")]
    InfeasibleMarginal,
    #[error("dual solver did not converge (gradient norm {0:e})")]
    NoConvergence(f64),
    #[error("moment matrix condition number {0:e} exceeds 1e12")]
    NumericalBreakdown(f64),
    #[error("contraction of the base measure is not certified at the requested epsilon")]
    ContractionNotCertified,
    #[error("interaction matrix is not symmetric (max deviation {0:e})")]
    AsymmetricMatrix(f64),
    #[error("||u||_2 = {0} exceeds the admissible bound")]
    NormTooLarge(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
