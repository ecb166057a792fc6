use thiserror::Error;

/// Errors raised by the sampling, surrogate and reliability routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix decomposition failed: {0}")]
    Decomposition(String),

    #[error("sample budget exhausted after {n_used} draws (achieved CoV {cov:.3e}, best estimate {estimate:.6e})")]
    BudgetExhausted {
        estimate: f64,
        cov: f64,
        n_used: usize,
    },

    #[error("insufficient coverage: {accepted} points above the level, need at least {required}")]
    InsufficientCoverage { accepted: usize, required: usize },

    #[error("acceptance rate {rate:.3e} below floor {floor:.1e} in dimension {dim}; reduce the dimension or increase alpha")]
    DimensionalityLimit { rate: f64, floor: f64, dim: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("leverage-degenerate design: h_{index} = {leverage}")]
    LeverageDegenerate { index: usize, leverage: f64 },

    #[error("correlation matrix not positive definite after nugget {nugget:.1e}")]
    Conditioning { nugget: f64 },

    #[error("no failures observed in {n_used} samples; coefficient of variation undefined")]
    NoFailures { n_used: usize },

    #[error("degenerate importance-sampling proposal: effective sample size {ess:.2}")]
    DegenerateProposal { ess: f64 },

    #[error("problem `{0}` is already registered")]
    DuplicateProblem(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("empty heat: {0}")]
    EmptyHeat(String),

    #[error("external model failed: {0}")]
    External(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
