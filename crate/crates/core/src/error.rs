use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability grid is empty or ragged")]
    MalformedGrid,

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("negative probability {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("entries do not sum to 1 (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("marginal of {axis} has a zero entry at index {index}")]
    ZeroMarginal { axis: char, index: usize },

    #[error("vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("KL divergence undefined: q[{index}] = 0 while p[{index}] > 0")]
    SupportViolation { index: usize },

    #[error("leakage matrix P_X|Y is not of full row rank")]
    RankDeficient,

    #[error("polytope operations require |X| < |Y| (got |X| = {x}, |Y| = {y})")]
    AlphabetSizes { x: usize, y: usize },

    #[error("no index set produces a strictly positive base point")]
    EmptyOmega1,

    #[error("extreme point has negative entry {value} at index {index}")]
    InfeasiblePoint { index: usize, value: f64 },

    #[error("invalid perturbation vector: {0}")]
    InvalidPerturbation(String),

    #[error("matrix is singular or too ill-conditioned")]
    Singular,

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex exceeded {0} pivots")]
    CycleLimitExceeded(usize),

    #[error("recovered mechanism violates an invariant: {0}")]
    ReconstructionMismatch(String),

    #[error("eps = {eps} outside the admissible regime [0, {limit})")]
    RegimeViolation { eps: f64, limit: f64 },

    #[error("target leakage {target} nats not attainable; achievable range is [0, {max}]")]
    BisectionFailure { target: f64, max: f64 },

    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    #[error("oracle found no feasible mechanism")]
    NoFeasiblePoint,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
