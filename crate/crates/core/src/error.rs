use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid projection matrix: {0}")]
    InvalidProjection(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("frequency index {k:?} outside K_N^n for N = {n_modes}")]
    IndexOutOfRange { k: Vec<i64>, n_modes: usize },

    #[error("vector index {index} outside [0, {size})")]
    VectorIndexOutOfRange { index: usize, size: usize },

    #[error("expected a frequency vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duplicate mode {0:?}")]
    DuplicateMode(Vec<i64>),

    #[error("modes {first:?} and {second:?} fold onto the same residue for N = {n_modes}")]
    ModeCollision {
        first: Vec<i64>,
        second: Vec<i64>,
        n_modes: usize,
    },

    #[error("all modes filtered out by threshold {0:e}")]
    AllModesFiltered(f64),

    #[error("fields live on different lattices")]
    LatticeMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dense assembly of a {size}x{size} matrix exceeds the limit of {limit}")]
    TooLargeForDense { size: usize, limit: usize },

    #[error("iterative solve did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("Krylov breakdown at iteration {iteration} (relative residual {residual:e})")]
    Breakdown {
        iteration: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("dense factorisation failed: matrix is not Hermitian positive definite")]
    NotPositiveDefinite,

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("convergence order undefined: {0}")]
    UndefinedOrder(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolver(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Whether the failure originates in the numerical solve rather than in
    /// the inputs. The CLI maps these to a distinct exit code.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NotConverged { .. } | Error::Breakdown { .. } | Error::NotPositiveDefinite | Error::NonFinite(_) => {
                true
            }
            Error::Step { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
