use thiserror::Error;

/// Errors raised by the synthesis and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("chain dimension {0} outside supported range 1..=16")]
    DimensionOutOfRange(usize),

    #[error("Gramian inversion residual {residual:.3e} exceeds 1e-10 for k = {k}")]
    IllConditioned { k: usize, residual: f64 },

    #[error("controllability-function root solve did not converge: {0}")]
    NonConvergence(String),

    #[error("callback rejected state: {0}")]
    DomainError(String),

    #[error("no root of the control equation in the bracket [{lo}, {hi}]")]
    RootBracketFailure { lo: f64, hi: f64 },

    #[error("cubic has no real root of the requested sign (constant term {constant:.6e})")]
    NoRealRoot { constant: f64 },

    #[error("Lie bracket nesting depth {0} exceeds the cap of 3")]
    CapExceeded(usize),

    #[error("column rank c_{column} differs across probe samples ({ranks:?})")]
    RegularityViolation { column: usize, ranks: Vec<usize> },

    #[error("kept columns reach rank {rank} < n = {n}")]
    RankDeficient { rank: usize, n: usize },

    #[error("step {step} ran {elapsed:.6} time units, more than twice its bound {bound:.6}")]
    StepTimeout {
        step: usize,
        elapsed: f64,
        bound: f64,
    },

    #[error("pinned block {block} drifted to {residual:.3e} at t = {t:.6} (limit {limit:.1e})")]
    HoldViolation {
        block: usize,
        residual: f64,
        limit: f64,
        t: f64,
    },

    #[error("simulation reached t_max = {0} before all steps completed")]
    Timeout(f64),

    #[error("state became non-finite at t = {0}")]
    NonFinite(f64),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Whether the error stems from bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::DimensionOutOfRange(_) | Error::UnknownScenario(_)
        )
    }
}
