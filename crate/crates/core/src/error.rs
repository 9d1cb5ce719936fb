use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid horizon T = {0}; the horizon must be positive")]
    InvalidHorizon(f64),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("matrix is not positive semidefinite (quadratic form {0:e})")]
    MatrixNotPsd(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("infeasible data: {0}")]
    InfeasibleData(String),

    #[error("degenerate derivative: terminal distance {0:e} is too small")]
    DegenerateDerivative(f64),

    #[error("sign inconsistency: T-derivative functional {0:e} is not positive at the root")]
    SignInconsistency(f64),

    #[error("target unreachable: delta(T_max = {t_max}) = {delta} > 0")]
    InfeasibleHorizon { t_max: f64, delta: f64 },

    #[error("Newton iteration did not converge in {steps} steps (best T = {best_t}, delta = {best_delta:e})")]
    NonConvergence {
        steps: usize,
        best_t: f64,
        best_delta: f64,
    },

    #[error("study row {row} (M = {m}, n_div = {n_div}) failed: {source}")]
    StudyRow {
        row: usize,
        m: usize,
        n_div: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-parsable identifier, used by the CLI on stderr.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidHorizon(_) => "invalid-horizon",
            Error::SingularSystem(_) => "singular-system",
            Error::MatrixNotPsd(_) => "matrix-not-psd",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InfeasibleData(_) => "infeasible-data",
            Error::DegenerateDerivative(_) => "degenerate-derivative",
            Error::SignInconsistency(_) => "sign-inconsistency",
            Error::InfeasibleHorizon { .. } => "infeasible-horizon",
            Error::NonConvergence { .. } => "non-convergence",
            Error::StudyRow { source, .. } => source.code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
