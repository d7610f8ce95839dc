use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular tridiagonal system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate orbital pair: Gram determinant {det:e}")]
    DegeneratePair { det: f64 },

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("flow did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("flow stagnated: energy increase with step {tau:e} below the floor after {iterations} iterations")]
    Stagnation { tau: f64, iterations: usize },

    #[error("expected exactly two density bumps, found {} at {locations:?}", locations.len())]
    BumpCount { locations: Vec<f64> },

    #[error("decomposition fit left the admissible box: {params:?}")]
    FitDiverged { params: [f64; 4] },

    #[error("corrector window is empty: {0}")]
    EmptyWindow(String),

    #[error("comparison scale underflow: exp(-sqrt|mu2| xn) = {scale:e}")]
    ScaleUnderflow { scale: f64 },

    #[error("bump-distance prediction undefined for p = {p} (requires p < 2)")]
    PredictionUndefined { p: f64 },

    #[error("insufficient data: need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
