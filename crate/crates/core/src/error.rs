use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("basis dimension {dim} exceeds the configured limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("hamiltonian is not hermitian (max |H - H^dag| = {0:e})")]
    NonHermitian(f64),

    #[error("steady state is not unique: two anchored solves differ by {0:e}")]
    DegenerateSteadyState(f64),

    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: String, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("observable not available: {0}")]
    MissingObservable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
