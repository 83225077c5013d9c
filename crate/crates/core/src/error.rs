use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The permanent oracle is restricted to small matrices.
    #[error("matrix size {0} exceeds the permanent-oracle limit of {1}")]
    SizeLimit(usize, usize),

    /// Scattering extraction was attempted on a unitary that is not
    /// realizable by linear optics.
    #[error("input is not optically feasible (residual {residual:.3e} > {tolerance:.3e})")]
    InfeasibleInput { residual: f64, tolerance: f64 },

    /// The rank-1 factorization behind scattering extraction did not close.
    #[error("scattering extraction failed: {0}")]
    ExtractionFailed(String),

    /// Matrix text format or config parsing failure.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
