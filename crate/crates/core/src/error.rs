use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("eigenvalues are not differentiable at x = {x} (delta = 0)")]
    SingularGradient { x: f64 },

    #[error("eigenvalue gap {gap:e} is below the degeneracy tolerance at x = {x}")]
    DegenerateEigenvectors { x: f64, gap: f64 },

    #[error("computational domain too small: {what} (relative weight {weight:e} at the boundary)")]
    DomainTooSmall { what: &'static str, weight: f64 },

    #[error("symmetric eigensolver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("imaginary residue {residue:e} of the symmetrized correlation exceeds 1e-8")]
    ImaginaryResidueTooLarge { residue: f64 },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("a power-law fit needs at least 3 samples, got {got}")]
    TooFewSamples { got: usize },

    #[error("horizon {horizon} exceeds the series extent {extent}")]
    HorizonExceedsSeries { horizon: f64, extent: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 1,
            Error::NonConvergence { .. } | Error::ImaginaryResidueTooLarge { .. } => 2,
            Error::SingularGradient { .. }
            | Error::DegenerateEigenvectors { .. }
            | Error::DomainTooSmall { .. }
            | Error::GridMismatch(_)
            | Error::TooFewSamples { .. }
            | Error::HorizonExceedsSeries { .. }
            | Error::InvalidParameter(_) => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
