use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariate `{0}` has zero variance")]
    DegenerateCovariate(String),

    #[error("dataset contains no events")]
    NoEvents,

    #[error("numerical overflow: {0}; consider rescaling the covariates")]
    NumericalOverflow(String),

    #[error(
        "monotone likelihood: coefficient of `{covariate}` diverged (|beta| = {magnitude:.3} > 50)"
    )]
    MonotoneLikelihood { covariate: String, magnitude: f64 },

    #[error("singular information matrix: {0}")]
    SingularInformation(String),

    #[error("empty stratum: {0}")]
    EmptyStratum(String),

    #[error("degenerate oracle: {0}")]
    DegenerateOracle(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoEvents
                | Error::NumericalOverflow(_)
                | Error::MonotoneLikelihood { .. }
                | Error::SingularInformation(_)
                | Error::EmptyStratum(_)
                | Error::DegenerateOracle(_)
                | Error::DegenerateCovariate(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {value}")))
    }
}
