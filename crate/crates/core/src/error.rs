use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    Accuracy(String),

    #[error("unsupported operation: {0}")]
    Capability(String),

    #[error("grid too coarse ({reason}); suggested n >= {suggested_n}")]
    RefineGrid { reason: String, suggested_n: usize },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("at rho = {rho}: {source}")]
    AtRho { rho: f64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Accuracy(_) | Error::RefineGrid { .. } | Error::Sampler(_) => true,
            Error::AtRho { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub fn at_rho(self, rho: f64) -> Error {
        Error::AtRho {
            rho,
            source: Box::new(self),
        }
    }
}
