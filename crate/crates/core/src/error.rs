use thiserror::Error;

/// Errors produced by the imaging engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid geometry: `{field}` {reason}")]
    InvalidGeometry { field: &'static str, reason: String },

    #[error("invalid parameter: `{field}` {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("thin-lens equation has no finite positive solution: {0}")]
    Unsolvable(String),

    #[error("inconsistent geometry: thin-lens relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    InconsistentGeometry { residual: f64, tolerance: f64 },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("detection error: {0}")]
    Detection(String),

    #[error("scan error: {0}")]
    Scan(String),

    #[error("undefined visibility: {0}")]
    UndefinedVisibility(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn geometry(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidGeometry {
            field,
            reason: reason.into(),
        }
    }
}
