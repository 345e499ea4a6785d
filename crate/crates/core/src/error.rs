use thiserror::Error;

pub type Result<T> = std::result::Result<T, CscError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CscError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("cascade geometry error at layer {layer}: {reason}")]
    CascadeGeometry { layer: usize, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite objective at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("malformed container at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
}

impl CscError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        CscError::Shape(msg.into())
    }

    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        CscError::Geometry(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        CscError::Domain(msg.into())
    }

    pub(crate) fn format(offset: usize, reason: impl Into<String>) -> Self {
        CscError::Format {
            offset,
            reason: reason.into(),
        }
    }
}
