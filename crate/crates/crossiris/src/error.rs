use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("invalid argument in {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGrad(String),
    #[error("backward requires a scalar loss, got {0} elements")]
    NonScalarLoss(usize),
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("empty input for {0}")]
    Empty(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Msg(String),
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch { op, detail: detail.into() }
    }
    pub fn arg(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument { op, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
