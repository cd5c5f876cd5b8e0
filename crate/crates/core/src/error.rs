use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no frames found: {0}")]
    NoFrames(String),
    #[error("resolution mismatch: expected {expected:?}, found {found:?} in {path}")]
    ResolutionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
        path: PathBuf,
    },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("corrupt model bundle: {0}")]
    CorruptBundle(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("empty selection")]
    EmptySelection,
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f32),
    #[error("invalid resampling factor {0}")]
    InvalidFactor(f64),
    #[error("invalid k: {0}")]
    InvalidK(String),
    #[error("invalid search radius {0}")]
    InvalidRadius(i64),
    #[error("invalid iteration count {0}")]
    InvalidIterations(i64),
    #[error("embedding has not been fitted")]
    NotFitted,
    #[error("unknown frame id {0}")]
    UnknownFrame(u32),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
    #[error("not a packet: {0}")]
    NotAPacket(String),
    #[error("corrupt packet: {0}")]
    CorruptPacket(String),
    #[error("packet was produced for a different model")]
    WrongModel,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case identifier for the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NoFrames(_) => "no_frames",
            Error::ResolutionMismatch { .. } => "resolution_mismatch",
            Error::InvalidTarget(_) => "invalid_target",
            Error::CorruptBundle(_) => "corrupt_bundle",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Shape(_) => "shape",
            Error::InsufficientData(_) => "insufficient_data",
            Error::EmptySelection => "empty_selection",
            Error::InvalidAlpha(_) => "invalid_alpha",
            Error::InvalidFactor(_) => "invalid_factor",
            Error::InvalidK(_) => "invalid_k",
            Error::InvalidRadius(_) => "invalid_radius",
            Error::InvalidIterations(_) => "invalid_iterations",
            Error::NotFitted => "not_fitted",
            Error::UnknownFrame(_) => "unknown_frame",
            Error::InvalidPath(_) => "invalid_path",
            Error::InvalidRect(_) => "invalid_rect",
            Error::NotAPacket(_) => "not_a_packet",
            Error::CorruptPacket(_) => "corrupt_packet",
            Error::WrongModel => "wrong_model",
            Error::Io(_) => "io",
            Error::Image(_) => "image",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
