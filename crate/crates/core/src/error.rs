use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("canvas mismatch: {left:?} vs {right:?}")]
    Dimension {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("malformed RLE: {0}")]
    MalformedRle(String),

    #[error("operation requires a non-empty mask")]
    EmptyMask,

    #[error("degenerate box {0:?}")]
    DegenerateBox([usize; 4]),

    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },

    #[error("tensor shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("non-finite value produced at layer {layer}")]
    Numeric { layer: usize },

    #[error("invalid architecture: {0}")]
    Arch(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("frame sequencing error: expected frame {expected}, got {got}")]
    Sequencing { expected: usize, got: usize },

    #[error("missing frame {0}")]
    MissingFrame(usize),

    #[error("unknown category id {0}")]
    UnknownCategory(u32),

    #[error("unknown video id {0}")]
    UnknownVideo(u64),

    #[error("duplicate track {track} in video {video}")]
    DuplicateTrack { video: u64, track: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::MalformedRle(_) => "malformed_rle",
            Error::EmptyMask => "empty_mask",
            Error::DegenerateBox(_) => "degenerate_box",
            Error::NonFiniteCost { .. } => "non_finite_cost",
            Error::Shape { .. } => "shape",
            Error::Numeric { .. } => "numeric",
            Error::Arch(_) => "arch",
            Error::EmptyDataset => "empty_dataset",
            Error::Sequencing { .. } => "sequencing",
            Error::MissingFrame(_) => "missing_frame",
            Error::UnknownCategory(_) => "unknown_category",
            Error::UnknownVideo(_) => "unknown_video",
            Error::DuplicateTrack { .. } => "duplicate_track",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Image(_) => "image",
        }
    }
}
