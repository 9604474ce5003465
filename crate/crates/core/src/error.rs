use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },

    #[error("truncated header: {0} bytes")]
    TruncatedHeader(usize),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(usize),

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("{what}: expected {expected} channels, got {got}")]
    ChannelCount {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dimension mismatch: {what}: {left:?} vs {right:?}")]
    DimensionMismatch {
        what: String,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("degenerate dynamic range: max == min == {0}")]
    DegenerateRange(f64),

    #[error("degenerate SAR distribution: standard deviation is zero")]
    DegenerateSar,

    #[error("zero-mean reference band {0}")]
    ZeroMeanBand(usize),

    #[error("patch too small for Q4 block size {block}: {height}x{width}")]
    PatchTooSmall {
        block: usize,
        height: usize,
        width: usize,
    },

    #[error("no non-degenerate Q4 block")]
    NoValidQ4Block,

    #[error("degenerate abscissa: zero variance")]
    DegenerateAbscissa,

    #[error("{0}")]
    InvalidInput(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("unresolvable path {}", .0.display())]
    UnresolvablePath(PathBuf),

    #[error("missing prediction for {0:?}")]
    MissingPrediction(String),

    #[error("missing ground truth for {0:?}")]
    MissingGroundTruth(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("non-finite loss at step {step} ({what})")]
    NonFiniteLoss { what: &'static str, step: usize },

    #[error("training diverged at step {step}: generator loss {loss} exceeds {limit}")]
    Diverged { step: usize, loss: f64, limit: f64 },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Autodiff(#[from] sarcolor_autodiff::AutodiffError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wrap with the name of the pipeline stage that failed.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
