use thiserror::Error;

use crate::tensor::Shape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("data length {len} does not match shape {shape}")]
    LengthMismatch { shape: Shape, len: usize },

    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("{op}: input channels {got} do not match kernel input channels {expected}")]
    ChannelMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{op}: non-integral output size for input {input}, kernel {kernel}, stride {stride}, pad {pad}")]
    NonIntegralOutput {
        op: &'static str,
        input: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },

    #[error("{op}: invalid geometry: {reason}")]
    InvalidGeometry { op: &'static str, reason: String },

    #[error("degenerate batchnorm statistics: one value per channel in train mode")]
    DegenerateBatchNorm,

    #[error("backward requires a scalar loss, got shape {0}")]
    NotScalar(Shape),

    #[error("backward already ran on this graph; build a new graph for another pass")]
    BackwardTwice,

    #[error("parameter count mismatch: expected {expected}, got {got}")]
    ParamCount { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, AutodiffError>;
