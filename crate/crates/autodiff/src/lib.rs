//! Reverse-mode automatic differentiation over 4-D `(batch, channel, height, width)` tensors.
//!
//! The operator set is deliberately narrow: it is what a U-Net generator, a PatchGAN
//! discriminator and a plain stacked-convolution colorizer need, plus the losses used to
//! train them. Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for finite-difference gradient checking.
//!
//! A [`Graph`] is a tape. Each operation appends a node holding its output value and the
//! indices of its inputs; [`Graph::backward`] walks the tape once in reverse.

mod adam;
mod conv;
mod error;
mod gemm;
pub mod gradcheck;
mod graph;
mod params;
mod scalar;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use error::{AutodiffError, Result};
pub use graph::{BatchNormMode, Graph, RunningStats, Var};
pub use params::{ParamId, ParamSet};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};
