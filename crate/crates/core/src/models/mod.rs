//! Convolutional colorizers: a plain CNN trained on an ℓ1 (or ℓ2) loss and a conditional
//! GAN with a U-Net generator and PatchGAN discriminator.
//!
//! Networks run on SAR mapped affinely from `[0, 2^p]` to `[-1, 1]` and predict colors on
//! the same scale.

mod checkpoint;
mod cnn;
mod config;
mod gan;
mod gradcheck;
mod loss;
mod net;
mod train;

use sarcolor_autodiff::{Shape, Tensor};

use crate::error::Result;
use crate::raster::RasterPatch;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, ModelKind, CHECKPOINT_MAGIC};
pub use cnn::{build_cnn, cnn_forward, CnnSpec};
pub use config::{CnnLoss, TrainConfig};
pub use gan::{
    build_discriminator, build_generator, discriminator_forward, generator_forward, generator_forward_features,
    patch_map_size, GanSpec,
    LEAKY_SLOPE,
};
pub use gradcheck::{gradcheck_suite, GRADCHECK_TOLERANCE};
pub use loss::{loss_d, loss_g, loss_g_terms, GeneratorLoss};
pub use net::Network;
pub use train::{colorize, train_cgan, train_cnn, Batch, CganTrainer, StepRecord, TrainTrace};

/// Affine map `[0, 2^p] → [-1, 1]`.
pub fn normalize_value(v: f32, bit_depth: u32) -> f32 {
    let half = (1u64 << (bit_depth - 1)) as f32;
    v / half - 1.0
}

pub fn denormalize_value(t: f32, bit_depth: u32) -> f32 {
    let half = (1u64 << (bit_depth - 1)) as f32;
    (t + 1.0) * half
}

/// Patch as a `(1, c, h, w)` tensor on the `[-1, 1]` scale.
pub fn normalize_in(patch: &RasterPatch, bit_depth: u32) -> Tensor<f32> {
    let data = patch.data().iter().map(|&v| normalize_value(v, bit_depth)).collect();
    Tensor::from_vec(Shape::new(1, patch.channels(), patch.height(), patch.width()), data).expect("sized")
}

/// Sample `i` of a `(n, c, h, w)` tensor back on the `[0, 2^p]` scale.
pub fn denormalize_out(t: &Tensor<f32>, i: usize, bit_depth: u32) -> Result<RasterPatch> {
    let s = t.shape();
    let data = t.sample(i).iter().map(|&v| denormalize_value(v, bit_depth)).collect();
    RasterPatch::new(s.h, s.w, s.c, bit_depth, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(normalize_value(0.0, 12), -1.0);
        assert_eq!(normalize_value(4096.0, 12), 1.0);
        assert_eq!(normalize_value(2048.0, 12), 0.0);
        assert_eq!(denormalize_value(1.0, 12), 4096.0);
    }
}
