//! Training budgets for the single-core desk run on the default synthetic split.

use crate::models::{GanSpec, TrainConfig};

use super::Method;

/// Step budget of the desk-scale networks.
pub const DESK_STEPS: usize = 2000;

/// The CNN regressor: ℓ1, batch 4, Adam at 2e-3 with β1 = 0.9.
pub fn desk_cnn_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        lr: 2e-3,
        adam_beta1: 0.9,
        epochs: 0,
        max_steps: Some(DESK_STEPS),
        seed,
        ..TrainConfig::default()
    }
}

/// The adversarial colorizer with a depth-6 generator sized for 64 × 64 patches, on the
/// same optimizer settings as the CNN.
pub fn desk_cgan_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        lr: 2e-3,
        adam_beta1: 0.9,
        epochs: 0,
        max_steps: Some(DESK_STEPS),
        seed,
        gan: GanSpec::with_depth(6),
        ..TrainConfig::default()
    }
}

/// A narrower generator and shorter budget for the loss-term ablation.
pub fn desk_ablation_config(seed: u64) -> TrainConfig {
    let mut c = desk_cgan_config(seed);
    c.max_steps = Some(400);
    c.gan.base_channels = 32;
    c.gan.max_channels = 256;
    c.gan.disc_channels = 32;
    c
}

pub fn desk_methods(seed: u64) -> Vec<Method> {
    vec![Method::lr(), Method::Cnn(desk_cnn_config(seed)), Method::Cgan(desk_cgan_config(seed))]
}
