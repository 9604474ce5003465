use std::path::Path;

use serde::{Deserialize, Serialize};
use sarcolor_autodiff::AdamConfig;

use super::cnn::CnnSpec;
use super::gan::GanSpec;
use crate::error::{Error, Result};
use crate::raster::DEFAULT_BIT_DEPTH;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CnnLoss {
    L1,
    L2,
}

/// Optimization hyperparameters for the convolutional colorizers, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Stop after this many optimizer steps even if epochs remain.
    pub max_steps: Option<usize>,
    /// Weight of the ℓ1 term in the generator loss.
    pub alpha: f64,
    /// Weight of the discriminator loss.
    pub beta: f64,
    pub use_gan_loss: bool,
    pub use_l1_loss: bool,
    pub cnn_loss: CnnLoss,
    pub seed: u64,
    pub bit_depth: u32,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Abort when the generator loss exceeds this.
    pub divergence_limit: f64,
    pub gan: GanSpec,
    pub cnn: CnnSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            lr: 1e-4,
            epochs: 300,
            max_steps: None,
            alpha: 210.0,
            beta: 0.5,
            use_gan_loss: true,
            use_l1_loss: true,
            cnn_loss: CnnLoss::L1,
            seed: 0,
            bit_depth: DEFAULT_BIT_DEPTH,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            divergence_limit: 1e3,
            gan: GanSpec::default(),
            cnn: CnnSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) || !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("alpha and beta must be finite and non-negative");
        }
        if self.epochs == 0 && self.max_steps.is_none() {
            return bad("either epochs or max_steps must be positive");
        }
        if !(1..=24).contains(&self.bit_depth) {
            return bad("bit_depth must be in 1..=24");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("adam coefficients out of range");
        }
        if !(self.divergence_limit > 0.0) {
            return bad("divergence_limit must be positive");
        }
        self.gan.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.cnn.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    /// Steps in a run over `n` samples: every epoch is `ceil(n / batch)` steps.
    pub fn total_steps(&self, n: usize) -> usize {
        let per_epoch = n.div_ceil(self.batch_size);
        let by_epochs = self.epochs.saturating_mul(per_epoch);
        match self.max_steps {
            Some(m) if self.epochs == 0 => m,
            Some(m) => m.min(by_epochs),
            None => by_epochs,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_configuration_parses() {
        let cfg = TrainConfig::from_toml("batch_size = 8\nlr = 1e-4\nalpha = 210.0\nbeta = 0.5\nepochs = 300\n").unwrap();
        assert_eq!(cfg, TrainConfig::default());
        assert_eq!(TrainConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.total_steps(9663), 300 * 1208);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(TrainConfig::from_toml("batch_size = 0").is_err());
        assert!(TrainConfig::from_toml("alpha = -1.0").is_err());
        assert!(TrainConfig::from_toml("alhpa = 1.0").is_err());
        assert!(TrainConfig::from_toml("[cnn]\nkernels = [9, 4]\nfilters = [8, 3]").is_err());
    }
}
