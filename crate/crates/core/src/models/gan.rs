//! U-Net generator and PatchGAN discriminator.

use serde::{Deserialize, Serialize};
use sarcolor_autodiff::{BatchNormMode, Graph, RunningStats, Scalar, Var};

use super::net::{Bound, Init, Layout, Network};
use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const INIT_STD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanSpec {
    /// Number of stride-2 levels on each side of the U-Net.
    pub depth: usize,
    pub base_channels: usize,
    pub max_channels: usize,
    /// Width of the first discriminator layer; later layers double up to 8x.
    pub disc_channels: usize,
}

impl Default for GanSpec {
    fn default() -> Self {
        GanSpec {
            depth: 8,
            base_channels: 64,
            max_channels: 512,
            disc_channels: 64,
        }
    }
}

impl GanSpec {
    pub fn with_depth(depth: usize) -> Self {
        GanSpec {
            depth,
            ..GanSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 || self.depth > 12 {
            return Err(Error::InvalidInput(format!("generator depth {} outside 2..=12", self.depth)));
        }
        if self.base_channels == 0 || self.max_channels < self.base_channels || self.disc_channels == 0 {
            return Err(Error::InvalidInput("channel widths must be positive with max ≥ base".into()));
        }
        if self.max_channels > 4096 || self.disc_channels > 1024 {
            return Err(Error::InvalidInput("channel widths above 4096 are not supported".into()));
        }
        Ok(())
    }

    /// Output channels of encoder level `i` (1-based).
    pub fn encoder_channels(&self, i: usize) -> usize {
        (self.base_channels << (i - 1).min(30)).min(self.max_channels)
    }

    pub fn encoder_ladder(&self) -> Vec<usize> {
        (1..=self.depth).map(|i| self.encoder_channels(i)).collect()
    }

    /// Input side length must be a multiple of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.depth
    }

    pub fn check_input(&self, h: usize, w: usize) -> Result<()> {
        let m = self.size_multiple();
        if h % m != 0 || w % m != 0 || h == 0 || w == 0 {
            return Err(Error::InvalidInput(format!(
                "input {h}x{w} is not divisible by 2^{} = {m}",
                self.depth
            )));
        }
        Ok(())
    }

    fn disc_ladder(&self) -> [usize; 4] {
        let b = self.disc_channels;
        [b, 2 * b, 4 * b, 8 * b]
    }
}

/// Encoder level `i` is conv(k4, s2, p1) to `encoder_channels(i)`; levels other than the
/// first and the innermost are batch-normalized. Decoder level `i` mirrors it with a
/// transposed convolution and concatenates encoder level `i - 1`.
pub fn build_generator(spec: &GanSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    Ok(generator_layout(spec).materialize(seed, Init::Gaussian(INIT_STD)))
}

pub(crate) fn generator_layout(spec: &GanSpec) -> Layout {
    let d = spec.depth;
    let c = spec.encoder_ladder();
    let mut b = Layout::default();
    for i in 1..=d {
        let c_in = if i == 1 { 1 } else { c[i - 2] };
        let normed = i != 1 && i != d;
        b.conv(&format!("enc{i}"), c_in, c[i - 1], 4, !normed, false);
        if normed {
            b.batch_norm(&format!("enc{i}.bn"), c[i - 1]);
        }
    }
    for i in (2..=d).rev() {
        let c_in = if i == d { c[d - 1] } else { 2 * c[i - 1] };
        b.conv(&format!("dec{i}"), c_in, c[i - 2], 4, false, true);
        b.batch_norm(&format!("dec{i}.bn"), c[i - 2]);
    }
    b.conv("dec1", 2 * c[0], 3, 4, true, true);
    b
}

/// `x` is `(n, 1, h, w)` in `[-1, 1]`; the result is `(n, 3, h, w)` in `(-1, 1)`.
pub fn generator_forward<T: Scalar>(
    spec: &GanSpec,
    stats: &mut [RunningStats<T>],
    g: &mut Graph<T>,
    vars: &[Var],
    x: Var,
    mode: BatchNormMode,
) -> Result<Var> {
    Ok(generator_forward_features(spec, stats, g, vars, x, mode)?.0)
}

/// [`generator_forward`] that also returns the encoder activations, outermost first; the
/// last one is the bottleneck.
pub fn generator_forward_features<T: Scalar>(
    spec: &GanSpec,
    stats: &mut [RunningStats<T>],
    g: &mut Graph<T>,
    vars: &[Var],
    x: Var,
    mode: BatchNormMode,
) -> Result<(Var, Vec<Var>)> {
    let s = g.shape(x);
    spec.check_input(s.h, s.w)?;
    let d = spec.depth;
    let mut bound = Bound::new(vars, stats, mode);
    let mut enc = Vec::with_capacity(d);
    let mut h = x;
    for i in 1..=d {
        let input = if i == 1 { h } else { g.leaky_relu(h, LEAKY_SLOPE) };
        let normed = i != 1 && i != d;
        h = bound.conv(g, input, !normed, 2, 1)?;
        if normed {
            h = bound.batch_norm(g, h)?;
        }
        enc.push(h);
    }
    for i in (2..=d).rev() {
        let r = g.relu(h);
        let up = bound.deconv(g, r, false, 2, 1)?;
        let up = bound.batch_norm(g, up)?;
        h = g.concat_channels(enc[i - 2], up)?;
    }
    let r = g.relu(h);
    let out = bound.deconv(g, r, true, 2, 1)?;
    bound.finish();
    Ok((g.tanh(out), enc))
}

/// Five k4 convolutions over the concatenated (SAR, color) pair: strides 2, 2, 2, 1, 1;
/// batch norm on layers 2 to 4; one logit channel out.
pub fn build_discriminator(spec: &GanSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    Ok(discriminator_layout(spec).materialize(seed, Init::Gaussian(INIT_STD)))
}

pub(crate) fn discriminator_layout(spec: &GanSpec) -> Layout {
    let c = spec.disc_ladder();
    let mut b = Layout::default();
    b.conv("disc1", 4, c[0], 4, true, false);
    for i in 1..4 {
        b.conv(&format!("disc{}", i + 1), c[i - 1], c[i], 4, false, false);
        b.batch_norm(&format!("disc{}.bn", i + 1), c[i]);
    }
    b.conv("disc5", c[3], 1, 4, true, false);
    b
}

pub fn discriminator_forward<T: Scalar>(
    stats: &mut [RunningStats<T>],
    g: &mut Graph<T>,
    vars: &[Var],
    sar: Var,
    color: Var,
    mode: BatchNormMode,
) -> Result<Var> {
    let x = g.concat_channels(sar, color)?;
    let mut bound = Bound::new(vars, stats, mode);
    let h = bound.conv(g, x, true, 2, 1)?;
    let mut h = g.leaky_relu(h, LEAKY_SLOPE);
    for stride in [2, 2, 1] {
        h = bound.conv(g, h, false, stride, 1)?;
        h = bound.batch_norm(g, h)?;
        h = g.leaky_relu(h, LEAKY_SLOPE);
    }
    let out = bound.conv(g, h, true, 1, 1)?;
    bound.finish();
    Ok(out)
}

/// Side length of the logit map for an input side `n`.
pub fn patch_map_size(n: usize) -> Option<usize> {
    let mut s = n;
    for stride in [2, 2, 2, 1, 1] {
        let span = (s + 2).checked_sub(4)?;
        if span % stride != 0 {
            return None;
        }
        s = span / stride + 1;
    }
    Some(s)
}
