//! Spectral colorization baselines: every output pixel is a function of the SAR value at
//! the same location only.

mod linear;
mod lm;
pub mod mlp;
mod model_file;

use crate::error::{Error, Result};
use crate::raster::{PairedSample, RasterPatch};

pub use linear::{apply_lr, fit_lr, LinearModel};
pub use lm::{LmSettings, LmState};
pub use mlp::{apply_nl, fit_nl, MlpModel, NlFit};
pub use model_file::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC};

/// Replicate the SAR band into three channels.
pub fn nocol(sar: &RasterPatch) -> Result<RasterPatch> {
    sar.expect_channels("nocol", 1)?;
    let b = sar.band(0);
    RasterPatch::from_bands(sar.height(), sar.width(), sar.bit_depth(), &[b, b, b])
}

/// MATLAB's hyperbolic tangent sigmoid, `2 / (1 + e^(-2x)) - 1`.
pub fn tansig(x: f64) -> f64 {
    // Evaluated on |x| and mirrored so the function is exactly odd.
    let t = 2.0 / (1.0 + (-2.0 * x.abs()).exp()) - 1.0;
    t.copysign(x)
}

/// Flattened training pixels: SAR value and the three reference band values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlatSamples {
    pub x: Vec<f64>,
    pub y: [Vec<f64>; 3],
}

impl FlatSamples {
    pub fn new(x: Vec<f64>, y: [Vec<f64>; 3]) -> Result<Self> {
        if y.iter().any(|b| b.len() != x.len()) {
            return Err(Error::InvalidInput("target bands differ in length from the input".into()));
        }
        Ok(FlatSamples { x, y })
    }

    /// Pixels of the SAR band against the reference colorization, in sample order.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a PairedSample>) -> Result<Self> {
        let mut out = FlatSamples::default();
        for s in samples {
            let gt = s.gt()?;
            out.x.extend(s.sar.data().iter().map(|&v| v as f64));
            for (b, dst) in out.y.iter_mut().enumerate() {
                dst.extend(gt.band(b).iter().map(|&v| v as f64));
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Every `step`-th pixel.
    pub fn strided(&self, step: usize) -> Self {
        let step = step.max(1);
        let pick = |v: &Vec<f64>| v.iter().step_by(step).copied().collect();
        FlatSamples {
            x: pick(&self.x),
            y: [pick(&self.y[0]), pick(&self.y[1]), pick(&self.y[2])],
        }
    }

    /// Mean squared error of `f` over all pixels and bands.
    pub fn mse(&self, f: impl Fn(f64) -> [f64; 3]) -> f64 {
        let mut sse = 0.0;
        for (j, &x) in self.x.iter().enumerate() {
            let p = f(x);
            for b in 0..3 {
                let e = p[b] - self.y[b][j];
                sse += e * e;
            }
        }
        sse / (3 * self.x.len()).max(1) as f64
    }
}

/// Any fitted spectral baseline.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectralModel {
    NoCol,
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl SpectralModel {
    pub fn method_name(&self) -> &'static str {
        match self {
            SpectralModel::NoCol => "nocol",
            SpectralModel::Linear(_) => "lr",
            SpectralModel::Mlp(_) => "nl",
        }
    }

    pub fn apply(&self, sar: &RasterPatch) -> Result<RasterPatch> {
        match self {
            SpectralModel::NoCol => nocol(sar),
            SpectralModel::Linear(m) => m.apply(sar),
            SpectralModel::Mlp(m) => m.apply(sar),
        }
    }

    pub fn predict(&self, x: f64) -> [f64; 3] {
        match self {
            SpectralModel::NoCol => [x; 3],
            SpectralModel::Linear(m) => m.predict(x),
            SpectralModel::Mlp(m) => m.predict(x),
        }
    }
}

/// Map a per-pixel function over a 1-channel patch.
pub(crate) fn apply_pixelwise(sar: &RasterPatch, f: impl Fn(f64) -> [f64; 3]) -> Result<RasterPatch> {
    sar.expect_channels("spectral model input", 1)?;
    let n = sar.plane_len();
    let mut data = vec![0.0f32; 3 * n];
    for (i, &v) in sar.data().iter().enumerate() {
        let y = f(v as f64);
        for b in 0..3 {
            data[b * n + i] = y[b] as f32;
        }
    }
    RasterPatch::new(sar.height(), sar.width(), 3, sar.bit_depth(), data)
}
