use super::{apply_pixelwise, FlatSamples};
use crate::error::{Error, Result};
use crate::raster::RasterPatch;

/// Per-band affine map `y_b = w_b·x + b_b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: [f64; 3],
    pub biases: [f64; 3],
    pub with_bias: bool,
}

impl LinearModel {
    pub fn predict(&self, x: f64) -> [f64; 3] {
        [0, 1, 2].map(|b| self.weights[b] * x + self.biases[b])
    }

    pub fn apply(&self, sar: &RasterPatch) -> Result<RasterPatch> {
        apply_pixelwise(sar, |x| self.predict(x))
    }
}

/// Closed-form least squares per band. Without bias, the intercept is pinned at zero and
/// `w = Σxy / Σx²` on the raw data.
pub fn fit_lr(data: &FlatSamples, with_bias: bool) -> Result<LinearModel> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidInput("linear fit needs at least two samples".into()));
    }
    let nf = n as f64;
    let mx = data.x.iter().sum::<f64>() / nf;
    let (mut weights, mut biases) = ([0.0; 3], [0.0; 3]);
    if with_bias {
        let sxx: f64 = data.x.iter().map(|&x| (x - mx) * (x - mx)).sum();
        if sxx == 0.0 {
            return Err(Error::DegenerateAbscissa);
        }
        for b in 0..3 {
            let my = data.y[b].iter().sum::<f64>() / nf;
            let sxy: f64 = data.x.iter().zip(&data.y[b]).map(|(&x, &y)| (x - mx) * (y - my)).sum();
            weights[b] = sxy / sxx;
            biases[b] = my - weights[b] * mx;
        }
    } else {
        let sxx: f64 = data.x.iter().map(|&x| x * x).sum();
        if sxx == 0.0 {
            return Err(Error::DegenerateAbscissa);
        }
        for b in 0..3 {
            let sxy: f64 = data.x.iter().zip(&data.y[b]).map(|(&x, &y)| x * y).sum();
            weights[b] = sxy / sxx;
        }
    }
    if !weights.iter().chain(&biases).all(|v| v.is_finite()) {
        return Err(Error::InvalidModel("non-finite linear coefficients".into()));
    }
    Ok(LinearModel {
        weights,
        biases,
        with_bias,
    })
}

pub fn apply_lr(model: &LinearModel, sar: &RasterPatch) -> Result<RasterPatch> {
    model.apply(sar)
}
