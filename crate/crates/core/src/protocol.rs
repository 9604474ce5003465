//! Reference colorized SAR by fast-IHS component substitution.
//!
//! The intensity of the optical patch (band mean) is replaced by the SAR band after
//! two-moment histogram matching: `gt = ms + (sar' - I)`. Statistics are per patch with
//! population normalization.

use crate::error::{Error, Result};
use crate::raster::{PairedSample, RasterPatch};
use crate::stats::mean_std_f32;

#[derive(Clone, Debug, PartialEq)]
pub struct FusionProduct {
    pub intensity: RasterPatch,
    pub matched_sar: RasterPatch,
    pub detail: RasterPatch,
    pub gt: RasterPatch,
}

/// Per-pixel mean of the three bands.
pub fn intensity(ms: &RasterPatch) -> Result<RasterPatch> {
    ms.expect_channels("intensity", 3)?;
    let (r, g, b) = (ms.band(0), ms.band(1), ms.band(2));
    let data = (0..ms.plane_len())
        .map(|i| ((r[i] as f64 + g[i] as f64 + b[i] as f64) / 3.0) as f32)
        .collect();
    RasterPatch::new(ms.height(), ms.width(), 1, ms.bit_depth(), data)
}

/// Affine rescaling of `sar` so its mean and standard deviation equal those of `target`.
pub fn histogram_match(sar: &RasterPatch, target: &RasterPatch) -> Result<RasterPatch> {
    sar.expect_channels("histogram_match sar", 1)?;
    target.expect_channels("histogram_match target", 1)?;
    sar.expect_same_dims(target, "histogram_match")?;
    let (mu_s, sd_s) = mean_std_f32(sar.data());
    if !(sd_s > 0.0) {
        return Err(Error::DegenerateSar);
    }
    let (mu_t, sd_t) = mean_std_f32(target.data());
    let gain = sd_t / sd_s;
    let data = sar
        .data()
        .iter()
        .map(|&v| ((v as f64 - mu_s) * gain + mu_t) as f32)
        .collect();
    RasterPatch::new(sar.height(), sar.width(), 1, sar.bit_depth(), data)
}

pub fn synthesize_gt(sample: &PairedSample) -> Result<FusionProduct> {
    fuse(&sample.sar, &sample.ms)
}

pub fn fuse(sar: &RasterPatch, ms: &RasterPatch) -> Result<FusionProduct> {
    ms.expect_channels("fusion ms", 3)?;
    sar.expect_same_dims(ms, "fusion")?;
    let intensity = intensity(ms)?;
    let matched_sar = histogram_match(sar, &intensity)?;
    let d: Vec<f32> = matched_sar
        .data()
        .iter()
        .zip(intensity.data())
        .map(|(&s, &i)| s - i)
        .collect();
    let mut gt = Vec::with_capacity(ms.data().len());
    for band in ms.bands() {
        gt.extend(band.iter().zip(&d).map(|(&m, &d)| m + d));
    }
    let (h, w, p) = (ms.height(), ms.width(), ms.bit_depth());
    Ok(FusionProduct {
        intensity,
        matched_sar,
        detail: RasterPatch::new(h, w, 1, p, d)?,
        gt: RasterPatch::new(h, w, 3, p, gt)?,
    })
}
