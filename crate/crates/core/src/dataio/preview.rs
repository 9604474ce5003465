//! 8-bit PNG previews. Rasters are never clamped in storage; clamping happens here only.

use std::path::Path;

use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::raster::RasterPatch;

fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn save(patch: &RasterPatch, path: &Path, scale: impl Fn(f32) -> f64) -> Result<()> {
    let (h, w) = (patch.height() as u32, patch.width() as u32);
    match patch.channels() {
        1 => {
            let buf = patch.band(0).iter().map(|&v| to_u8(scale(v))).collect();
            GrayImage::from_raw(w, h, buf).expect("buffer matches dims").save(path)?;
        }
        3 => {
            let n = patch.plane_len();
            let mut buf = Vec::with_capacity(n * 3);
            for i in 0..n {
                for c in 0..3 {
                    buf.push(to_u8(scale(patch.band(c)[i])));
                }
            }
            RgbImage::from_raw(w, h, buf).expect("buffer matches dims").save(path)?;
        }
        c => {
            return Err(Error::ChannelCount {
                what: "preview",
                expected: 3,
                got: c,
            })
        }
    }
    Ok(())
}

/// Linear map of `[0, 2^p]` onto `[0, 255]`, clamped, per band.
pub fn write_preview_png(patch: &RasterPatch, path: impl AsRef<Path>) -> Result<()> {
    let full = patch.full_scale();
    save(patch, path.as_ref(), |v| v as f64 / full)
}

/// Signed data on a symmetric scale: `-limit` is black, `0` mid-gray, `+limit` white.
/// A `limit` of `None` uses the largest absolute sample.
pub fn write_signed_preview_png(patch: &RasterPatch, path: impl AsRef<Path>, limit: Option<f64>) -> Result<()> {
    let limit = limit
        .unwrap_or_else(|| patch.data().iter().fold(0.0f64, |m, &v| m.max((v as f64).abs())))
        .max(f64::MIN_POSITIVE);
    save(patch, path.as_ref(), |v| 0.5 + 0.5 * v as f64 / limit)
}
