//! Patch files, dataset manifests, SAR range adjustment, band selection and PNG previews.

mod manifest;
mod patch_file;
mod preview;

pub use manifest::{load_manifest, parse_manifest, write_manifest, Manifest, ManifestEntry, SampleIter};
pub use patch_file::{decode_patch, encode_patch, read_patch, write_patch, PATCH_HEADER_LEN, PATCH_MAGIC};
pub use preview::{write_preview_png, write_signed_preview_png};

use crate::error::{Error, Result};
use crate::raster::RasterPatch;

/// Rescale a raw single-band SAR patch affinely onto `[0, 2^p]`.
///
/// Normalization is per patch: min and max are taken over this patch only.
pub fn adjust_sar(raw: &RasterPatch, bit_depth: u32) -> Result<RasterPatch> {
    raw.expect_channels("adjust_sar input", 1)?;
    let (min, max) = raw
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v as f64), hi.max(v as f64))
        });
    if max <= min {
        return Err(Error::DegenerateRange(min));
    }
    let scale = (1u64 << bit_depth) as f64;
    let range = max - min;
    RasterPatch::new(
        raw.height(),
        raw.width(),
        1,
        bit_depth,
        raw.data()
            .iter()
            .map(|&v| ((v as f64 - min) / range * scale) as f32)
            .collect(),
    )
}

/// 1-based Sentinel-2 band numbers forming (R, G, B).
pub const RGB_BANDS: [usize; 3] = [4, 3, 2];

/// Pick bands 4, 3, 2 of a 13-band Sentinel-2 stack as R, G, B.
pub fn select_rgb(ms13: &RasterPatch) -> Result<RasterPatch> {
    ms13.expect_channels("select_rgb input", 13)?;
    let bands: Vec<&[f32]> = RGB_BANDS.iter().map(|&b| ms13.band(b - 1)).collect();
    RasterPatch::from_bands(ms13.height(), ms13.width(), ms13.bit_depth(), &bands)
}
