use crate::error::{Error, Result};

/// Working bit depth of the optical data; SAR is rescaled to `[0, 2^p]`.
pub const DEFAULT_BIT_DEPTH: u32 = 12;

/// Multi-channel 2-D raster, channel-major then row-major.
///
/// Samples are always finite. Values outside `[0, 2^bit_depth]` are allowed: reference
/// images built by component substitution can overshoot and are stored unclamped.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterPatch {
    height: usize,
    width: usize,
    channels: usize,
    bit_depth: u32,
    data: Vec<f32>,
}

impl RasterPatch {
    pub fn new(height: usize, width: usize, channels: usize, bit_depth: u32, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if !(1..=31).contains(&bit_depth) {
            return Err(Error::InvalidRaster(format!("bit depth {bit_depth} outside 1..=31")));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::InvalidRaster("dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "data length {} != {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(RasterPatch {
            height,
            width,
            channels,
            bit_depth,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, bit_depth: u32, value: f32) -> Result<Self> {
        Self::new(height, width, channels, bit_depth, vec![value; height * width * channels])
    }

    /// Stack equally sized single-band planes.
    pub fn from_bands(height: usize, width: usize, bit_depth: u32, bands: &[&[f32]]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * bands.len());
        for b in bands {
            if b.len() != height * width {
                return Err(Error::InvalidRaster(format!(
                    "band length {} != {height}x{width}",
                    b.len()
                )));
            }
            data.extend_from_slice(b);
        }
        Self::new(height, width, bands.len(), bit_depth, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bit_depth(&self) -> u32 {
        self.bit_depth
    }

    /// `2^bit_depth`, the nominal maximum sample value.
    pub fn full_scale(&self) -> f64 {
        (1u64 << self.bit_depth) as f64
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn band(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn bands(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.plane_len())
    }

    /// Apply `f` to every sample, re-validating finiteness.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.channels,
            self.bit_depth,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn with_bit_depth(mut self, bit_depth: u32) -> Result<Self> {
        if !(1..=31).contains(&bit_depth) {
            return Err(Error::InvalidRaster(format!("bit depth {bit_depth} outside 1..=31")));
        }
        self.bit_depth = bit_depth;
        Ok(self)
    }

    pub(crate) fn expect_channels(&self, what: &'static str, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::ChannelCount {
                what,
                expected,
                got: self.channels,
            });
        }
        Ok(())
    }

    pub(crate) fn expect_same_dims(&self, other: &RasterPatch, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                what: what.to_string(),
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

/// Co-registered SAR / optical pair with an optional reference colorization.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    pub id: String,
    pub sar: RasterPatch,
    pub ms: RasterPatch,
    pub gt: Option<RasterPatch>,
}

impl PairedSample {
    pub fn new(id: impl Into<String>, sar: RasterPatch, ms: RasterPatch, gt: Option<RasterPatch>) -> Result<Self> {
        let id = id.into();
        sar.expect_channels("sar", 1)?;
        ms.expect_channels("ms", 3)?;
        sar.expect_same_dims(&ms, &format!("{id}: sar vs ms"))?;
        if let Some(gt) = &gt {
            gt.expect_channels("gt", 3)?;
            sar.expect_same_dims(gt, &format!("{id}: sar vs gt"))?;
        }
        Ok(PairedSample { id, sar, ms, gt })
    }

    pub fn gt(&self) -> Result<&RasterPatch> {
        self.gt.as_ref().ok_or_else(|| Error::MissingGroundTruth(self.id.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rasters() {
        assert!(RasterPatch::new(0, 2, 1, 12, vec![]).is_err());
        assert!(RasterPatch::new(2, 2, 1, 12, vec![0.0; 3]).is_err());
        assert!(matches!(
            RasterPatch::new(1, 2, 1, 12, vec![0.0, f32::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(RasterPatch::new(1, 1, 1, 0, vec![0.0]).is_err());
    }

    #[test]
    fn band_views() {
        let p = RasterPatch::new(1, 2, 3, 12, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(p.band(1), &[3.0, 4.0]);
        assert_eq!(p.bands().count(), 3);
        assert_eq!(p.full_scale(), 4096.0);
    }

    #[test]
    fn paired_sample_checks_dimensions() {
        let sar = RasterPatch::filled(4, 4, 1, 12, 1.0).unwrap();
        let ms = RasterPatch::filled(4, 4, 3, 12, 1.0).unwrap();
        let small = RasterPatch::filled(2, 2, 3, 12, 1.0).unwrap();
        assert!(PairedSample::new("a", sar.clone(), ms.clone(), None).is_ok());
        assert!(PairedSample::new("a", sar.clone(), small.clone(), None).is_err());
        assert!(PairedSample::new("a", sar.clone(), ms.clone(), Some(small)).is_err());
        assert!(PairedSample::new("a", ms.clone(), ms, None).is_err());
    }
}
