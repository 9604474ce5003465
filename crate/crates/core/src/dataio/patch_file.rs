//! `SCP1` patch files: 4-byte magic, then little-endian `u32` height, width, channels and
//! bit depth, then `height * width * channels` little-endian `f32` samples in channel-major,
//! row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::RasterPatch;

pub const PATCH_MAGIC: &[u8; 4] = b"SCP1";

/// Magic plus four `u32` fields.
pub const PATCH_HEADER_LEN: usize = 4 + 4 * 4;

pub fn encode_patch(patch: &RasterPatch) -> Vec<u8> {
    let mut out = Vec::with_capacity(PATCH_HEADER_LEN + patch.data().len() * 4);
    out.extend_from_slice(PATCH_MAGIC);
    for v in [
        patch.height() as u32,
        patch.width() as u32,
        patch.channels() as u32,
        patch.bit_depth(),
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in patch.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_patch(bytes: &[u8]) -> Result<RasterPatch> {
    if bytes.len() < 4 || &bytes[..4] != PATCH_MAGIC {
        let n = bytes.len().min(4);
        return Err(Error::BadMagic {
            expected: "SCP1",
            found: String::from_utf8_lossy(&bytes[..n]).into_owned(),
        });
    }
    if bytes.len() < PATCH_HEADER_LEN {
        return Err(Error::TruncatedHeader(bytes.len()));
    }
    let field = |i: usize| {
        let o = 4 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap())
    };
    let (h, w, c, p) = (field(0) as usize, field(1) as usize, field(2) as usize, field(3));
    let expected = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::InvalidRaster(format!("declared size {h}x{w}x{c} overflows")))?;
    let payload = &bytes[PATCH_HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::TrailingBytes(payload.len() - expected));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    RasterPatch::new(h, w, c, p, data)
}

pub fn read_patch(path: impl AsRef<Path>) -> Result<RasterPatch> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_patch(&bytes)
}

pub fn write_patch(patch: &RasterPatch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_patch(patch)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_patch_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = RasterPatch::new(2, 2, 1, 12, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let path = dir.path().join("a.scp");
        write_patch(&p, &path).unwrap();
        let back = read_patch(&path).unwrap();
        assert_eq!((back.height(), back.width(), back.channels()), (2, 2, 1));
        assert_eq!(back.data(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn file_size_is_header_plus_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = RasterPatch::filled(256, 256, 3, 12, 1.0).unwrap();
        let path = dir.path().join("big.scp");
        write_patch(&p, &path).unwrap();
        let len = fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(len, 4 + 16 + 256 * 256 * 3 * 4);
    }

    #[test]
    fn distinct_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_patch(dir.path().join("missing.scp")), Err(Error::Io { .. })));

        let mut bytes = encode_patch(&RasterPatch::filled(2, 2, 1, 12, 1.0).unwrap());
        bytes[..4].copy_from_slice(b"XXXX");
        let err = decode_patch(&bytes).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
        assert!(err.to_string().contains("bad magic"));

        let mut bytes = Vec::from(&PATCH_MAGIC[..]);
        for v in [4u32, 4, 3, 12] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for _ in 0..10 {
            bytes.extend_from_slice(&1.0f32.to_le_bytes());
        }
        let err = decode_patch(&bytes).unwrap_err();
        assert!(matches!(err, Error::TruncatedPayload { expected: 192, found: 40 }));
        assert!(err.to_string().contains("truncated payload"));

        let mut bytes = encode_patch(&RasterPatch::filled(1, 2, 1, 12, 1.0).unwrap());
        bytes[PATCH_HEADER_LEN..PATCH_HEADER_LEN + 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode_patch(&bytes), Err(Error::NonFinite(0))));

        assert!(matches!(decode_patch(&bytes[..10]), Err(Error::TruncatedHeader(10))));
    }

    #[test]
    fn huge_declared_size_does_not_allocate() {
        let mut bytes = Vec::from(&PATCH_MAGIC[..]);
        for v in [u32::MAX, u32::MAX, u32::MAX, 12] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(decode_patch(&bytes).is_err());
    }

    #[test]
    fn nan_patch_cannot_be_built() {
        assert!(RasterPatch::new(1, 1, 1, 12, vec![f32::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            h in 1usize..6, w in 1usize..6, c in 1usize..4, p in 1u32..31,
            seed in any::<u64>()
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f32> = (0..h * w * c).map(|_| rng.gen_range(-1e6f32..1e6)).collect();
            let patch = RasterPatch::new(h, w, c, p, data).unwrap();
            let bytes = encode_patch(&patch);
            let back = decode_patch(&bytes).unwrap();
            prop_assert_eq!(&back, &patch);
            prop_assert_eq!(encode_patch(&back), bytes);
        }
    }
}
