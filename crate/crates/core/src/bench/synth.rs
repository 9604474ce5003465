//! Procedural desk dataset: warped Voronoi land-cover mosaics. Optical intensity follows
//! each class's backscatter, hue is a per-class offset, and the SAR band is the same
//! backscatter under multiplicative speckle.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::{adjust_sar, write_manifest, write_patch, Manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::protocol::synthesize_gt;
use crate::raster::{PairedSample, RasterPatch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub count: usize,
    pub side: usize,
    pub seed: u64,
    pub bit_depth: u32,
    /// Range of Voronoi cells per patch.
    pub min_regions: usize,
    pub max_regions: usize,
    /// Equivalent number of looks of the multiplicative speckle.
    pub looks: f64,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 60,
            side: 64,
            seed: 0,
            bit_depth: 12,
            min_regions: 6,
            max_regions: 10,
            looks: 8.0,
            id_prefix: "synth".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Texture {
    Smooth,
    Mottled,
    Stripes,
    Blocks,
}

struct LandCover {
    /// Zero-sum per-band offset from the class intensity.
    chroma: [f32; 3],
    backscatter_db: f32,
    texture: Texture,
}

/// Hue is deliberately not monotone in backscatter, so it cannot be read off a single
/// SAR value.
const CLASSES: [LandCover; 6] = [
    LandCover { chroma: [-150.0, -30.0, 180.0], backscatter_db: -21.0, texture: Texture::Smooth },
    LandCover { chroma: [200.0, 80.0, -280.0], backscatter_db: -17.0, texture: Texture::Smooth },
    LandCover { chroma: [-120.0, 200.0, -80.0], backscatter_db: -13.0, texture: Texture::Stripes },
    LandCover { chroma: [220.0, -20.0, -200.0], backscatter_db: -10.0, texture: Texture::Mottled },
    LandCover { chroma: [-150.0, 150.0, 0.0], backscatter_db: -7.0, texture: Texture::Mottled },
    LandCover { chroma: [0.0, -30.0, 30.0], backscatter_db: -3.0, texture: Texture::Blocks },
];

/// Optical intensity as an affine function of noise-free backscatter, in DN per dB.
const INTENSITY_AT_0DB: f32 = 2500.0;
const INTENSITY_PER_DB: f32 = 95.0;
const CHROMA_SCALE: f32 = 0.6;
/// Calibrated backscatter window the raw band is clipped to before rescaling.
const SAR_WINDOW_DB: (f32, f32) = (-25.0, 0.0);
/// Texture amplitude; below half the class spacing, so a local mean separates classes.
const TEXTURE_DB: f32 = 1.0;

/// Bilinearly interpolated lattice noise in `[-1, 1]` with `cells` lattice steps per side.
fn value_noise(rng: &mut ChaCha8Rng, side: usize, cells: usize) -> Vec<f32> {
    let cells = cells.max(1);
    let lattice: Vec<f32> = (0..(cells + 1) * (cells + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let at = |i: usize, j: usize| lattice[i * (cells + 1) + j];
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side {
        let fy = y as f32 / side as f32 * cells as f32;
        let (iy, ty) = (fy as usize, fy.fract());
        for x in 0..side {
            let fx = x as f32 / side as f32 * cells as f32;
            let (ix, tx) = (fx as usize, fx.fract());
            let top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
            let bottom = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

struct Region {
    cx: f32,
    cy: f32,
    class: usize,
    angle: f32,
    period: f32,
}

/// One procedural pair; the reference is synthesized by the fusion protocol.
pub fn synth_sample(config: &SynthConfig, index: usize) -> Result<PairedSample> {
    let side = config.side;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let k = rng.gen_range(config.min_regions..=config.max_regions.max(config.min_regions));
    // Classes are dealt from a shuffled deck, so a patch with at least as many regions as
    // classes shows every class.
    let mut deck: Vec<usize> = (0..CLASSES.len()).collect();
    deck.shuffle(&mut rng);
    let regions: Vec<Region> = (0..k)
        .map(|i| Region {
            cx: rng.gen_range(0.0..side as f32),
            cy: rng.gen_range(0.0..side as f32),
            class: deck[i % deck.len()],
            angle: rng.gen_range(0.0..std::f32::consts::PI),
            period: rng.gen_range(4.0..8.0),
        })
        .collect();
    let warp = side as f32 / 8.0;
    let wx = value_noise(&mut rng, side, 3);
    let wy = value_noise(&mut rng, side, 3);
    let coarse = value_noise(&mut rng, side, 4);
    let fine = value_noise(&mut rng, side, side / 4);
    let speckle = Gamma::new(config.looks, 1.0 / config.looks).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let ms_noise = Normal::new(0.0f32, 8.0).expect("positive std");

    let n = side * side;
    let mut ms = vec![0.0f32; 3 * n];
    let mut sar_db = vec![0.0f32; n];
    for y in 0..side {
        for x in 0..side {
            let i = y * side + x;
            let (px, py) = (x as f32 + warp * wx[i], y as f32 + warp * wy[i]);
            let r = regions
                .iter()
                .min_by(|a, b| {
                    let da = (a.cx - px).powi(2) + (a.cy - py).powi(2);
                    let db = (b.cx - px).powi(2) + (b.cy - py).powi(2);
                    da.total_cmp(&db)
                })
                .expect("at least one region");
            let lc = &CLASSES[r.class];
            let t = match lc.texture {
                Texture::Smooth => 0.3 * coarse[i],
                Texture::Mottled => 0.5 * fine[i] + 0.3 * coarse[i],
                Texture::Stripes => {
                    let u = x as f32 * r.angle.cos() + y as f32 * r.angle.sin();
                    (2.0 * std::f32::consts::PI * u / r.period).sin()
                }
                Texture::Blocks => {
                    if (x / 6 + y / 6) % 2 == 0 {
                        1.0
                    } else {
                        -0.6
                    }
                }
            };
            let clean_db = lc.backscatter_db + TEXTURE_DB * t;
            let level = INTENSITY_AT_0DB + INTENSITY_PER_DB * clean_db;
            for b in 0..3 {
                let v = level + CHROMA_SCALE * lc.chroma[b] + ms_noise.sample(&mut rng);
                ms[b * n + i] = v.clamp(0.0, (1u64 << config.bit_depth) as f32);
            }
            let look = speckle.sample(&mut rng).max(1e-6);
            sar_db[i] = (clean_db + 10.0 * (look as f32).log10()).clamp(SAR_WINDOW_DB.0, SAR_WINDOW_DB.1);
        }
    }
    let raw = RasterPatch::new(side, side, 1, config.bit_depth, sar_db)?;
    let sar = adjust_sar(&raw, config.bit_depth)?;
    let ms = RasterPatch::new(side, side, 3, config.bit_depth, ms)?;
    let mut sample = PairedSample::new(format!("{}_{index:04}", config.id_prefix), sar, ms, None)?;
    sample.gt = Some(synthesize_gt(&sample)?.gt);
    Ok(sample)
}

pub fn synth_dataset(config: &SynthConfig) -> Result<Vec<PairedSample>> {
    if config.side == 0 || config.min_regions == 0 || !(config.looks > 0.0) {
        return Err(Error::InvalidInput("synthetic dataset needs a positive side, regions and looks".into()));
    }
    (0..config.count).map(|i| synth_sample(config, i)).collect()
}

/// Write `sar/`, `ms/` and `gt/` patch files under `dir` plus `<name>.jsonl`.
pub fn write_dataset(samples: &[PairedSample], dir: &Path, name: &str) -> Result<Manifest> {
    let mut entries = Vec::with_capacity(samples.len());
    for sub in ["sar", "ms", "gt"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    for s in samples {
        let rel = |sub: &str| Path::new(sub).join(format!("{}.scp", s.id));
        write_patch(&s.sar, dir.join(rel("sar")))?;
        write_patch(&s.ms, dir.join(rel("ms")))?;
        let gt = match &s.gt {
            Some(gt) => {
                write_patch(gt, dir.join(rel("gt")))?;
                Some(rel("gt"))
            }
            None => None,
        };
        entries.push(ManifestEntry {
            id: s.id.clone(),
            sar: rel("sar"),
            ms: rel("ms"),
            gt,
        });
    }
    let manifest = Manifest::new(dir, entries)?;
    write_manifest(&manifest, dir.join(format!("{name}.jsonl")))?;
    Ok(manifest)
}
