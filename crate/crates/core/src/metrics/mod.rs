//! Reference-based quality indices and report aggregation.
//!
//! All accumulation happens in `f64` over `f32` samples. Band means, RMSE and the Q4
//! block statistics use population (divide by `n`) normalization.

mod quaternion;
mod report;

use crate::error::{Error, Result};
use crate::raster::RasterPatch;

pub use quaternion::Quaternion;
pub use report::{evaluate_method, evaluate_pairs, render_table, EvalSettings, MetricAggregate, MetricReport, PatchMetrics};

pub const DEFAULT_Q4_BLOCK: usize = 32;

fn check_pair(gt: &RasterPatch, pred: &RasterPatch, what: &'static str) -> Result<()> {
    gt.expect_channels(what, 3)?;
    pred.expect_channels(what, 3)?;
    gt.expect_same_dims(pred, what)
}

/// Mean over bands of `RMSE(n) / |mean(gt band n)|`.
pub fn nrmse(gt: &RasterPatch, pred: &RasterPatch) -> Result<f64> {
    check_pair(gt, pred, "nrmse")?;
    let n = gt.plane_len() as f64;
    let mut total = 0.0;
    for b in 0..3 {
        let (g, p) = (gt.band(b), pred.band(b));
        let mean = g.iter().map(|&v| v as f64).sum::<f64>() / n;
        if mean == 0.0 {
            return Err(Error::ZeroMeanBand(b));
        }
        let sse: f64 = g
            .iter()
            .zip(p)
            .map(|(&g, &p)| {
                let e = p as f64 - g as f64;
                e * e
            })
            .sum();
        total += (sse / n).sqrt() / mean.abs();
    }
    Ok(total / 3.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamValue {
    /// Mean spectral angle over the pixels where both vectors are nonzero.
    pub degrees: f64,
    /// Pixels skipped because one of the two spectral vectors has zero norm.
    pub excluded: usize,
}

/// Spectral angle mapper in degrees. An image with no usable pixel scores 0.
pub fn sam(gt: &RasterPatch, pred: &RasterPatch) -> Result<SamValue> {
    check_pair(gt, pred, "sam")?;
    let (mut sum, mut used, mut excluded) = (0.0, 0usize, 0usize);
    for i in 0..gt.plane_len() {
        let g = [0, 1, 2].map(|b| gt.band(b)[i] as f64);
        let p = [0, 1, 2].map(|b| pred.band(b)[i] as f64);
        match spectral_angle(g, p) {
            Some(a) => {
                sum += a;
                used += 1;
            }
            None => excluded += 1,
        }
    }
    let degrees = if used == 0 { 0.0 } else { (sum / used as f64).to_degrees() };
    Ok(SamValue { degrees, excluded })
}

/// Angle in radians between two 3-vectors; `None` if either is zero.
fn spectral_angle(a: [f64; 3], b: [f64; 3]) -> Option<f64> {
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    // Same angle as acos(clamp(dot / (|a||b|))), but exact for colinear pairs and well
    // conditioned near 0 and 180 degrees.
    Some(sin.atan2(dot))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Q4Value {
    pub value: f64,
    pub blocks_used: usize,
    pub blocks_skipped: usize,
}

/// Quaternion quality index averaged over non-overlapping `block`×`block` tiles. Each
/// pixel becomes `r + g·i + b·j + 0·k`: the three bands padded with an all-zero fourth.
/// Tiles with a zero denominator are skipped and counted.
pub fn q4(gt: &RasterPatch, pred: &RasterPatch, block: usize) -> Result<Q4Value> {
    check_pair(gt, pred, "q4")?;
    let (h, w) = gt.dims();
    if block == 0 || h < block || w < block {
        return Err(Error::PatchTooSmall {
            block,
            height: h,
            width: w,
        });
    }
    let (mut sum, mut used, mut skipped) = (0.0, 0usize, 0usize);
    for by in (0..=h - block).step_by(block) {
        for bx in (0..=w - block).step_by(block) {
            match q4_block(gt, pred, by, bx, block) {
                Some(q) => {
                    sum += q;
                    used += 1;
                }
                None => skipped += 1,
            }
        }
    }
    if used == 0 {
        return Err(Error::NoValidQ4Block);
    }
    Ok(Q4Value {
        value: sum / used as f64,
        blocks_used: used,
        blocks_skipped: skipped,
    })
}

fn pixel(p: &RasterPatch, i: usize) -> Quaternion {
    Quaternion::new(p.band(0)[i] as f64, p.band(1)[i] as f64, p.band(2)[i] as f64, 0.0)
}

fn q4_block(gt: &RasterPatch, pred: &RasterPatch, by: usize, bx: usize, block: usize) -> Option<f64> {
    let w = gt.width();
    let idx = |k: usize| (by + k / block) * w + bx + k % block;
    let n = (block * block) as f64;
    let (mut m1, mut m2) = (Quaternion::ZERO, Quaternion::ZERO);
    for k in 0..block * block {
        m1 = m1 + pixel(gt, idx(k));
        m2 = m2 + pixel(pred, idx(k));
    }
    m1 = m1.scale(1.0 / n);
    m2 = m2.scale(1.0 / n);
    let (mut v1, mut v2, mut cov) = (0.0, 0.0, Quaternion::ZERO);
    for k in 0..block * block {
        let d1 = pixel(gt, idx(k)) - m1;
        let d2 = pixel(pred, idx(k)) - m2;
        v1 += d1.norm_sqr();
        v2 += d2.norm_sqr();
        cov = cov + d1 * d2.conj();
    }
    let (v1, v2, cov) = (v1 / n, v2 / n, cov.scale(1.0 / n));
    let den = (v1 + v2) * (m1.norm_sqr() + m2.norm_sqr());
    if den == 0.0 {
        return None;
    }
    Some(4.0 * cov.norm() * m1.norm() * m2.norm() / den)
}

/// Ordinary least-squares line `y ≈ slope·x + intercept` and its coefficient of
/// determination.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "regression inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("regression needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    // A constant y is fitted exactly by the zero-slope line.
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LineFit { slope, intercept, r2 })
}

pub fn r2(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(ols(x, y)?.r2)
}

/// R² of the flattened prediction against the flattened reference (reference as abscissa).
pub fn r2_patch(gt: &RasterPatch, pred: &RasterPatch) -> Result<f64> {
    check_pair(gt, pred, "r2")?;
    let x: Vec<f64> = gt.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = pred.data().iter().map(|&v| v as f64).collect();
    r2(&x, &y)
}
