#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarcolor::RasterPatch;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_patch(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize, lo: f32, hi: f32) -> RasterPatch {
    let data = (0..h * w * c).map(|_| rng.gen_range(lo..hi)).collect();
    RasterPatch::new(h, w, c, 12, data).unwrap()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

/// Straight-loop double-precision reference implementations of the quality indices.
pub mod oracle {
    use sarcolor::RasterPatch;

    fn px(p: &RasterPatch, y: usize, x: usize, b: usize) -> f64 {
        p.data()[b * p.height() * p.width() + y * p.width() + x] as f64
    }

    pub fn nrmse(gt: &RasterPatch, pred: &RasterPatch) -> f64 {
        let (h, w) = gt.dims();
        let mut acc = 0.0;
        for b in 0..3 {
            let mut mean = 0.0;
            let mut mse = 0.0;
            for y in 0..h {
                for x in 0..w {
                    mean += px(gt, y, x, b);
                    mse += (px(gt, y, x, b) - px(pred, y, x, b)).powi(2);
                }
            }
            let n = (h * w) as f64;
            acc += (mse / n).sqrt() / (mean / n).abs();
        }
        acc / 3.0
    }

    pub fn sam_deg(gt: &RasterPatch, pred: &RasterPatch) -> f64 {
        let (h, w) = gt.dims();
        let mut acc = 0.0;
        let mut n = 0usize;
        for y in 0..h {
            for x in 0..w {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for b in 0..3 {
                    let (g, p) = (px(gt, y, x, b), px(pred, y, x, b));
                    dot += g * p;
                    na += g * g;
                    nb += p * p;
                }
                if na == 0.0 || nb == 0.0 {
                    continue;
                }
                acc += (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0).acos();
                n += 1;
            }
        }
        (acc / n as f64).to_degrees()
    }

    /// Quaternion as a 4x4 real matrix (left multiplication representation).
    fn left_matrix(q: [f64; 4]) -> [[f64; 4]; 4] {
        let [a, b, c, d] = q;
        [[a, -b, -c, -d], [b, a, -d, c], [c, d, a, -b], [d, -c, b, a]]
    }

    fn qmul(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
        let m = left_matrix(p);
        let mut out = [0.0; 4];
        for r in 0..4 {
            for k in 0..4 {
                out[r] += m[r][k] * q[k];
            }
        }
        out
    }

    fn conj(q: [f64; 4]) -> [f64; 4] {
        [q[0], -q[1], -q[2], -q[3]]
    }

    fn abs2(q: [f64; 4]) -> f64 {
        q.iter().map(|v| v * v).sum()
    }

    /// Blockwise Q4 with covariance as `E[z1 z2*] - m1 m2*` and variances as
    /// `E|z|^2 - |m|^2`.
    pub fn q4(gt: &RasterPatch, pred: &RasterPatch, block: usize) -> f64 {
        let (h, w) = gt.dims();
        let mut acc = 0.0;
        let mut blocks = 0;
        for by in 0..h / block {
            for bx in 0..w / block {
                let n = (block * block) as f64;
                let (mut m1, mut m2, mut e12, mut e11, mut e22) = ([0.0; 4], [0.0; 4], [0.0; 4], 0.0, 0.0);
                for y in by * block..(by + 1) * block {
                    for x in bx * block..(bx + 1) * block {
                        let z1 = [px(gt, y, x, 0), px(gt, y, x, 1), px(gt, y, x, 2), 0.0];
                        let z2 = [px(pred, y, x, 0), px(pred, y, x, 1), px(pred, y, x, 2), 0.0];
                        let prod = qmul(z1, conj(z2));
                        for k in 0..4 {
                            m1[k] += z1[k] / n;
                            m2[k] += z2[k] / n;
                            e12[k] += prod[k] / n;
                        }
                        e11 += abs2(z1) / n;
                        e22 += abs2(z2) / n;
                    }
                }
                let mm = qmul(m1, conj(m2));
                let cov: Vec<f64> = (0..4).map(|k| e12[k] - mm[k]).collect();
                let cov_abs = cov.iter().map(|v| v * v).sum::<f64>().sqrt();
                let v1 = e11 - abs2(m1);
                let v2 = e22 - abs2(m2);
                let den = (v1 + v2) * (abs2(m1) + abs2(m2));
                if den == 0.0 {
                    continue;
                }
                acc += 4.0 * cov_abs * abs2(m1).sqrt() * abs2(m2).sqrt() / den;
                blocks += 1;
            }
        }
        acc / blocks as f64
    }

    pub fn r2(x: &[f64], y: &[f64]) -> f64 {
        // Squared Pearson correlation equals the OLS coefficient of determination.
        let n = x.len() as f64;
        let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let syy: f64 = y.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let num = n * sxy - sx * sy;
        num * num / ((n * sxx - sx * sx) * (n * syy - sy * sy))
    }

    pub fn flatten(p: &RasterPatch) -> Vec<f64> {
        p.data().iter().map(|&v| v as f64).collect()
    }
}
