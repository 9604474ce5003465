use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lm::{minimize, LeastSquares, LmSettings, LmState};
use super::{apply_pixelwise, tansig, FlatSamples};
use crate::error::{Error, Result};
use crate::raster::RasterPatch;

pub const MAX_HIDDEN_LAYERS: usize = 3;

/// `(v - mean) / std` on the way in, the inverse on the way out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub const IDENTITY: Standardizer = Standardizer { mean: 0.0, std: 1.0 };

    fn fit(v: &[f64]) -> Self {
        let (mean, std) = crate::stats::mean_std(v.iter().copied());
        Standardizer {
            mean,
            std: if std > 0.0 { std } else { 1.0 },
        }
    }
}

/// Fully connected layer; `weights` is `out × in`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Tansig hidden layers, identity output layer, 1 input and 3 outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    layers: Vec<Dense>,
    pub input: Standardizer,
    pub output: [Standardizer; 3],
    pub seed: u64,
}

pub(crate) fn validate_hidden(hidden: &[usize]) -> Result<()> {
    if hidden.is_empty() || hidden.len() > MAX_HIDDEN_LAYERS {
        return Err(Error::InvalidInput(format!(
            "expected 1 to {MAX_HIDDEN_LAYERS} hidden layers, got {}",
            hidden.len()
        )));
    }
    if hidden.contains(&0) {
        return Err(Error::InvalidInput("hidden layer of width 0".into()));
    }
    Ok(())
}

fn layer_sizes(hidden: &[usize]) -> Vec<usize> {
    let mut s = vec![1];
    s.extend_from_slice(hidden);
    s.push(3);
    s
}

pub(crate) fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl MlpModel {
    pub fn new(hidden: &[usize], layers: Vec<Dense>, input: Standardizer, output: [Standardizer; 3], seed: u64) -> Result<Self> {
        validate_hidden(hidden)?;
        let sizes = layer_sizes(hidden);
        if layers.len() != sizes.len() - 1 {
            return Err(Error::InvalidModel(format!("expected {} layers, got {}", sizes.len() - 1, layers.len())));
        }
        for (l, w) in layers.iter().zip(sizes.windows(2)) {
            if l.weights.len() != w[0] * w[1] || l.biases.len() != w[1] {
                return Err(Error::InvalidModel("layer shape does not match layer sizes".into()));
            }
        }
        let finite = layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases)).all(|v| v.is_finite())
            && std::iter::once(&input).chain(&output).all(|s| s.mean.is_finite() && s.std.is_finite() && s.std > 0.0);
        if !finite {
            return Err(Error::InvalidModel("non-finite or degenerate coefficients".into()));
        }
        Ok(MlpModel {
            layer_sizes: sizes,
            layers,
            input,
            output,
            seed,
        })
    }

    /// Uniform weights and biases in `[-0.5, 0.5]` drawn from `seed`.
    pub fn random(hidden: &[usize], seed: u64) -> Result<Self> {
        validate_hidden(hidden)?;
        let sizes = layer_sizes(hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; param_count(&sizes)];
        for v in &mut theta {
            *v = rng.gen_range(-0.5..=0.5);
        }
        let layers = unflatten(&sizes, &theta);
        MlpModel::new(hidden, layers, Standardizer::IDENTITY, [Standardizer::IDENTITY; 3], seed)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn parameters(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    /// Network output in standardized units for a standardized input.
    fn forward_std(&self, x: f64) -> [f64; 3] {
        forward(&self.layers, &self.layer_sizes, x)
    }

    pub fn predict(&self, x: f64) -> [f64; 3] {
        let z = self.forward_std((x - self.input.mean) / self.input.std);
        [0, 1, 2].map(|b| z[b] * self.output[b].std + self.output[b].mean)
    }

    pub fn apply(&self, sar: &RasterPatch) -> Result<RasterPatch> {
        apply_pixelwise(sar, |x| self.predict(x))
    }
}

fn flatten(layers: &[Dense]) -> Vec<f64> {
    layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect()
}

fn unflatten(sizes: &[usize], theta: &[f64]) -> Vec<Dense> {
    let mut at = 0;
    sizes
        .windows(2)
        .map(|w| {
            let nw = w[0] * w[1];
            let d = Dense {
                weights: theta[at..at + nw].to_vec(),
                biases: theta[at + nw..at + nw + w[1]].to_vec(),
            };
            at += nw + w[1];
            d
        })
        .collect()
}

fn forward(layers: &[Dense], sizes: &[usize], x: f64) -> [f64; 3] {
    let mut a = vec![x];
    let last = layers.len() - 1;
    for (l, layer) in layers.iter().enumerate() {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let mut z: Vec<f64> = (0..n_out)
            .map(|o| layer.biases[o] + (0..n_in).map(|i| layer.weights[o * n_in + i] * a[i]).sum::<f64>())
            .collect();
        if l != last {
            z.iter_mut().for_each(|v| *v = tansig(*v));
        }
        a = z;
    }
    [a[0], a[1], a[2]]
}

/// Result of a Levenberg–Marquardt fit.
#[derive(Clone, Debug, PartialEq)]
pub struct NlFit {
    pub model: MlpModel,
    pub lm: LmState,
}

struct MlpProblem<'a> {
    sizes: &'a [usize],
    x: Vec<f64>,
    y: [Vec<f64>; 3],
}

impl MlpProblem<'_> {
    /// Offset of each layer's weights within the flat parameter vector.
    fn offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let o = at;
                at += w[0] * w[1] + w[1];
                o
            })
            .collect()
    }
}

impl LeastSquares for MlpProblem<'_> {
    fn n_params(&self) -> usize {
        param_count(self.sizes)
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let layers = unflatten(self.sizes, theta);
        let mut sse = 0.0;
        for (j, &x) in self.x.iter().enumerate() {
            let p = forward(&layers, self.sizes, x);
            for b in 0..3 {
                sse += (p[b] - self.y[b][j]).powi(2);
            }
        }
        sse
    }

    fn normal_equations(&self, theta: &[f64], jtj: &mut [f64], jtr: &mut [f64]) -> f64 {
        let p = self.n_params();
        let sizes = self.sizes;
        let layers = unflatten(sizes, theta);
        let offsets = self.offsets();
        let nl = layers.len();
        jtj.fill(0.0);
        jtr.fill(0.0);
        let mut acts: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
        let mut row = vec![0.0; p];
        let mut sse = 0.0;
        for (j, &x) in self.x.iter().enumerate() {
            acts[0][0] = x;
            for l in 0..nl {
                let (n_in, n_out) = (sizes[l], sizes[l + 1]);
                for o in 0..n_out {
                    let mut z = layers[l].biases[o];
                    for i in 0..n_in {
                        z += layers[l].weights[o * n_in + i] * acts[l][i];
                    }
                    acts[l + 1][o] = if l + 1 == nl { z } else { tansig(z) };
                }
            }
            for k in 0..3 {
                let r = acts[nl][k] - self.y[k][j];
                sse += r * r;
                // Backpropagate the unit vector e_k to get one Jacobian row.
                row.fill(0.0);
                let mut delta = vec![0.0; 3];
                delta[k] = 1.0;
                for l in (0..nl).rev() {
                    let (n_in, n_out) = (sizes[l], sizes[l + 1]);
                    let off = offsets[l];
                    for o in 0..n_out {
                        for i in 0..n_in {
                            row[off + o * n_in + i] = delta[o] * acts[l][i];
                        }
                        row[off + n_out * n_in + o] = delta[o];
                    }
                    if l > 0 {
                        delta = (0..n_in)
                            .map(|i| {
                                let back: f64 = (0..n_out).map(|o| layers[l].weights[o * n_in + i] * delta[o]).sum();
                                back * (1.0 - acts[l][i] * acts[l][i])
                            })
                            .collect();
                    }
                }
                for a in 0..p {
                    if row[a] == 0.0 {
                        continue;
                    }
                    jtr[a] += row[a] * r;
                    for b in a..p {
                        jtj[a * p + b] += row[a] * row[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                jtj[a * p + b] = jtj[b * p + a];
            }
        }
        sse
    }
}

/// Fit a tansig MLP to the samples by Levenberg–Marquardt on standardized data. The loss
/// history in the returned state is the mean squared error in standardized units.
pub fn fit_nl(data: &FlatSamples, hidden: &[usize], seed: u64, settings: &LmSettings) -> Result<NlFit> {
    validate_hidden(hidden)?;
    let sizes = layer_sizes(hidden);
    let p = param_count(&sizes);
    if data.len() < p {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot determine {p} parameters",
            data.len()
        )));
    }
    let input = Standardizer::fit(&data.x);
    let output = [0, 1, 2].map(|b| Standardizer::fit(&data.y[b]));
    let problem = MlpProblem {
        sizes: &sizes,
        x: data.x.iter().map(|&x| (x - input.mean) / input.std).collect(),
        y: [0, 1, 2].map(|b| data.y[b].iter().map(|&y| (y - output[b].mean) / output[b].std).collect()),
    };
    let mut theta = MlpModel::random(hidden, seed)?.parameters();
    let mut lm = minimize(&problem, &mut theta, settings)?;
    let scale = 1.0 / (3 * data.len()) as f64;
    lm.losses.iter_mut().for_each(|l| *l *= scale);
    let model = MlpModel::new(hidden, unflatten(&sizes, &theta), input, output, seed)?;
    Ok(NlFit { model, lm })
}

pub fn apply_nl(model: &MlpModel, sar: &RasterPatch) -> Result<RasterPatch> {
    model.apply(sar)
}
