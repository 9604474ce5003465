//! Parameter storage shared by the convolutional models: named tensors, batch-norm running
//! statistics, and the cursor used to bind them during a forward pass.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use sarcolor_autodiff::{BatchNormMode, Graph, ParamSet, RunningStats, Scalar, Shape, Tensor, Var};

use crate::error::Result;

/// Parameters and batch-norm statistics of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub params: ParamSet<f32>,
    pub bn_names: Vec<String>,
    pub bn_stats: Vec<RunningStats<f32>>,
}

impl Network {
    /// Total number of trainable scalars.
    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|(_, t)| t.len()).sum()
    }
}

/// Kernel initialization scheme.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Init {
    /// `N(0, std)` kernels, zero bias; batch-norm scale `N(1, std)`.
    Gaussian(f64),
    /// Uniform `±1/sqrt(fan_in)` for kernels and biases.
    FanIn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Role {
    Weight { fan_in: usize },
    Bias { fan_in: usize },
    Gamma,
    Beta,
}

/// Names and shapes of a network's tensors, in binding order.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Layout {
    pub params: Vec<(String, Shape, Role)>,
    pub bns: Vec<(String, usize)>,
}

impl Layout {
    /// Convolution kernel `[out, in, k, k]`, or `[in, out, k, k]` when `transposed`.
    pub fn conv(&mut self, name: &str, c_in: usize, c_out: usize, k: usize, bias: bool, transposed: bool) {
        let shape = if transposed {
            Shape::new(c_in, c_out, k, k)
        } else {
            Shape::new(c_out, c_in, k, k)
        };
        let fan_in = if transposed { c_out * k * k } else { c_in * k * k };
        self.params.push((format!("{name}.weight"), shape, Role::Weight { fan_in }));
        if bias {
            self.params.push((format!("{name}.bias"), Shape::new(1, c_out, 1, 1), Role::Bias { fan_in }));
        }
    }

    pub fn batch_norm(&mut self, name: &str, c: usize) {
        let shape = Shape::new(1, c, 1, 1);
        self.params.push((format!("{name}.gamma"), shape, Role::Gamma));
        self.params.push((format!("{name}.beta"), shape, Role::Beta));
        self.bns.push((name.to_string(), c));
    }

    pub fn materialize(&self, seed: u64, init: Init) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (name, shape, role) in &self.params {
            let n = shape.numel();
            let data: Vec<f32> = match (init, *role) {
                (Init::Gaussian(std), Role::Weight { .. }) => gaussian(&mut rng, n, 0.0, std),
                (Init::Gaussian(std), Role::Gamma) => gaussian(&mut rng, n, 1.0, std),
                (Init::Gaussian(_), Role::Bias { .. }) | (_, Role::Beta) => vec![0.0; n],
                (Init::FanIn, Role::Weight { fan_in } | Role::Bias { fan_in }) => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    let d = Uniform::new_inclusive(-bound, bound);
                    (0..n).map(|_| d.sample(&mut rng) as f32).collect()
                }
                (Init::FanIn, Role::Gamma) => vec![1.0; n],
            };
            params.add(name.clone(), Tensor::from_vec(*shape, data).expect("sized"));
        }
        Network {
            params,
            bn_names: self.bns.iter().map(|(n, _)| n.clone()).collect(),
            bn_stats: self.bns.iter().map(|&(_, c)| RunningStats::new(c)).collect(),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, mean: f64, std: f64) -> Vec<f32> {
    let d = Normal::new(mean, std).expect("positive std");
    (0..n).map(|_| d.sample(rng) as f32).collect()
}

/// Binds parameters to graph variables in construction order during a forward pass.
pub(crate) struct Bound<'a, T> {
    vars: &'a [Var],
    stats: &'a mut [RunningStats<T>],
    next: usize,
    next_bn: usize,
    pub mode: BatchNormMode,
}

impl<'a, T: Scalar> Bound<'a, T> {
    pub fn new(vars: &'a [Var], stats: &'a mut [RunningStats<T>], mode: BatchNormMode) -> Self {
        Bound {
            vars,
            stats,
            next: 0,
            next_bn: 0,
            mode,
        }
    }

    fn take(&mut self) -> Var {
        let v = self.vars[self.next];
        self.next += 1;
        v
    }

    pub fn conv(&mut self, g: &mut Graph<T>, x: Var, bias: bool, stride: usize, pad: usize) -> Result<Var> {
        let w = self.take();
        let b = bias.then(|| self.take());
        Ok(g.conv2d(x, w, b, stride, pad)?)
    }

    pub fn deconv(&mut self, g: &mut Graph<T>, x: Var, bias: bool, stride: usize, pad: usize) -> Result<Var> {
        let w = self.take();
        let b = bias.then(|| self.take());
        Ok(g.conv_transpose2d(x, w, b, stride, pad)?)
    }

    pub fn batch_norm(&mut self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let gamma = self.take();
        let beta = self.take();
        let stats = &mut self.stats[self.next_bn];
        self.next_bn += 1;
        Ok(g.batch_norm2d(x, gamma, beta, stats, self.mode)?)
    }

    /// Every parameter and statistic was consumed.
    pub fn finish(self) {
        debug_assert_eq!(self.next, self.vars.len());
        debug_assert_eq!(self.next_bn, self.stats.len());
    }
}
