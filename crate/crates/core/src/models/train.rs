use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sarcolor_autodiff::{AdamState, BatchNormMode, Graph, Shape, Tensor, Var};

use super::checkpoint::{Checkpoint, ModelKind};
use super::cnn::{build_cnn, cnn_forward};
use super::config::{CnnLoss, TrainConfig};
use super::gan::{build_discriminator, build_generator, discriminator_forward, generator_forward};
use super::loss::{loss_d, loss_g_terms};
use super::net::Network;
use super::{denormalize_out, normalize_in};
use crate::error::{Error, Result};
use crate::raster::{PairedSample, RasterPatch};

const DISC_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;
const SHUFFLE_SEED_OFFSET: u64 = 0x6a09_e667_f3bc_c909;

/// Normalized inputs `(n, 1, h, w)` and targets `(n, 3, h, w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub x: Tensor<f32>,
    pub y: Tensor<f32>,
}

impl Batch {
    pub fn from_samples(samples: &[&PairedSample], bit_depth: u32) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InvalidInput("empty batch".into()))?;
        let (h, w) = first.sar.dims();
        let mut x = Vec::with_capacity(samples.len() * h * w);
        let mut y = Vec::with_capacity(samples.len() * 3 * h * w);
        for s in samples {
            s.sar.expect_same_dims(&first.sar, "batch")?;
            x.extend(normalize_in(&s.sar, bit_depth).into_data());
            y.extend(normalize_in(s.gt()?, bit_depth).into_data());
        }
        let n = samples.len();
        Ok(Batch {
            x: Tensor::from_vec(Shape::new(n, 1, h, w), x)?,
            y: Tensor::from_vec(Shape::new(n, 3, h, w), y)?,
        })
    }

    pub fn len(&self) -> usize {
        self.x.shape().n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Losses of one optimizer step. `loss_g` is the optimized objective; for the CNN it is the
/// configured ℓ1 or ℓ2 loss and `loss_adv` / `loss_d` are absent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss_g: f64,
    pub loss_l1: f64,
    pub loss_adv: Option<f64>,
    pub loss_d: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub steps: Vec<StepRecord>,
    /// Mean `loss_g` of each completed epoch.
    pub epoch_loss: Vec<f64>,
}

impl TrainTrace {
    fn push(&mut self, r: StepRecord) {
        if self.epoch_loss.len() <= r.epoch {
            self.epoch_loss.resize(r.epoch + 1, 0.0);
        }
        self.steps.push(r);
    }

    fn close_epochs(&mut self) {
        for (e, slot) in self.epoch_loss.iter_mut().enumerate() {
            let v: Vec<f64> = self.steps.iter().filter(|s| s.epoch == e).map(|s| s.loss_g).collect();
            *slot = v.iter().sum::<f64>() / v.len().max(1) as f64;
        }
    }

    pub fn l1(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss_l1).collect()
    }

    /// Means of consecutive, non-overlapping windows of the ℓ1 trace.
    pub fn windowed_l1(&self, window: usize) -> Vec<f64> {
        self.l1()
            .chunks_exact(window.max(1))
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

/// Mini-batch order for a whole run: each epoch a fresh seeded permutation, the last
/// short batch kept.
fn schedule(config: &TrainConfig, n: usize) -> Vec<(usize, Vec<usize>)> {
    let total = config.total_steps(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(SHUFFLE_SEED_OFFSET));
    let mut out = Vec::with_capacity(total);
    let mut epoch = 0;
    while out.len() < total {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            if out.len() == total {
                break;
            }
            out.push((epoch, chunk.to_vec()));
        }
        epoch += 1;
    }
    out
}

fn check_training_set(samples: &[PairedSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    for s in samples {
        s.gt()?;
    }
    Ok(())
}

fn borrowed(grads: &[Option<Vec<f32>>]) -> Vec<Option<&[f32]>> {
    grads.iter().map(|g| g.as_deref()).collect()
}

fn finite(v: f64, what: &'static str, step: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss { what, step })
    }
}

/// Train the plain CNN (ℓ1 by default, ℓ2 on request) with Adam.
pub fn train_cnn(config: &TrainConfig, samples: &[PairedSample]) -> Result<Checkpoint> {
    config.validate()?;
    check_training_set(samples)?;
    let spec = config.cnn.clone();
    let mut net = build_cnn(&spec, config.seed)?;
    let mut adam = AdamState::new(config.adam(), &net.params);
    let mut trace = TrainTrace::default();
    for (step, (epoch, idx)) in schedule(config, samples.len()).into_iter().enumerate() {
        let batch = Batch::from_samples(&idx.iter().map(|&i| &samples[i]).collect::<Vec<_>>(), config.bit_depth)?;
        let mut g = Graph::new();
        let vars = net.params.attach(&mut g, true);
        let x = g.leaf(batch.x, false);
        let y = g.leaf(batch.y, false);
        let pred = cnn_forward(&spec, &mut g, &vars, x)?;
        let l1 = g.l1_loss(pred, y)?;
        let loss = match config.cnn_loss {
            CnnLoss::L1 => l1,
            CnnLoss::L2 => g.mse_loss(pred, y)?,
        };
        let loss_v = finite(g.value(loss).item() as f64, "cnn loss", step)?;
        let l1_v = g.value(l1).item() as f64;
        g.backward(loss)?;
        let grads = net.params.take_grads(g, &vars)?;
        adam.step(&mut net.params, &borrowed(&grads))?;
        trace.push(StepRecord {
            step,
            epoch,
            loss_g: loss_v,
            loss_l1: l1_v,
            loss_adv: None,
            loss_d: None,
        });
    }
    trace.close_epochs();
    Ok(Checkpoint {
        kind: ModelKind::Cnn(spec),
        config: config.clone(),
        generator: net,
        discriminator: None,
        adam_g: Some(adam),
        adam_d: None,
        trace,
    })
}

/// Alternating discriminator/generator updates of the conditional GAN.
pub struct CganTrainer {
    pub config: TrainConfig,
    pub generator: Network,
    pub discriminator: Network,
    pub adam_g: AdamState<f32>,
    pub adam_d: AdamState<f32>,
    pub trace: TrainTrace,
    steps_done: usize,
}

/// Generator half of a step, kept alive across the discriminator update.
struct GeneratorPass {
    graph: Graph<f32>,
    vars: Vec<Var>,
    x: Var,
    fake: Var,
}

impl CganTrainer {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let generator = build_generator(&config.gan, config.seed)?;
        let discriminator = build_discriminator(&config.gan, config.seed.wrapping_add(DISC_SEED_OFFSET))?;
        Ok(CganTrainer {
            adam_g: AdamState::new(config.adam(), &generator.params),
            adam_d: AdamState::new(config.adam(), &discriminator.params),
            config: config.clone(),
            generator,
            discriminator,
            trace: TrainTrace::default(),
            steps_done: 0,
        })
    }

    fn generator_pass(&mut self, batch: &Batch) -> Result<GeneratorPass> {
        let mut graph = Graph::new();
        let vars = self.generator.params.attach(&mut graph, true);
        let x = graph.leaf(batch.x.clone(), false);
        let fake = generator_forward(
            &self.config.gan,
            &mut self.generator.bn_stats,
            &mut graph,
            &vars,
            x,
            BatchNormMode::Train,
        )?;
        Ok(GeneratorPass { graph, vars, x, fake })
    }

    /// One discriminator update on `fake` (treated as a constant) and the real pair.
    /// Returns `loss_d`. Generator parameters are not touched.
    pub fn update_discriminator(&mut self, batch: &Batch, fake: &Tensor<f32>) -> Result<f64> {
        let mut g = Graph::new();
        let vars = self.discriminator.params.attach(&mut g, true);
        let x = g.leaf(batch.x.clone(), false);
        let fake = g.leaf(fake.clone(), false);
        let real = g.leaf(batch.y.clone(), false);
        let stats = &mut self.discriminator.bn_stats;
        let logits_fake = discriminator_forward(stats, &mut g, &vars, x, fake, BatchNormMode::Train)?;
        let logits_real = discriminator_forward(stats, &mut g, &vars, x, real, BatchNormMode::Train)?;
        let loss = loss_d(&mut g, logits_fake, logits_real, self.config.beta as f32)?;
        let value = finite(g.value(loss).item() as f64, "discriminator loss", self.steps_done)?;
        g.backward(loss)?;
        let grads = self.discriminator.params.take_grads(g, &vars)?;
        self.adam_d.step(&mut self.discriminator.params, &borrowed(&grads))?;
        Ok(value)
    }

    fn finish_generator(&mut self, pass: GeneratorPass, batch: &Batch) -> Result<(f64, f64, Option<f64>)> {
        let GeneratorPass { mut graph, vars, x, fake } = pass;
        let g = &mut graph;
        let y = g.leaf(batch.y.clone(), false);
        let cfg = &self.config;
        let (total, l1, adv) = if cfg.use_gan_loss {
            // The discriminator enters as constants: no gradient reaches its parameters.
            let dvars = self.discriminator.params.attach(g, false);
            let logits = discriminator_forward(&mut self.discriminator.bn_stats, g, &dvars, x, fake, BatchNormMode::Train)?;
            let terms = loss_g_terms(g, logits, fake, y, cfg.alpha as f32, true, cfg.use_l1_loss)?;
            (terms.total, terms.l1, Some(terms.adversarial))
        } else {
            let l1 = g.l1_loss(fake, y)?;
            let weight = if cfg.use_l1_loss { cfg.alpha as f32 } else { 0.0 };
            (g.scale(l1, weight), l1, None)
        };
        let step = self.steps_done;
        let total_v = finite(g.value(total).item() as f64, "generator loss", step)?;
        if total_v > cfg.divergence_limit {
            return Err(Error::Diverged {
                step,
                loss: total_v,
                limit: cfg.divergence_limit,
            });
        }
        let l1_v = g.value(l1).item() as f64;
        let adv_v = adv.map(|a| g.value(a).item() as f64);
        g.backward(total)?;
        let grads = self.generator.params.take_grads(graph, &vars)?;
        self.adam_g.step(&mut self.generator.params, &borrowed(&grads))?;
        Ok((total_v, l1_v, adv_v))
    }

    /// A generator-only update, for isolating the two halves of a step.
    pub fn update_generator(&mut self, batch: &Batch) -> Result<f64> {
        let pass = self.generator_pass(batch)?;
        Ok(self.finish_generator(pass, batch)?.0)
    }

    /// Generator forward, discriminator update on its detached output, then a generator
    /// update scored by the freshly updated discriminator.
    pub fn step(&mut self, batch: &Batch, epoch: usize) -> Result<StepRecord> {
        let pass = self.generator_pass(batch)?;
        let loss_d = if self.config.use_gan_loss {
            let fake = pass.graph.value(pass.fake).clone();
            Some(self.update_discriminator(batch, &fake)?)
        } else {
            None
        };
        let (loss_g, loss_l1, loss_adv) = self.finish_generator(pass, batch)?;
        let record = StepRecord {
            step: self.steps_done,
            epoch,
            loss_g,
            loss_l1,
            loss_adv,
            loss_d,
        };
        self.steps_done += 1;
        self.trace.push(record);
        Ok(record)
    }

    pub fn into_checkpoint(mut self) -> Checkpoint {
        self.trace.close_epochs();
        Checkpoint {
            kind: ModelKind::Cgan(self.config.gan.clone()),
            config: self.config,
            generator: self.generator,
            discriminator: Some(self.discriminator),
            adam_g: Some(self.adam_g),
            adam_d: Some(self.adam_d),
            trace: self.trace,
        }
    }
}

pub fn train_cgan(config: &TrainConfig, samples: &[PairedSample]) -> Result<Checkpoint> {
    check_training_set(samples)?;
    let mut trainer = CganTrainer::new(config)?;
    let (h, w) = samples[0].sar.dims();
    config.gan.check_input(h, w)?;
    for (epoch, idx) in schedule(config, samples.len()) {
        let batch = Batch::from_samples(&idx.iter().map(|&i| &samples[i]).collect::<Vec<_>>(), config.bit_depth)?;
        trainer.step(&batch, epoch)?;
    }
    Ok(trainer.into_checkpoint())
}

/// Eval-mode forward pass of a trained colorizer, mapped back to `[0, 2^p]`.
pub fn colorize(ckpt: &Checkpoint, sar: &RasterPatch) -> Result<RasterPatch> {
    sar.expect_channels("colorize", 1)?;
    let p = ckpt.config.bit_depth;
    let mut g = Graph::new();
    let vars = ckpt.generator.params.attach(&mut g, false);
    let x = g.leaf(normalize_in(sar, p), false);
    let out = match &ckpt.kind {
        ModelKind::Cnn(spec) => cnn_forward(spec, &mut g, &vars, x)?,
        ModelKind::Cgan(spec) => {
            let mut stats = ckpt.generator.bn_stats.clone();
            generator_forward(spec, &mut stats, &mut g, &vars, x, BatchNormMode::Eval)?
        }
    };
    denormalize_out(g.value(out), 0, p)
}
