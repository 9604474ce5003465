//! Finite-difference checks of the training losses through small instances of each
//! network, in double precision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarcolor_autodiff::gradcheck::{check, GradCheckReport, Tolerance};
use sarcolor_autodiff::{BatchNormMode, RunningStats, Shape, Tensor};

use super::{build_cnn, build_discriminator, build_generator, cnn_forward, discriminator_forward, generator_forward, loss_d, loss_g};
use super::{CnnSpec, GanSpec, Network};
use crate::error::Result;

/// Tolerance used by [`gradcheck_suite`].
pub const GRADCHECK_TOLERANCE: Tolerance = Tolerance {
    step: 1e-6,
    rel: 1e-4,
    abs: 1e-7,
};

fn random(rng: &mut ChaCha8Rng, shape: Shape, scale: f64) -> Tensor<f64> {
    let data = (0..shape.numel()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape, data).expect("shape matches data")
}

fn f64_params(net: &Network) -> Vec<Tensor<f64>> {
    net.params.iter().map(|(_, t)| t.cast()).collect()
}

fn fresh_stats(net: &Network) -> Vec<RunningStats<f64>> {
    net.bn_stats.iter().map(|s| RunningStats::new(s.mean.len())).collect()
}

/// Generator loss through a depth-3 U-Net, discriminator loss through a small PatchGAN and
/// the ℓ1 objective through a small CNN, each against central differences.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gan = GanSpec {
        depth: 3,
        base_channels: 4,
        max_channels: 8,
        disc_channels: 2,
    };
    let mut out = Vec::new();

    let gen = build_generator(&gan, seed)?;
    let x = random(&mut rng, Shape::new(2, 1, 8, 8), 1.0);
    let gt = random(&mut rng, Shape::new(2, 3, 8, 8), 0.8);
    let mut inputs = f64_params(&gen);
    inputs.push(random(&mut rng, Shape::new(2, 1, 2, 2), 1.0));
    let n = gen.params.len();
    let report = check(
        |g, vars| {
            let xv = g.leaf(x.clone(), false);
            let t = g.leaf(gt.clone(), false);
            let mut stats = fresh_stats(&gen);
            let pred = generator_forward(&gan, &mut stats, g, &vars[..n], xv, BatchNormMode::Train).expect("valid generator");
            Ok(loss_g(g, vars[n], pred, t, 3.0).expect("matching shapes"))
        },
        &inputs,
        GRADCHECK_TOLERANCE,
    )?;
    out.push(("generator loss", report));

    let disc = build_discriminator(&gan, seed.wrapping_add(1))?;
    let sar = random(&mut rng, Shape::new(2, 1, 32, 32), 1.0);
    let fake = random(&mut rng, Shape::new(2, 3, 32, 32), 1.0);
    let real = random(&mut rng, Shape::new(2, 3, 32, 32), 1.0);
    let report = check(
        |g, vars| {
            let s = g.leaf(sar.clone(), false);
            let f = g.leaf(fake.clone(), false);
            let r = g.leaf(real.clone(), false);
            let mut stats = fresh_stats(&disc);
            let lf = discriminator_forward(&mut stats, g, vars, s, f, BatchNormMode::Train).expect("valid discriminator");
            let lr = discriminator_forward(&mut stats, g, vars, s, r, BatchNormMode::Train).expect("valid discriminator");
            Ok(loss_d(g, lf, lr, 0.5).expect("matching shapes"))
        },
        &f64_params(&disc),
        GRADCHECK_TOLERANCE,
    )?;
    out.push(("discriminator loss", report));

    let spec = CnnSpec::new(&[3, 1, 3], &[4, 4, 3])?;
    let cnn = build_cnn(&spec, seed.wrapping_add(2))?;
    let x = random(&mut rng, Shape::new(2, 1, 6, 6), 1.0);
    let y = random(&mut rng, Shape::new(2, 3, 6, 6), 0.8);
    let report = check(
        |g, vars| {
            let xv = g.leaf(x.clone(), false);
            let t = g.leaf(y.clone(), false);
            let pred = cnn_forward(&spec, g, vars, xv).expect("valid cnn");
            g.l1_loss(pred, t)
        },
        &f64_params(&cnn),
        GRADCHECK_TOLERANCE,
    )?;
    out.push(("cnn l1 loss", report));
    Ok(out)
}
