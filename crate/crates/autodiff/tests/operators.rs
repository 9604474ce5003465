use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarcolor_autodiff::gradcheck::{self, Tolerance};
use sarcolor_autodiff::{AutodiffError, BatchNormMode, Graph, RunningStats, Shape, Tensor, Var};

fn random(rng: &mut ChaCha8Rng, shape: Shape) -> Tensor<f64> {
    let data = (0..shape.numel()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Uniform in `±[0.05, 1]`, keeping finite differences away from kinks at zero.
fn random_off_kink(rng: &mut ChaCha8Rng, shape: Shape) -> Tensor<f64> {
    let data = (0..shape.numel())
        .map(|_| {
            let m: f64 = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Weighted sum with fixed random weights, turning any tensor into a scalar with a
/// non-uniform upstream gradient.
fn project(g: &mut Graph<f64>, v: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random(&mut rng, g.shape(v));
    let wv = g.leaf(w, false);
    let prod = g.mul(v, wv).unwrap();
    g.sum(prod)
}

fn assert_passes(name: &str, f: impl Fn(&mut Graph<f64>, &[Var]) -> sarcolor_autodiff::Result<Var>, inputs: &[Tensor<f64>]) {
    let report = gradcheck::check(f, inputs, Tolerance::default()).unwrap();
    assert!(report.passed, "{name}: {report:?}");
}

#[test]
fn conv2d_gradients() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=2);
        let ic = rng.gen_range(1..=3);
        let oc = rng.gen_range(1..=3);
        let (k, s, p) = [(3, 1, 1), (4, 2, 1), (1, 1, 0), (2, 2, 0)][seed as usize % 4];
        let size = if s == 2 { 6 } else { 5 };
        let inputs = [
            random(&mut rng, Shape::new(n, ic, size, size)),
            random(&mut rng, Shape::new(oc, ic, k, k)),
            random(&mut rng, Shape::new(1, oc, 1, 1)),
        ];
        assert_passes(
            "conv2d",
            |g, v| {
                let y = g.conv2d(v[0], v[1], Some(v[2]), s, p)?;
                Ok(project(g, y, 99))
            },
            &inputs,
        );
    }
}

#[test]
fn conv_transpose2d_gradients() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.gen_range(1..=2);
        let ic = rng.gen_range(1..=3);
        let oc = rng.gen_range(1..=3);
        let (k, s, p) = [(4, 2, 1), (3, 1, 1), (2, 2, 0)][seed as usize % 3];
        let inputs = [
            random(&mut rng, Shape::new(n, ic, 3, 4)),
            random(&mut rng, Shape::new(ic, oc, k, k)),
            random(&mut rng, Shape::new(1, oc, 1, 1)),
        ];
        assert_passes(
            "conv_transpose2d",
            |g, v| {
                let y = g.conv_transpose2d(v[0], v[1], Some(v[2]), s, p)?;
                Ok(project(g, y, 7))
            },
            &inputs,
        );
    }
}

#[test]
fn batchnorm_gradients_both_modes() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let c = rng.gen_range(1..=3);
        let inputs = [
            random(&mut rng, Shape::new(2, c, 3, 3)),
            random(&mut rng, Shape::new(1, c, 1, 1)),
            random(&mut rng, Shape::new(1, c, 1, 1)),
        ];
        for mode in [BatchNormMode::Train, BatchNormMode::Eval] {
            let mut stats = RunningStats::<f64>::new(c);
            stats.mean.iter_mut().for_each(|m| *m = 0.2);
            stats.var.iter_mut().for_each(|v| *v = 1.7);
            assert_passes(
                "batch_norm2d",
                |g, v| {
                    let mut st = stats.clone();
                    let y = g.batch_norm2d(v[0], v[1], v[2], &mut st, mode)?;
                    Ok(project(g, y, 3))
                },
                &inputs,
            );
        }
    }
}

#[test]
fn activation_gradients() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let x = random_off_kink(&mut rng, Shape::new(2, 3, 4, 4));
        assert_passes("relu", |g, v| {
            let y = g.relu(v[0]);
            Ok(project(g, y, 1))
        }, std::slice::from_ref(&x));
        assert_passes(
            "leaky_relu",
            |g, v| {
                let y = g.leaky_relu(v[0], 0.2);
                Ok(project(g, y, 1))
            },
            std::slice::from_ref(&x),
        );
        assert_passes("tanh", |g, v| {
            let y = g.tanh(v[0]);
            Ok(project(g, y, 1))
        }, std::slice::from_ref(&x));
        assert_passes("sigmoid", |g, v| {
            let y = g.sigmoid(v[0]);
            Ok(project(g, y, 1))
        }, std::slice::from_ref(&x));
    }
}

#[test]
fn concat_arithmetic_and_loss_gradients() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let a = random(&mut rng, Shape::new(2, 2, 3, 3));
        let b = random(&mut rng, Shape::new(2, 1, 3, 3));
        assert_passes(
            "concat",
            |g, v| {
                let y = g.concat_channels(v[0], v[1])?;
                Ok(project(g, y, 5))
            },
            &[a.clone(), b],
        );

        let p = random(&mut rng, Shape::new(2, 3, 4, 4));
        let t = random(&mut rng, Shape::new(2, 3, 4, 4));
        // Offsets of at least 0.05 keep |p - t| away from the l1 kink.
        let t = Tensor::from_vec(
            t.shape(),
            t.data()
                .iter()
                .zip(p.data())
                .map(|(&ti, &pi)| if (ti - pi).abs() < 0.05 { pi + 0.3 } else { ti })
                .collect(),
        )
        .unwrap();
        assert_passes("l1", |g, v| g.l1_loss(v[0], v[1]), &[p.clone(), t.clone()]);
        assert_passes("mse", |g, v| g.mse_loss(v[0], v[1]), &[p.clone(), t.clone()]);
        assert_passes(
            "arith",
            |g, v| {
                let s = g.add(v[0], v[1])?;
                let d = g.sub(s, v[1])?;
                let m = g.mul(d, v[1])?;
                let sc = g.scale(m, 1.5);
                Ok(g.mean(sc))
            },
            &[p.clone(), t],
        );
        for label in [0.0, 1.0] {
            let z = p.map(|v| v * 8.0);
            assert_passes("bce", |g, v| Ok(g.bce_with_logits(v[0], label)), &[z]);
        }
    }
}

#[test]
fn composite_network_gradients() {
    // Down-conv, batchnorm, leaky relu, up-conv with skip concat, tanh, l1 + bce.
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let inputs = [
            random(&mut rng, Shape::new(2, 1, 8, 8)),
            random(&mut rng, Shape::new(3, 1, 4, 4)),
            random(&mut rng, Shape::new(1, 3, 1, 1)),
            random(&mut rng, Shape::new(1, 3, 1, 1)),
            random(&mut rng, Shape::new(3, 2, 4, 4)),
            random(&mut rng, Shape::new(2, 2, 8, 8)),
        ];
        let target = random(&mut rng, Shape::new(2, 2, 8, 8));
        assert_passes(
            "composite",
            |g, v| {
                let mut st = RunningStats::new(3);
                let d = g.conv2d(v[0], v[1], None, 2, 1)?;
                let d = g.batch_norm2d(d, v[2], v[3], &mut st, BatchNormMode::Train)?;
                let d = g.leaky_relu(d, 0.2);
                let u = g.conv_transpose2d(d, v[4], None, 2, 1)?;
                let u = g.tanh(u);
                let skip = g.mul(u, v[5])?;
                let cat = g.concat_channels(skip, u)?;
                let t = g.leaf(target.clone(), false);
                let cat_t = g.concat_channels(t, t)?;
                let l1 = g.mse_loss(cat, cat_t)?;
                let adv = g.bce_with_logits(u, 1.0);
                g.add(l1, adv)
            },
            &inputs,
        );
    }
}

#[test]
fn adjoint_identity_holds() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let (k, s, p, size) = [(4, 2, 1, 8), (3, 1, 1, 5), (3, 2, 1, 7), (1, 1, 0, 4)][seed as usize % 4];
        let x = random(&mut rng, Shape::new(2, 3, size, size));
        let w = random(&mut rng, Shape::new(4, 3, k, k));
        let mut g = Graph::new();
        let (xv, wv) = (g.leaf(x.clone(), false), g.leaf(w, false));
        let y = g.conv2d(xv, wv, None, s, p).unwrap();
        let ys = g.shape(y);
        let probe = random(&mut rng, ys);
        let pv = g.leaf(probe.clone(), false);
        let back = g.conv_transpose2d(pv, wv, None, s, p).unwrap();
        assert_eq!(g.shape(back), x.shape());
        let lhs = g.value(y).dot(&probe);
        let rhs = x.dot(g.value(back));
        assert!((lhs - rhs).abs() <= 1e-4 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn conv_shape_contracts() {
    let mut g = Graph::<f32>::new();
    let x = g.leaf(Tensor::zeros(Shape::new(8, 1, 64, 64)), false);
    let w = g.leaf(Tensor::zeros(Shape::new(64, 1, 4, 4)), false);
    let y = g.conv2d(x, w, None, 2, 1).unwrap();
    assert_eq!(g.shape(y), Shape::new(8, 64, 32, 32));

    let x = g.leaf(Tensor::zeros(Shape::new(8, 512, 2, 2)), false);
    let w = g.leaf(Tensor::zeros(Shape::new(512, 256, 4, 4)), false);
    let b = g.leaf(Tensor::full(Shape::new(1, 256, 1, 1), 0.25), false);
    let y = g.conv_transpose2d(x, w, Some(b), 2, 1).unwrap();
    assert_eq!(g.shape(y), Shape::new(8, 256, 4, 4));
    assert!(g.value(y).data().iter().all(|&v| v == 0.25));

    let x = g.leaf(Tensor::zeros(Shape::new(1, 1, 63, 63)), false);
    let w = g.leaf(Tensor::zeros(Shape::new(4, 1, 4, 4)), false);
    assert!(matches!(
        g.conv2d(x, w, None, 2, 1),
        Err(AutodiffError::NonIntegralOutput { .. })
    ));
}

#[test]
fn identity_kernel_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random(&mut rng, Shape::new(2, 3, 5, 5));
    let mut w = Tensor::zeros(Shape::new(3, 3, 1, 1));
    for c in 0..3 {
        w.data_mut()[c * 3 + c] = 1.0;
    }
    let mut g = Graph::new();
    let (xv, wv) = (g.leaf(x.clone(), false), g.leaf(w, false));
    let y = g.conv2d(xv, wv, None, 1, 0).unwrap();
    assert_eq!(g.value(y), &x);
}

#[test]
fn batchnorm_normalization_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random(&mut rng, Shape::new(4, 2, 8, 8)).map(|v| v * 3.0 + 1.0);
    let gamma = Tensor::from_vec(Shape::new(1, 2, 1, 1), vec![2.0, 0.5]).unwrap();
    let beta = Tensor::from_vec(Shape::new(1, 2, 1, 1), vec![-1.0, 3.0]).unwrap();
    let mut stats = RunningStats::new(2);
    let mut g = Graph::new();
    let (xv, gv, bv) = (g.leaf(x, false), g.leaf(gamma, false), g.leaf(beta, false));
    let y = g.batch_norm2d(xv, gv, bv, &mut stats, BatchNormMode::Train).unwrap();
    let out = g.value(y);
    for (c, (want_mean, want_std)) in [(-1.0, 2.0), (3.0, 0.5)].into_iter().enumerate() {
        let vals: Vec<f64> = (0..4).flat_map(|b| out.sample(b)[c * 64..(c + 1) * 64].to_vec()).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert!((m - want_mean).abs() < 1e-3);
        assert!((sd - want_std).abs() < 1e-3);
    }
    assert!(stats.mean.iter().all(|&m| m != 0.0));

    let e1 = g.batch_norm2d(xv, gv, bv, &mut stats.clone(), BatchNormMode::Eval).unwrap();
    let e2 = g.batch_norm2d(xv, gv, bv, &mut stats.clone(), BatchNormMode::Eval).unwrap();
    assert_eq!(g.value(e1), g.value(e2));

    let one = g.leaf(Tensor::zeros(Shape::new(1, 2, 1, 1)), false);
    assert_eq!(
        g.batch_norm2d(one, gv, bv, &mut stats, BatchNormMode::Train).unwrap_err(),
        AutodiffError::DegenerateBatchNorm
    );
}

#[test]
fn batchnorm_identity_on_normalized_input() {
    let data: Vec<f64> = (0..2 * 16).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let x = Tensor::from_vec(Shape::new(2, 1, 4, 4), data).unwrap();
    let mut g = Graph::new();
    let xv = g.leaf(x.clone(), false);
    let gv = g.leaf(Tensor::full(Shape::new(1, 1, 1, 1), 1.0), false);
    let bv = g.leaf(Tensor::zeros(Shape::new(1, 1, 1, 1)), false);
    let y = g.batch_norm2d(xv, gv, bv, &mut RunningStats::new(1), BatchNormMode::Train).unwrap();
    for (a, b) in g.value(y).data().iter().zip(x.data()) {
        assert!((a - b).abs() < 1e-4);
    }
}

#[test]
fn activation_values() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::from_vec(Shape::new(1, 1, 1, 3), vec![-1.0, 0.0, 2.0]).unwrap(), false);
    let lr = g.leaky_relu(x, 0.2);
    assert_eq!(g.value(lr).data(), &[-0.2, 0.0, 2.0]);
    let t = g.tanh(x);
    assert_eq!(g.value(t).data()[1], 0.0);
    let r1 = g.relu(x);
    let r2 = g.relu(r1);
    assert_eq!(g.value(r1), g.value(r2));
}

#[test]
fn concat_and_losses() {
    let mut g = Graph::<f64>::new();
    let a = g.leaf(Tensor::zeros(Shape::new(2, 64, 4, 4)), false);
    let b = g.leaf(Tensor::zeros(Shape::new(2, 64, 4, 4)), false);
    let c = g.concat_channels(a, b).unwrap();
    assert_eq!(g.shape(c), Shape::new(2, 128, 4, 4));
    let bad = g.leaf(Tensor::zeros(Shape::new(2, 64, 2, 4)), false);
    assert!(g.concat_channels(a, bad).is_err());

    let x = g.leaf(Tensor::full(Shape::new(1, 3, 2, 2), 0.7), false);
    let l1 = g.l1_loss(x, x).unwrap();
    assert_eq!(g.value(l1).item(), 0.0);

    let z = g.leaf(Tensor::scalar(0.0), false);
    let bce = g.bce_with_logits(z, 1.0);
    assert!((g.value(bce).item() - std::f64::consts::LN_2).abs() < 1e-12);

    let big = g.leaf(Tensor::scalar(1000.0), false);
    let b1 = g.bce_with_logits(big, 1.0);
    let b0 = g.bce_with_logits(big, 0.0);
    assert_eq!(g.value(b1).item(), 0.0);
    assert_eq!(g.value(b0).item(), 1000.0);
}

#[test]
fn backward_basics() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::from_vec(Shape::new(1, 2, 1, 2), vec![1.0, -2.0, 3.0, 0.5]).unwrap(), true);
    let s = g.sum(x);
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[1.0; 4]);
    assert_eq!(g.backward(s).unwrap_err(), AutodiffError::BackwardTwice);

    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::from_vec(Shape::new(1, 2, 1, 2), vec![1.0, -2.0, 3.0, 0.5]).unwrap(), true);
    let sq = g.mul(x, x).unwrap();
    let s = g.sum(sq);
    let half = g.scale(s, 0.5);
    g.backward(half).unwrap();
    assert_eq!(g.grad(x).unwrap(), g.value(x).data());

    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::zeros(Shape::new(1, 1, 1, 2)), true);
    assert!(matches!(g.backward(x), Err(AutodiffError::NotScalar(_))));
}

#[test]
fn gradients_accumulate_across_uses() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::scalar(3.0), true);
    let y = g.add(x, x).unwrap();
    let z = g.add(y, x).unwrap();
    g.backward(z).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[3.0]);
}

#[test]
fn untracked_leaves_get_no_gradient() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::scalar(3.0), true);
    let c = g.leaf(Tensor::scalar(2.0), false);
    let y = g.mul(x, c).unwrap();
    g.backward(y).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[2.0]);
    assert!(g.grad(c).is_none());
}

#[test]
fn forward_and_backward_are_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(&mut rng, Shape::new(2, 3, 8, 8)).cast::<f32>();
        let w = random(&mut rng, Shape::new(5, 3, 4, 4)).cast::<f32>();
        let mut g = Graph::<f32>::new();
        let (xv, wv) = (g.leaf(x, true), g.leaf(w, true));
        let y = g.conv2d(xv, wv, None, 2, 1).unwrap();
        let y = g.leaky_relu(y, 0.2);
        let l = g.mean(y);
        g.backward(l).unwrap();
        (g.value(y).clone(), g.grad(wv).unwrap().to_vec(), g.grad(xv).unwrap().to_vec())
    };
    assert_eq!(run(), run());
}
