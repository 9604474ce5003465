mod common;

use common::oracle;
use sarcolor::bench::*;
use sarcolor::metrics::{evaluate_method, r2, EvalSettings};
use sarcolor::models::{GanSpec, TrainConfig};
use sarcolor::protocol::intensity;
use sarcolor::regress::nocol;
use sarcolor::{Error, PairedSample};

fn small(count: usize, seed: u64) -> Vec<PairedSample> {
    synth_dataset(&SynthConfig {
        count,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn tiny_gan(steps: usize) -> TrainConfig {
    let mut c = TrainConfig {
        batch_size: 2,
        max_steps: Some(steps),
        ..TrainConfig::default()
    };
    c.gan = GanSpec {
        depth: 6,
        base_channels: 4,
        max_channels: 16,
        disc_channels: 4,
    };
    c
}

#[test]
fn synthetic_data_is_seeded_and_follows_the_protocol() {
    let a = small(3, 7);
    assert_eq!(a, small(3, 7));
    assert_ne!(a[0].sar, small(3, 8)[0].sar);
    let ids: Vec<_> = a.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["synth_0000", "synth_0001", "synth_0002"]);
    for s in &a {
        assert_eq!(s.sar.dims(), (64, 64));
        let (lo, hi) = s.sar.data().iter().fold((f32::MAX, f32::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(lo >= 0.0 && hi <= 4096.0, "sar range {lo}..{hi}");
        assert!(hi - lo > 1000.0, "sar should span the range");
        let gt = s.gt().unwrap();
        let i = intensity(gt).unwrap();
        let ms_mean = intensity(&s.ms).unwrap().data().iter().map(|&v| v as f64).sum::<f64>() / 4096.0;
        let gt_mean = i.data().iter().map(|&v| v as f64).sum::<f64>() / 4096.0;
        assert!((gt_mean - ms_mean).abs() < 1e-4 * ms_mean, "{gt_mean} vs {ms_mean}");
    }
    // Patches of one config differ.
    assert_ne!(a[0].ms, a[1].ms);
    assert!(synth_dataset(&SynthConfig {
        looks: 0.0,
        ..SynthConfig::default()
    })
    .is_err());
}

#[test]
fn written_dataset_reloads_identically() {
    let data = small(2, 1);
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&data, dir.path(), "desk").unwrap();
    assert!(dir.path().join("desk.jsonl").is_file());
    assert_eq!(manifest.load_all().unwrap(), data);
}

#[test]
fn nocol_row_is_prepended_and_labels_are_unique() {
    let data = small(3, 2);
    let (train, test) = data.split_at(2);
    let opts = BenchOptions::default();
    let run = run_benchmark(train, test, &[Method::lr()], &opts).unwrap();
    let labels: Vec<_> = run.results.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["nocol", "lr"]);
    assert!(run.result("nocol").unwrap().train_loss.is_none());
    assert_eq!(run.test_ids, ["synth_0002"]);

    let nocol_only = run_benchmark(train, test, &[], &opts).unwrap();
    assert_eq!(nocol_only.results.len(), 1);

    let dup = run_labeled(
        train,
        test,
        &[("x".into(), Method::lr()), ("x".into(), Method::NoCol)],
        &opts,
    );
    assert!(matches!(dup, Err(Error::DuplicateId(_))));
    assert!(run_benchmark(train, &[], &[], &opts).is_err());
}

#[test]
fn benchmark_is_deterministic_and_round_trips() {
    let data = small(4, 3);
    let (train, test) = data.split_at(3);
    let methods = [Method::lr(), Method::nl(&[3]), Method::Cgan(tiny_gan(2))];
    let opts = BenchOptions {
        run_id: "det".into(),
        ..BenchOptions::default()
    };
    let a = run_benchmark(train, test, &methods, &opts).unwrap();
    let b = run_benchmark(train, test, &methods, &opts).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(BenchRun::from_json(&a.to_json()).unwrap(), a);
    assert_eq!(a.environment["cgan.depth"], "6");
    let table = a.render();
    for label in ["nocol", "lr", "nl", "cgan", "ideal value"] {
        assert!(table.contains(label), "{table}");
    }
}

#[test]
fn reports_match_reevaluation_of_written_predictions() {
    let data = small(4, 4);
    let (train, test) = data.split_at(2);
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(test, &dir.path().join("test"), "test").unwrap();
    let opts = BenchOptions {
        pred_dir: Some(dir.path().join("pred")),
        ..BenchOptions::default()
    };
    let run = run_benchmark(train, test, &[Method::lr()], &opts).unwrap();
    for r in &run.results {
        let again = evaluate_method(&manifest, &dir.path().join("pred").join(&r.label), r.method.name(), &EvalSettings::default()).unwrap();
        assert_eq!(again, r.report);
    }
}

#[test]
fn nocol_angle_is_the_angle_to_the_grey_axis() {
    let data = small(2, 5);
    for s in &data {
        let gt = s.gt().unwrap();
        let pred = nocol(&s.sar).unwrap();
        let n = gt.plane_len();
        let mut acc = 0.0;
        let mut count = 0;
        for i in 0..n {
            let v: Vec<f64> = (0..3).map(|b| gt.data()[b * n + i] as f64).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || s.sar.data()[i] == 0.0 {
                continue;
            }
            acc += (v.iter().sum::<f64>() / (norm * 3f64.sqrt())).clamp(-1.0, 1.0).acos();
            count += 1;
        }
        let expected = (acc / count as f64).to_degrees();
        let got = sarcolor::metrics::sam(gt, &pred).unwrap().degrees;
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
        assert!((got - oracle::sam_deg(gt, &pred)).abs() < 1e-6);
    }
}

fn ols_oracle(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}

#[test]
fn scatter_export_fits_each_case() {
    let data = small(2, 6);
    let gts: Vec<_> = data.iter().map(|s| s.gt().unwrap().clone()).collect();
    let shifted: Vec<_> = gts.iter().map(|g| g.map(|v| v + 25.0).unwrap()).collect();
    let lr_preds: Vec<_> = data.iter().map(|s| nocol(&s.sar).unwrap()).collect();

    let ident = export_scatter("ident", data.iter().zip(&gts).map(|(s, g)| (s.id.as_str(), g, g))).unwrap();
    for c in &ident.cases {
        assert!((c.fit.slope - 1.0).abs() < 1e-9 && c.fit.intercept.abs() < 1e-6 && (c.fit.r2 - 1.0).abs() < 1e-12);
    }
    let shift = export_scatter("shift", data.iter().zip(&gts).zip(&shifted).map(|((s, g), p)| (s.id.as_str(), g, p))).unwrap();
    for c in &shift.cases {
        assert!((c.fit.slope - 1.0).abs() < 1e-9 && (c.fit.intercept - 25.0).abs() < 1e-6);
    }

    let ex = export_scatter("nocol", data.iter().zip(&gts).zip(&lr_preds).map(|((s, g), p)| (s.id.as_str(), g, p))).unwrap();
    assert_eq!(ex.cases.len(), 2);
    for (c, (g, p)) in ex.cases.iter().zip(gts.iter().zip(&lr_preds)) {
        let (x, y) = (oracle::flatten(g), oracle::flatten(p));
        let (slope, intercept) = ols_oracle(&x, &y);
        assert!((c.fit.slope - slope).abs() <= 1e-9 * slope.abs().max(1.0));
        assert!((c.fit.intercept - intercept).abs() <= 1e-9 * intercept.abs().max(1.0) * 1e3);
        assert_eq!(c.fit.r2, r2(&x, &y).unwrap());
        assert!((c.fit.r2 - oracle::r2(&x, &y)).abs() < 1e-9);
    }
    let csv = ex.pairs_csv();
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 4096);
    assert!(csv.starts_with("id,reference,prediction\n"));
    assert_eq!(ex.fits_csv().lines().count(), 3);

    let small_gt = common::random_patch(&mut common::rng(0), 8, 8, 3, 0.0, 10.0);
    assert!(export_scatter("bad", [("a", &gts[0], &small_gt)]).is_err());
    assert!(export_scatter("empty", std::iter::empty()).is_err());
}

#[test]
fn residual_removes_the_replicated_band() {
    let s = &small(1, 7)[0];
    let base = nocol(&s.sar).unwrap();
    let zero = residual_vs_nocol(&base, &s.sar).unwrap();
    assert!(zero.data().iter().all(|&v| v == 0.0));
    let gt = s.gt().unwrap();
    let res = residual_vs_nocol(gt, &s.sar).unwrap();
    for ((r, g), b) in res.data().iter().zip(gt.data()).zip(base.data()) {
        assert_eq!(*r, g - b);
    }
    assert!(residual_vs_nocol(&s.sar, &s.sar).is_err());
}

#[test]
fn sweeps_emit_one_run_per_grid_point() {
    let data = small(3, 8);
    let (train, test) = data.split_at(2);
    let opts = BenchOptions::default();
    let base = Method::Cgan(tiny_gan(1));

    let alpha = sweep(&SweepAxis::Alpha(vec![0.0, 100.0, 210.0, 300.0]), &base, train, test, &opts).unwrap();
    assert_eq!(alpha.axis, "alpha");
    let labels: Vec<_> = alpha.points.iter().map(|p| p.label.as_str()).collect();
    assert_eq!(labels, ["alpha=0", "alpha=100", "alpha=210", "alpha=300"]);
    for p in &alpha.points {
        let rows: Vec<_> = p.run.results.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(rows, ["nocol", p.label.as_str()]);
    }
    assert_eq!(alpha.reports().len(), 4);
    assert_eq!(alpha.curves_tsv().lines().count(), 5);
    let table = alpha.render();
    assert!(table.contains("nocol") && table.contains("alpha=300"));

    let losses = sweep(&SweepAxis::LossTerms(LossTerms::ALL.to_vec()), &base, train, test, &opts).unwrap();
    let labels: Vec<_> = losses.points.iter().map(|p| p.label.as_str()).collect();
    assert_eq!(labels, ["l1-only", "gan-only", "gan+l1"]);
    let json: serde_json::Value = serde_json::from_str(&losses.to_json()).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 3);

    let depth = sweep(&SweepAxis::Depth(vec![5, 6]), &base, train, test, &opts).unwrap();
    assert_eq!(depth.points[1].run.environment["depth=6.depth"], "6");

    assert!(sweep(&SweepAxis::Alpha(vec![]), &base, train, test, &opts).is_err());
    assert!(sweep(&SweepAxis::Bias(vec![true]), &base, train, test, &opts).is_err());
}

#[test]
fn bias_sweep_orders_training_error() {
    let data = small(3, 9);
    let (train, test) = data.split_at(2);
    let r = sweep(&SweepAxis::Bias(vec![false, true]), &Method::lr(), train, test, &BenchOptions::default()).unwrap();
    let loss = |i: usize| {
        let p = &r.points[i];
        p.run.result(&p.label).unwrap().train_loss.unwrap()
    };
    assert!(loss(1) <= loss(0));
    let hidden = sweep(&SweepAxis::Hidden(vec![vec![2], vec![4, 2]]), &Method::nl(&[1]), train, test, &BenchOptions::default()).unwrap();
    assert_eq!(hidden.points[1].label, "hidden=4-2");
}
