use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dataio::{write_patch, Manifest};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_pairs, render_table, EvalSettings, MetricReport};
use crate::models::{colorize, train_cgan, train_cnn, CnnLoss, TrainConfig};
use crate::raster::{PairedSample, RasterPatch};
use crate::regress::{fit_lr, fit_nl, FlatSamples, LmSettings, SpectralModel};

/// A colorization method and everything needed to fit it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method")]
pub enum Method {
    NoCol,
    Lr {
        with_bias: bool,
    },
    Nl {
        hidden: Vec<usize>,
        seed: u64,
        /// Fit on every `stride`-th training pixel.
        stride: usize,
        #[serde(default)]
        lm: LmSettings,
    },
    Cnn(TrainConfig),
    Cgan(TrainConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::NoCol => "nocol",
            Method::Lr { .. } => "lr",
            Method::Nl { .. } => "nl",
            Method::Cnn(_) => "cnn",
            Method::Cgan(_) => "cgan",
        }
    }

    pub fn lr() -> Self {
        Method::Lr { with_bias: true }
    }

    pub fn nl(hidden: &[usize]) -> Self {
        Method::Nl {
            hidden: hidden.to_vec(),
            seed: 0,
            stride: 16,
            lm: LmSettings::default(),
        }
    }
}

/// A fitted method, ready to colorize.
enum Fitted {
    Spectral(SpectralModel),
    Network(Box<crate::models::Checkpoint>),
}

impl Fitted {
    fn apply(&self, sar: &RasterPatch) -> Result<RasterPatch> {
        match self {
            Fitted::Spectral(m) => m.apply(sar),
            Fitted::Network(c) => colorize(c, sar),
        }
    }
}

/// Fit `method` on `train`; returns the model and its final training loss (MSE on the
/// `[0, 2^p]` scale for the spectral fits, the last optimizer-step loss for networks).
fn fit(method: &Method, train: &[PairedSample]) -> Result<(Fitted, Option<f64>)> {
    match method {
        Method::NoCol => Ok((Fitted::Spectral(SpectralModel::NoCol), None)),
        Method::Lr { with_bias } => {
            let data = FlatSamples::from_samples(train)?;
            let m = fit_lr(&data, *with_bias)?;
            let loss = data.mse(|x| m.predict(x));
            Ok((Fitted::Spectral(SpectralModel::Linear(m)), Some(loss)))
        }
        Method::Nl { hidden, seed, stride, lm } => {
            let data = FlatSamples::from_samples(train)?.strided((*stride).max(1));
            let f = fit_nl(&data, hidden, *seed, lm)?;
            let loss = data.mse(|x| f.model.predict(x));
            Ok((Fitted::Spectral(SpectralModel::Mlp(f.model)), Some(loss)))
        }
        Method::Cnn(cfg) => {
            let c = train_cnn(cfg, train)?;
            let loss = c.trace.steps.last().map(|s| s.loss_g);
            Ok((Fitted::Network(Box::new(c)), loss))
        }
        Method::Cgan(cfg) => {
            let c = train_cgan(cfg, train)?;
            let loss = c.trace.steps.last().map(|s| s.loss_l1);
            Ok((Fitted::Network(Box::new(c)), loss))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    /// Row label; the method name unless a sweep names the grid point.
    pub label: String,
    pub method: Method,
    pub train_loss: Option<f64>,
    pub report: MetricReport,
}

/// Reports of several methods over one train/test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub run_id: String,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub settings: EvalSettings,
    /// Conventions and choices in effect, for reading a report on its own.
    pub environment: BTreeMap<String, String>,
    pub results: Vec<MethodResult>,
}

impl BenchRun {
    pub fn result(&self, label: &str) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.label == label)
    }

    pub fn reports(&self) -> Vec<MetricReport> {
        self.results
            .iter()
            .map(|r| MetricReport {
                method: r.label.clone(),
                ..r.report.clone()
            })
            .collect()
    }

    pub fn render(&self) -> String {
        render_table(&self.reports())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("runs serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchOptions {
    pub run_id: String,
    pub settings: EvalSettings,
    /// When set, predictions are written to `<dir>/<label>/<id>.scp`.
    pub pred_dir: Option<PathBuf>,
}

fn environment(methods: &[(String, Method)], settings: &EvalSettings) -> BTreeMap<String, String> {
    let mut env = BTreeMap::new();
    env.insert("q4_block".into(), settings.q4_block.to_string());
    env.insert("std_convention".into(), settings.std_convention.clone());
    for (label, m) in methods {
        match m {
            Method::Cnn(c) => {
                let loss = match c.cnn_loss {
                    CnnLoss::L1 => "l1",
                    CnnLoss::L2 => "l2",
                };
                env.insert(format!("{label}.loss"), loss.into());
                env.insert(format!("{label}.seed"), c.seed.to_string());
            }
            Method::Cgan(c) => {
                env.insert(format!("{label}.seed"), c.seed.to_string());
                env.insert(format!("{label}.depth"), c.gan.depth.to_string());
            }
            Method::Nl { seed, .. } => {
                env.insert(format!("{label}.seed"), seed.to_string());
            }
            _ => {}
        }
    }
    env
}

/// Fit every method on `train`, colorize `test`, and score against the test references.
/// A NoColSAR row is prepended when absent. Failures name the stage and method.
pub fn run_labeled(
    train: &[PairedSample],
    test: &[PairedSample],
    methods: &[(String, Method)],
    options: &BenchOptions,
) -> Result<BenchRun> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test split".into()));
    }
    let mut all = methods.to_vec();
    if !all.iter().any(|(_, m)| *m == Method::NoCol) {
        all.insert(0, ("nocol".into(), Method::NoCol));
    }
    let mut labels: Vec<&str> = all.iter().map(|(l, _)| l.as_str()).collect();
    labels.sort_unstable();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateId(w[0].to_string()));
    }
    let gts = test.iter().map(PairedSample::gt).collect::<Result<Vec<_>>>().map_err(|e| e.in_stage("protocol"))?;

    let mut results = Vec::with_capacity(all.len());
    for (label, method) in &all {
        let (fitted, train_loss) = fit(method, train).map_err(|e| e.in_stage(format!("training {label}")))?;
        let preds = test
            .iter()
            .map(|s| fitted.apply(&s.sar))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage(format!("colorizing {label}")))?;
        if let Some(dir) = &options.pred_dir {
            let dir = dir.join(label);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (s, p) in test.iter().zip(&preds) {
                write_patch(p, dir.join(format!("{}.scp", s.id))).map_err(|e| e.in_stage("writing predictions"))?;
            }
        }
        let pairs = test.iter().zip(&gts).zip(&preds).map(|((s, gt), p)| (s.id.as_str(), *gt, p));
        let report =
            evaluate_pairs(method.name(), pairs, &options.settings).map_err(|e| e.in_stage(format!("evaluating {label}")))?;
        results.push(MethodResult {
            label: label.clone(),
            method: method.clone(),
            train_loss,
            report,
        });
    }
    Ok(BenchRun {
        run_id: options.run_id.clone(),
        train_ids: train.iter().map(|s| s.id.clone()).collect(),
        test_ids: test.iter().map(|s| s.id.clone()).collect(),
        settings: options.settings.clone(),
        environment: environment(&all, &options.settings),
        results,
    })
}

/// [`run_labeled`] with each method labelled by its name.
pub fn run_benchmark(
    train: &[PairedSample],
    test: &[PairedSample],
    methods: &[Method],
    options: &BenchOptions,
) -> Result<BenchRun> {
    let labeled: Vec<(String, Method)> = methods.iter().map(|m| (m.name().to_string(), m.clone())).collect();
    run_labeled(train, test, &labeled, options)
}

/// Load both manifests and run the benchmark.
pub fn run_benchmark_manifests(
    train: &Manifest,
    test: &Manifest,
    methods: &[Method],
    options: &BenchOptions,
) -> Result<BenchRun> {
    let train = train.load_all().map_err(|e| e.in_stage("loading training split"))?;
    let test = test.load_all().map_err(|e| e.in_stage("loading test split"))?;
    run_benchmark(&train, &test, methods, options)
}
