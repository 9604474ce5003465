use serde::{Deserialize, Serialize};

use super::run::{run_labeled, BenchOptions, BenchRun, Method};
use crate::error::{Error, Result};
use crate::metrics::{render_table, MetricReport};
use crate::models::CnnSpec;
use crate::raster::PairedSample;

/// Which loss terms the generator is trained with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossTerms {
    L1Only,
    GanOnly,
    Both,
}

impl LossTerms {
    pub const ALL: [LossTerms; 3] = [LossTerms::L1Only, LossTerms::GanOnly, LossTerms::Both];

    pub fn label(self) -> &'static str {
        match self {
            LossTerms::L1Only => "l1-only",
            LossTerms::GanOnly => "gan-only",
            LossTerms::Both => "gan+l1",
        }
    }
}

/// One ablation axis and its grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "axis", content = "grid")]
pub enum SweepAxis {
    Alpha(Vec<f64>),
    Depth(Vec<usize>),
    LossTerms(Vec<LossTerms>),
    Hidden(Vec<Vec<usize>>),
    Kernel(Vec<CnnSpec>),
    Bias(Vec<bool>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Alpha(_) => "alpha",
            SweepAxis::Depth(_) => "depth",
            SweepAxis::LossTerms(_) => "loss-terms",
            SweepAxis::Hidden(_) => "hidden",
            SweepAxis::Kernel(_) => "kernel",
            SweepAxis::Bias(_) => "bias",
        }
    }

    fn len(&self) -> usize {
        match self {
            SweepAxis::Alpha(g) => g.len(),
            SweepAxis::Depth(g) => g.len(),
            SweepAxis::LossTerms(g) => g.len(),
            SweepAxis::Hidden(g) => g.len(),
            SweepAxis::Kernel(g) => g.len(),
            SweepAxis::Bias(g) => g.len(),
        }
    }

    /// Grid point `i` applied to `base`, with its label.
    fn point(&self, i: usize, base: &Method) -> Result<(String, Method)> {
        let mismatch = || Error::InvalidInput(format!("sweep axis {} does not apply to method {}", self.name(), base.name()));
        Ok(match (self, base) {
            (SweepAxis::Alpha(g), Method::Cgan(c)) => {
                let mut c = c.clone();
                c.alpha = g[i];
                (format!("alpha={}", g[i]), Method::Cgan(c))
            }
            (SweepAxis::Depth(g), Method::Cgan(c)) => {
                let mut c = c.clone();
                c.gan.depth = g[i];
                (format!("depth={}", g[i]), Method::Cgan(c))
            }
            (SweepAxis::LossTerms(g), Method::Cgan(c)) => {
                let mut c = c.clone();
                c.use_gan_loss = g[i] != LossTerms::L1Only;
                c.use_l1_loss = g[i] != LossTerms::GanOnly;
                (g[i].label().to_string(), Method::Cgan(c))
            }
            (SweepAxis::Hidden(g), Method::Nl { seed, stride, lm, .. }) => {
                let label = g[i].iter().map(usize::to_string).collect::<Vec<_>>().join("-");
                (
                    format!("hidden={label}"),
                    Method::Nl {
                        hidden: g[i].clone(),
                        seed: *seed,
                        stride: *stride,
                        lm: *lm,
                    },
                )
            }
            (SweepAxis::Kernel(g), Method::Cnn(c)) => {
                let mut c = c.clone();
                c.cnn = g[i].clone();
                (g[i].label(), Method::Cnn(c))
            }
            (SweepAxis::Bias(g), Method::Lr { .. }) => (
                format!("bias={}", if g[i] { "on" } else { "off" }),
                Method::Lr { with_bias: g[i] },
            ),
            _ => return Err(mismatch()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub run: BenchRun,
}

/// All grid points of one axis over shared data and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: String,
    pub method: String,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// The swept method's report at each grid point, labelled by the point.
    pub fn reports(&self) -> Vec<MetricReport> {
        self.points
            .iter()
            .filter_map(|p| {
                p.run.result(&p.label).map(|r| MetricReport {
                    method: p.label.clone(),
                    ..r.report.clone()
                })
            })
            .collect()
    }

    /// One table: the NoColSAR reference row, then one row per grid point.
    pub fn render(&self) -> String {
        let mut reports = Vec::new();
        if let Some(nocol) = self.points.first().and_then(|p| p.run.result("nocol")) {
            reports.push(nocol.report.clone());
        }
        reports.extend(self.reports());
        format!("sweep over {} ({})\n{}", self.axis, self.method, render_table(&reports))
    }

    /// Tab-separated `label, q4, nrmse, sam` means, one line per grid point.
    pub fn curves_tsv(&self) -> String {
        let mut out = String::from("label\tq4\tnrmse\tsam_deg\ttrain_loss\n");
        for p in &self.points {
            if let Some(r) = p.run.result(&p.label) {
                let a = &r.report.aggregate;
                let loss = r.train_loss.map(|l| l.to_string()).unwrap_or_default();
                out.push_str(&format!("{}\t{}\t{}\t{}\t{loss}\n", p.label, a.q4.mean, a.nrmse.mean, a.sam_deg.mean));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweeps serialize")
    }
}

/// One benchmark run per grid point of `axis` applied to `base`; every run sees the same
/// data, seeds and evaluation settings.
pub fn sweep(
    axis: &SweepAxis,
    base: &Method,
    train: &[PairedSample],
    test: &[PairedSample],
    options: &BenchOptions,
) -> Result<SweepReport> {
    if axis.len() == 0 {
        return Err(Error::InvalidInput(format!("empty grid for sweep axis {}", axis.name())));
    }
    let points = (0..axis.len())
        .map(|i| axis.point(i, base))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(points.len());
    for (label, method) in points {
        let opts = BenchOptions {
            run_id: format!("{}/{label}", options.run_id),
            pred_dir: options.pred_dir.as_ref().map(|d| d.join(&label)),
            ..options.clone()
        };
        let run = run_labeled(train, test, &[(label.clone(), method)], &opts)?;
        out.push(SweepPoint { label, run });
    }
    Ok(SweepReport {
        axis: axis.name().to_string(),
        method: base.name().to_string(),
        points: out,
    })
}
