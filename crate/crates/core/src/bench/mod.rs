//! End-to-end benchmark: reference synthesis, fitting, colorization and scoring of several
//! methods on one split, ablation sweeps, scatter exports and residual maps.

mod desk;
mod run;
mod sweep;
mod synth;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{ols, LineFit};
use crate::raster::RasterPatch;
use crate::regress::nocol;

pub use desk::{desk_ablation_config, desk_cgan_config, desk_cnn_config, desk_methods, DESK_STEPS};
pub use run::{run_benchmark, run_benchmark_manifests, run_labeled, BenchOptions, BenchRun, Method, MethodResult};
pub use sweep::{sweep, LossTerms, SweepAxis, SweepPoint, SweepReport};
pub use synth::{synth_dataset, synth_sample, write_dataset, SynthConfig};

/// Flattened (reference, prediction) values of one test case and their fitted line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterCase {
    pub id: String,
    pub reference: Vec<f32>,
    pub prediction: Vec<f32>,
    pub fit: LineFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterExport {
    pub method: String,
    pub cases: Vec<ScatterCase>,
}

impl ScatterExport {
    /// `id,reference,prediction` rows.
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("id,reference,prediction\n");
        for c in &self.cases {
            for (x, y) in c.reference.iter().zip(&c.prediction) {
                writeln!(out, "{},{x},{y}", c.id).unwrap();
            }
        }
        out
    }

    /// `id,slope,intercept,r2` rows.
    pub fn fits_csv(&self) -> String {
        let mut out = String::from("id,slope,intercept,r2\n");
        for c in &self.cases {
            writeln!(out, "{},{},{},{}", c.id, c.fit.slope, c.fit.intercept, c.fit.r2).unwrap();
        }
        out
    }
}

/// Flatten each matched pair, all bands pooled, and fit `prediction ~ reference`.
pub fn export_scatter<'a, I>(method: &str, pairs: I) -> Result<ScatterExport>
where
    I: IntoIterator<Item = (&'a str, &'a RasterPatch, &'a RasterPatch)>,
{
    let mut cases = Vec::new();
    for (id, gt, pred) in pairs {
        gt.expect_same_dims(pred, id)?;
        if gt.channels() != pred.channels() {
            return Err(Error::ChannelCount {
                what: "scatter prediction",
                expected: gt.channels(),
                got: pred.channels(),
            });
        }
        let x: Vec<f64> = gt.data().iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = pred.data().iter().map(|&v| v as f64).collect();
        cases.push(ScatterCase {
            id: id.to_string(),
            reference: gt.data().to_vec(),
            prediction: pred.data().to_vec(),
            fit: ols(&x, &y)?,
        });
    }
    if cases.is_empty() {
        return Err(Error::InvalidInput("scatter export needs at least one pair".into()));
    }
    Ok(ScatterExport {
        method: method.to_string(),
        cases,
    })
}

/// `pred − nocol(sar)`: the color a method introduced on top of the replicated SAR band.
pub fn residual_vs_nocol(pred: &RasterPatch, sar: &RasterPatch) -> Result<RasterPatch> {
    let base = nocol(sar)?;
    pred.expect_same_dims(&base, "residual")?;
    pred.expect_channels("residual prediction", 3)?;
    let data = pred.data().iter().zip(base.data()).map(|(p, b)| p - b).collect();
    RasterPatch::new(pred.height(), pred.width(), 3, pred.bit_depth(), data)
}
