use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{nrmse, q4, r2_patch, sam, DEFAULT_Q4_BLOCK};
use crate::dataio::{read_patch, Manifest};
use crate::error::{Error, Result};
use crate::raster::RasterPatch;
use crate::stats::MeanStd;

/// Conventions a report was computed under; serialized with every report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub q4_block: usize,
    pub q4_stride: usize,
    pub std_convention: String,
    pub sam_zero_vectors: String,
    pub r2_axes: String,
}

impl EvalSettings {
    pub fn with_block(q4_block: usize) -> Self {
        EvalSettings {
            q4_block,
            q4_stride: q4_block,
            std_convention: "population".into(),
            sam_zero_vectors: "excluded".into(),
            r2_axes: "x=reference, y=prediction, all bands flattened".into(),
        }
    }
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings::with_block(DEFAULT_Q4_BLOCK)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchMetrics {
    pub id: String,
    pub q4: f64,
    pub nrmse: f64,
    pub sam_deg: f64,
    pub r2: f64,
    pub sam_excluded: usize,
    pub q4_blocks: usize,
}

impl PatchMetrics {
    pub fn compute(id: impl Into<String>, gt: &RasterPatch, pred: &RasterPatch, settings: &EvalSettings) -> Result<Self> {
        let s = sam(gt, pred)?;
        let q = q4(gt, pred, settings.q4_block)?;
        Ok(PatchMetrics {
            id: id.into(),
            q4: q.value,
            nrmse: nrmse(gt, pred)?,
            sam_deg: s.degrees,
            r2: r2_patch(gt, pred)?,
            sam_excluded: s.excluded,
            q4_blocks: q.blocks_used,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub q4: MeanStd,
    pub nrmse: MeanStd,
    pub sam_deg: MeanStd,
    pub r2: MeanStd,
}

impl MetricAggregate {
    pub fn of(per_patch: &[PatchMetrics]) -> Self {
        let col = |f: fn(&PatchMetrics) -> f64| MeanStd::of(&per_patch.iter().map(f).collect::<Vec<_>>());
        MetricAggregate {
            q4: col(|p| p.q4),
            nrmse: col(|p| p.nrmse),
            sam_deg: col(|p| p.sam_deg),
            r2: col(|p| p.r2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub settings: EvalSettings,
    /// Sorted by id, so the report does not depend on manifest order.
    pub per_patch: Vec<PatchMetrics>,
    pub aggregate: MetricAggregate,
}

impl MetricReport {
    pub fn from_patches(method: impl Into<String>, settings: EvalSettings, mut per_patch: Vec<PatchMetrics>) -> Result<Self> {
        per_patch.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = per_patch.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId(w[0].id.clone()));
        }
        let aggregate = MetricAggregate::of(&per_patch);
        Ok(MetricReport {
            method: method.into(),
            settings,
            per_patch,
            aggregate,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Score `(id, reference, prediction)` triples.
pub fn evaluate_pairs<'a, I>(method: &str, pairs: I, settings: &EvalSettings) -> Result<MetricReport>
where
    I: IntoIterator<Item = (&'a str, &'a RasterPatch, &'a RasterPatch)>,
{
    let per_patch = pairs
        .into_iter()
        .map(|(id, gt, pred)| PatchMetrics::compute(id, gt, pred, settings))
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_patches(method, settings.clone(), per_patch)
}

/// Score predictions stored as `<pred_dir>/<id>.scp` against the manifest's references.
pub fn evaluate_method(manifest: &Manifest, pred_dir: &Path, method: &str, settings: &EvalSettings) -> Result<MetricReport> {
    let mut per_patch = Vec::with_capacity(manifest.len());
    for entry in &manifest.entries {
        let gt_rel = entry.gt.as_ref().ok_or_else(|| Error::MissingGroundTruth(entry.id.clone()))?;
        let gt = read_patch(manifest.resolve(gt_rel))?;
        let pred_path = pred_dir.join(format!("{}.scp", entry.id));
        if !pred_path.is_file() {
            return Err(Error::MissingPrediction(entry.id.clone()));
        }
        let pred = read_patch(&pred_path)?;
        per_patch.push(PatchMetrics::compute(&entry.id, &gt, &pred, settings)?);
    }
    MetricReport::from_patches(method, settings.clone(), per_patch)
}

/// Aligned `mean±std` table, one row per report.
pub fn render_table(reports: &[MetricReport]) -> String {
    let header = ["Method", "Q4", "NRMSE", "SAM (deg)", "R2"];
    let mut rows: Vec<[String; 5]> = vec![header.map(String::from)];
    for r in reports {
        let a = &r.aggregate;
        rows.push([
            r.method.clone(),
            a.q4.to_string(),
            a.nrmse.to_string(),
            a.sam_deg.to_string(),
            a.r2.to_string(),
        ]);
    }
    rows.push(["ideal value".into(), "1".into(), "0".into(), "0".into(), "1".into()]);
    let mut widths = [0usize; 5];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        if i == 0 {
            writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))).unwrap();
        }
    }
    if let Some(first) = reports.first() {
        let mut notes = BTreeMap::new();
        notes.insert("q4 block", first.settings.q4_block.to_string());
        notes.insert("std", first.settings.std_convention.clone());
        let notes: Vec<String> = notes.into_iter().map(|(k, v)| format!("{k}: {v}")).collect();
        writeln!(out, "({})", notes.join(", ")).unwrap();
    }
    out
}
