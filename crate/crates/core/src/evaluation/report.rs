use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::metrics::PurityCoveragePoint;
use super::trials::{eer, DetCurve, TrialSet};
use crate::error::{Error, Result};

/// Thresholds print as plain numbers, with `-inf` and `inf` for the sweep
/// sentinels.
pub fn format_threshold(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else if t == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{t}")
    }
}

fn threshold_json(t: f64) -> Value {
    if t.is_finite() {
        json!(t)
    } else {
        json!(format_threshold(t))
    }
}

fn write(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_trials_csv(path: &Path, trials: &TrialSet) -> Result<()> {
    let mut out = String::from("score,label\n");
    for (s, l) in trials.scores().iter().zip(trials.labels()) {
        writeln!(out, "{s},{}", l.as_str()).unwrap();
    }
    write(path, out)
}

pub fn write_det_csv(path: &Path, curve: &DetCurve) -> Result<()> {
    let mut out = String::from("threshold,fpr,fnr\n");
    for k in 0..curve.len() {
        writeln!(out, "{},{},{}", format_threshold(curve.thresholds[k]), curve.fpr[k], curve.fnr[k]).unwrap();
    }
    write(path, out)
}

/// `{eer, num_trials, curve: [[t, fpr, fnr], …]}` plus caller metadata.
pub struct DetReport<'a> {
    pub curve: &'a DetCurve,
    pub num_trials: usize,
    pub meta: Map<String, Value>,
}

impl DetReport<'_> {
    pub fn to_json(&self) -> Value {
        let mut obj = self.meta.clone();
        obj.insert("eer".into(), json!(eer(self.curve)));
        obj.insert("num_trials".into(), json!(self.num_trials));
        let rows: Vec<Value> = (0..self.curve.len())
            .map(|k| {
                json!([
                    threshold_json(self.curve.thresholds[k]),
                    self.curve.fpr[k],
                    self.curve.fnr[k]
                ])
            })
            .collect();
        obj.insert("curve".into(), Value::Array(rows));
        Value::Object(obj)
    }
}

pub fn write_det_json(path: &Path, report: &DetReport<'_>) -> Result<()> {
    write(path, serde_json::to_string_pretty(&report.to_json())? + "\n")
}

pub fn write_purity_coverage_csv(path: &Path, points: &[PurityCoveragePoint]) -> Result<()> {
    let mut out = String::from("threshold,purity,coverage,num_changes\n");
    for p in points {
        writeln!(out, "{},{},{},{}", p.threshold, p.purity, p.coverage, p.num_changes).unwrap();
    }
    write(path, out)
}
