use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Representation, Scorer};
use crate::corpus::{FeatureSequence, TIME_EPS};
use crate::error::{Error, Result};

/// Left/right window distance sampled at window centres.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DistanceCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DistanceCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// For every centre `t = origin + window + k·step` that leaves a full window
/// on both sides, scores `[t − window, t)` against `[t, t + window)`. Each
/// distinct window is represented once. Files shorter than two windows give
/// an empty curve.
pub fn scd_distance_curve(features: &FeatureSequence, scorer: &Scorer, window: f64, step: f64) -> Result<DistanceCurve> {
    if !(window > 0.0) || !(step > 0.0) {
        return Err(Error::Config(format!("window {window} and step {step} must be positive")));
    }
    let fs = features.frame_step;
    let win = (window / fs).round() as usize;
    if win == 0 {
        return Err(Error::Config(format!("window {window}s is shorter than one frame")));
    }
    let duration = features.num_frames() as f64 * fs;
    if duration + TIME_EPS < 2.0 * window {
        return Ok(DistanceCurve::default());
    }
    let count = ((duration - 2.0 * window) / step + TIME_EPS).floor() as usize + 1;
    let centres: Vec<(f64, usize)> = (0..count)
        .map(|k| {
            let offset = window + k as f64 * step;
            (features.origin + offset, (offset / fs).round() as usize)
        })
        .filter(|&(_, c)| c >= win && c + win <= features.num_frames())
        .collect();

    let mut starts: Vec<usize> = centres.iter().flat_map(|&(_, c)| [c - win, c]).collect();
    starts.sort_unstable();
    starts.dedup();
    let reprs: Vec<Representation> = starts
        .par_iter()
        .map(|&s| scorer.represent(features.slice(s, win)?.view()))
        .collect::<Result<_>>()?;
    let cache: BTreeMap<usize, &Representation> = starts.iter().copied().zip(&reprs).collect();

    let values = centres
        .iter()
        .map(|&(_, c)| scorer.compare(cache[&(c - win)], cache[&c]))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceCurve {
        times: centres.iter().map(|&(t, _)| t).collect(),
        values,
    })
}

/// Times whose value reaches `threshold` and beats every other value within
/// `±context` seconds. Among equal values the earliest wins.
pub fn detect_peaks(curve: &DistanceCurve, context: f64, threshold: f64) -> Vec<f64> {
    let (t, v) = (&curve.times, &curve.values);
    let mut peaks = Vec::new();
    let mut lo = 0;
    for i in 0..t.len() {
        if v[i] < threshold {
            continue;
        }
        while t[i] - t[lo] > context + TIME_EPS {
            lo += 1;
        }
        let mut is_peak = true;
        let mut j = lo;
        while j < t.len() && t[j] - t[i] <= context + TIME_EPS {
            let beaten = v[j] > v[i] || (v[j] == v[i] && j < i);
            if j != i && beaten {
                is_peak = false;
                break;
            }
            j += 1;
        }
        if is_peak {
            peaks.push(t[i]);
        }
    }
    peaks
}
