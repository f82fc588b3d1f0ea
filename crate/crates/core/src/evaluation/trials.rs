use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Representation, Scorer};
use crate::corpus::FeatureSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Same,
    Different,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Same => "same",
            Label::Different => "different",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    scores: Vec<f64>,
    labels: Vec<Label>,
}

impl TrialSet {
    /// Requires parallel lists, finite scores and both labels present.
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Dimension(format!("{} scores for {} labels", scores.len(), labels.len())));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("non-finite trial score {s}")));
        }
        for needed in [Label::Same, Label::Different] {
            if !labels.contains(&needed) {
                return Err(Error::Config(format!("trial set has no {} trials", needed.as_str())));
            }
        }
        Ok(TrialSet { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Scores every unordered pair `i < j` in row-major order. The label comes
/// from `speakers[i] == speakers[j]`.
pub fn build_trials<T: Sync>(
    items: &[T],
    speakers: &[usize],
    compare: impl Fn(&T, &T) -> Result<f64> + Sync,
) -> Result<TrialSet> {
    if items.len() != speakers.len() {
        return Err(Error::Dimension(format!("{} items for {} speaker ids", items.len(), speakers.len())));
    }
    let rows: Vec<Vec<(f64, Label)>> = (0..items.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..items.len())
                .map(|j| {
                    let label = if speakers[i] == speakers[j] { Label::Same } else { Label::Different };
                    compare(&items[i], &items[j]).map(|s| (s, label))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let (scores, labels) = rows.into_iter().flatten().unzip();
    TrialSet::new(scores, labels)
}

/// Represents every sequence of every group once, then scores all pairs.
pub fn score_groups(scorer: &Scorer, groups: &[Vec<FeatureSequence>]) -> Result<TrialSet> {
    if groups.len() < 2 {
        return Err(Error::Config(format!("trials need at least 2 speakers, got {}", groups.len())));
    }
    let flat: Vec<(usize, &FeatureSequence)> = groups
        .iter()
        .enumerate()
        .flat_map(|(s, g)| g.iter().map(move |seq| (s, seq)))
        .collect();
    let reprs: Vec<Representation> = flat
        .par_iter()
        .map(|(_, seq)| scorer.represent(seq.view()))
        .collect::<Result<_>>()?;
    let speakers: Vec<usize> = flat.iter().map(|(s, _)| *s).collect();
    build_trials(&reprs, &speakers, |a, b| scorer.compare(a, b))
}

/// Error rates over an ascending threshold sweep: `-∞`, each distinct score,
/// `+∞`. A trial is accepted as "same" when its score is `≤ t`, so `fpr` is
/// non-decreasing and `fnr` non-increasing along the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub fnr: Vec<f64>,
}

impl DetCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

pub fn det_curve(trials: &TrialSet) -> DetCurve {
    let mut order: Vec<usize> = (0..trials.len()).collect();
    order.sort_by(|&a, &b| trials.scores[a].total_cmp(&trials.scores[b]));
    let num_same = trials.labels.iter().filter(|&&l| l == Label::Same).count() as f64;
    let num_diff = trials.len() as f64 - num_same;

    let mut curve = DetCurve {
        thresholds: vec![f64::NEG_INFINITY],
        fpr: vec![0.0],
        fnr: vec![1.0],
    };
    let (mut accepted_same, mut accepted_diff) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = trials.scores[order[k]];
        while k < order.len() && trials.scores[order[k]] == t {
            match trials.labels[order[k]] {
                Label::Same => accepted_same += 1,
                Label::Different => accepted_diff += 1,
            }
            k += 1;
        }
        curve.thresholds.push(t);
        curve.fpr.push(accepted_diff as f64 / num_diff);
        curve.fnr.push((num_same - accepted_same as f64) / num_same);
    }
    curve.thresholds.push(f64::INFINITY);
    curve.fpr.push(1.0);
    curve.fnr.push(0.0);
    curve
}

/// Equal error rate, interpolating linearly between the two sweep points
/// where `fnr − fpr` changes sign.
pub fn eer(curve: &DetCurve) -> f64 {
    let gap = |k: usize| curve.fnr[k] - curve.fpr[k];
    let Some(k) = (0..curve.len()).find(|&k| gap(k) <= 0.0) else {
        return curve.fpr.last().copied().unwrap_or(0.0);
    };
    if gap(k) == 0.0 || k == 0 {
        return curve.fpr[k];
    }
    let (g0, g1) = (gap(k - 1), gap(k));
    let s = g0 / (g0 - g1);
    curve.fpr[k - 1] + s * (curve.fpr[k] - curve.fpr[k - 1])
}
