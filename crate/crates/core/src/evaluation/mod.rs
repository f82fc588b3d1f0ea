//! Same/different speaker trials scored by EER, and sliding-window speaker
//! change detection scored by purity and coverage. Every scorer follows the
//! distance convention: smaller means more likely the same speaker.

mod metrics;
mod report;
mod scd;
mod trials;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::baselines::{bic_from_stats, gaussian_divergence, gaussian_stats, CovarianceMode, GaussianStats};
use crate::error::{Error, Result};
use crate::nn::{embed_vector, TristouNetParams};

pub use metrics::{
    change_recall, changes_to_segments, coverage, coverage_parts, purity, purity_coverage_curve, segment_coverage,
    PurityCoveragePoint, ScdFile,
};
pub use report::{
    format_threshold, write_det_csv, write_det_json, write_purity_coverage_csv, write_trials_csv, DetReport,
};
pub use scd::{detect_peaks, scd_distance_curve, DistanceCurve};
pub use trials::{build_trials, det_curve, eer, score_groups, DetCurve, Label, TrialSet};

/// Scorer names accepted on the command line.
pub const METHODS: [&str; 3] = ["embedding", "divergence", "bic"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Embedding,
    Divergence,
    Bic,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Embedding => "embedding",
            Method::Divergence => "divergence",
            Method::Bic => "bic",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(Method::Embedding),
            "divergence" => Ok(Method::Divergence),
            "bic" => Ok(Method::Bic),
            other => Err(Error::Config(format!(
                "unknown method {other:?}, expected one of: {}",
                METHODS.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Scorer {
    /// Euclidean distance between embeddings.
    Embedding(Box<TristouNetParams>),
    Divergence,
    Bic { lambda: f64 },
}

/// What a scorer keeps of one sequence, so that each sequence is summarised
/// once and then compared many times.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Embedding(Array1<f64>),
    Stats(GaussianStats),
}

impl Scorer {
    pub fn method(&self) -> Method {
        match self {
            Scorer::Embedding(_) => Method::Embedding,
            Scorer::Divergence => Method::Divergence,
            Scorer::Bic { .. } => Method::Bic,
        }
    }

    pub fn represent(&self, x: ArrayView2<f64>) -> Result<Representation> {
        match self {
            Scorer::Embedding(p) => embed_vector(p, x).map(Representation::Embedding),
            Scorer::Divergence => gaussian_stats(x, CovarianceMode::Diag).map(Representation::Stats),
            Scorer::Bic { .. } => gaussian_stats(x, CovarianceMode::Full).map(Representation::Stats),
        }
    }

    pub fn compare(&self, a: &Representation, b: &Representation) -> Result<f64> {
        match (self, a, b) {
            (Scorer::Embedding(_), Representation::Embedding(a), Representation::Embedding(b)) => {
                Ok((a - b).mapv(|v| v * v).sum().sqrt())
            }
            (Scorer::Divergence, Representation::Stats(a), Representation::Stats(b)) => gaussian_divergence(a, b),
            (Scorer::Bic { lambda }, Representation::Stats(a), Representation::Stats(b)) => {
                bic_from_stats(a, b, *lambda)
            }
            _ => Err(Error::Config(format!(
                "representation does not match the {} scorer",
                self.method().name()
            ))),
        }
    }

    pub fn score(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
        self.compare(&self.represent(x)?, &self.represent(y)?)
    }
}
