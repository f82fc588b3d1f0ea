use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SynthConfig;
use crate::error::{Error, Result};
use crate::evaluation::Method;
use crate::features::FeatureConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Sequence durations for same/different trials, in seconds.
    pub durations: Vec<f64>,
    /// Sequences drawn per speaker for the trials.
    pub per_speaker: usize,
    pub methods: Vec<Method>,
    pub bic_lambda: f64,
    /// Keep the speakers a model was trained on in its trials.
    pub include_training_speakers: bool,
    pub write_trials: bool,
    pub scd_window: f64,
    pub scd_step: f64,
    /// Half-width of the peak detection neighbourhood, in seconds.
    pub peak_context: f64,
    /// Purity/coverage thresholds; empty means an even grid spanning each
    /// method's curve values.
    pub thresholds: Vec<f64>,
    pub num_auto_thresholds: usize,
    /// Threshold for the per-file change lists; defaults to the midpoint of
    /// the curve value range.
    pub scd_threshold: Option<f64>,
    /// Tolerance when matching detected to reference changes.
    pub change_tolerance: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            durations: vec![2.0],
            per_speaker: 100,
            methods: vec![Method::Embedding, Method::Divergence, Method::Bic],
            bic_lambda: 1.0,
            include_training_speakers: false,
            write_trials: true,
            scd_window: 2.0,
            scd_step: 0.1,
            peak_context: 1.0,
            thresholds: Vec::new(),
            num_auto_thresholds: 50,
            scd_threshold: None,
            change_tolerance: 0.25,
        }
    }
}

/// A whole experiment in one JSON document. The top-level seed overrides the
/// seed of every stochastic component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub features: FeatureConfig,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    /// One model is trained per duration.
    pub train_durations: Vec<f64>,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            features: FeatureConfig::default(),
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            train_durations: vec![0.5, 1.0, 2.0, 5.0],
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies the seed override and pushes the seed into every component.
    pub fn resolve(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.synth.seed = self.seed;
        self.train.seed = self.seed;
        self
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 4, "train": {"epochs": 3}, "eval": {"methods": ["bic"]}}"#).unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.margin, 0.2);
        assert_eq!(cfg.eval.methods, vec![Method::Bic]);
        assert_eq!(cfg.synth, SynthConfig::default());
        let cfg = cfg.resolve(None);
        assert_eq!((cfg.synth.seed, cfg.train.seed), (4, 4));
        assert_eq!(cfg.clone().resolve(Some(9)).train.seed, 9);
    }

    #[test]
    fn unknown_method_is_a_config_error() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"eval": {"methods": ["ivector"]}}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_eq!(a.hash().len(), 64);
        assert_ne!(a.hash(), a.clone().resolve(Some(1)).hash());
    }
}
