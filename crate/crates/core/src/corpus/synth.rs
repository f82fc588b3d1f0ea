//! Synthetic speakers as AR(1) Gaussian processes in feature space.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Annotation, Corpus, CorpusFile, FeatureSequence, Segment, Turn};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_speakers: usize,
    pub feature_dim: usize,
    /// Std of the per-speaker mean vectors.
    pub mean_scale: f64,
    pub ar_coefficient: f64,
    /// Std of the AR innovation.
    pub noise_scale: f64,
    pub turns_per_file: usize,
    pub num_files: usize,
    /// Turn durations are drawn uniformly from `[min, max)` seconds.
    pub turn_duration_range: (f64, f64),
    pub speaker_prefix: String,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_speakers: 20,
            feature_dim: 35,
            mean_scale: 0.5,
            ar_coefficient: 0.8,
            noise_scale: 0.6,
            turns_per_file: 10,
            num_files: 8,
            turn_duration_range: (5.5, 12.0),
            speaker_prefix: "spk".into(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.num_speakers == 0 {
            return fail("num_speakers must be >= 1");
        }
        if self.feature_dim == 0 {
            return fail("feature_dim must be >= 1");
        }
        if !(self.noise_scale > 0.0) {
            return fail("noise_scale must be > 0");
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return fail("ar_coefficient must lie in [0, 1)");
        }
        if !(self.mean_scale >= 0.0) {
            return fail("mean_scale must be >= 0");
        }
        let (lo, hi) = self.turn_duration_range;
        if !(lo > 0.0 && lo < hi) {
            return fail("turn_duration_range needs 0 < min < max");
        }
        if self.turns_per_file == 0 || self.num_files == 0 {
            return fail("turns_per_file and num_files must be >= 1");
        }
        if self.turns_per_file * self.num_files < self.num_speakers {
            return fail("turns_per_file * num_files must be >= num_speakers");
        }
        Ok(())
    }

    pub fn speaker_name(&self, k: usize) -> String {
        format!("{}{:03}", self.speaker_prefix, k)
    }
}

/// Speaker order over all turns: concatenated shuffled permutations, so every
/// speaker appears and consecutive turns differ whenever there are two or more
/// speakers.
fn turn_speakers(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let total = cfg.turns_per_file * cfg.num_files;
    let mut order = Vec::with_capacity(total);
    while order.len() < total {
        let mut perm: Vec<usize> = (0..cfg.num_speakers).collect();
        perm.shuffle(rng);
        if cfg.num_speakers > 1 && order.last() == Some(&perm[0]) {
            perm.swap(0, 1);
        }
        order.extend(perm);
    }
    order.truncate(total);
    order
}

/// Pure function of `cfg`: the same config yields a bit-identical corpus.
pub fn generate_synthetic_corpus(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let feat = FeatureConfig::default();
    let step = feat.frame_step;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let means: Vec<Array1<f64>> = (0..cfg.num_speakers)
        .map(|_| {
            Array1::from_shape_fn(cfg.feature_dim, |_| {
                cfg.mean_scale * rng.sample::<f64, _>(StandardNormal)
            })
        })
        .collect();
    let speakers = turn_speakers(cfg, &mut rng);
    let a = cfg.ar_coefficient;
    let stationary_std = cfg.noise_scale / (1.0 - a * a).sqrt();
    let (lo, hi) = cfg.turn_duration_range;

    let mut files = BTreeMap::new();
    for (f, chunk) in speakers.chunks(cfg.turns_per_file).enumerate() {
        let uri = format!("synth{f:03}");
        let lengths: Vec<usize> = chunk
            .iter()
            .map(|_| ((rng.random_range(lo..hi)) / step).round().max(1.0) as usize)
            .collect();
        let total: usize = lengths.iter().sum();
        let mut frames = Array2::<f64>::zeros((total, cfg.feature_dim));
        let mut turns = Vec::with_capacity(chunk.len());
        let mut offset = 0usize;
        for (&spk, &len) in chunk.iter().zip(&lengths) {
            let mu = &means[spk];
            let mut dev: Array1<f64> =
                Array1::from_shape_fn(cfg.feature_dim, |_| stationary_std * rng.sample::<f64, _>(StandardNormal));
            for t in 0..len {
                if t > 0 {
                    dev.mapv_inplace(|d| a * d + cfg.noise_scale * rng.sample::<f64, _>(StandardNormal));
                }
                let mut row = frames.row_mut(offset + t);
                row.assign(mu);
                row += &dev;
            }
            turns.push(Turn {
                segment: Segment::new(offset as f64 * step, (offset + len) as f64 * step)?,
                speaker: cfg.speaker_name(spk),
            });
            offset += len;
        }
        let features = FeatureSequence::new(frames, step, feat.frame_duration, 0.0)?;
        let annotation = Annotation::new(uri.clone(), turns)?;
        files.insert(uri, CorpusFile { features, annotation });
    }
    Corpus::new(files)
}
