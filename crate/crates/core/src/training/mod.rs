//! Triplet-loss training: hinge loss over squared embedding distances,
//! per-epoch hard-negative sampling, RMSProp, and the fit loop.

mod epoch;
mod fit;
mod loss;
mod optim;
mod sampler;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{sample_fixed_sequences, Corpus, FeatureSequence};
use crate::error::{Error, Result};
use crate::nn::Dims;

pub use epoch::{batch_gradient, train_epoch, BatchStats};
pub use fit::{epoch_rng, fit, fit_from, load_checkpoint, save_checkpoint, FitResult, TrainingState};
pub use loss::{triplet_delta, triplet_loss, triplet_loss_grad};
pub use optim::{rmsprop_step, rmsprop_update, OptimizerState};
pub use sampler::{sample_epoch_triplets, TripletSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Sequences drawn per speaker each epoch.
    pub per_speaker: usize,
    pub batch_size: usize,
    /// Sequence duration in seconds.
    pub duration: f64,
    pub lstm_units: usize,
    pub dense_units: usize,
    pub embedding_dim: usize,
    pub rho: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 0.2,
            learning_rate: 1e-3,
            epochs: 50,
            per_speaker: 40,
            batch_size: 32,
            duration: 2.0,
            lstm_units: 16,
            dense_units: 16,
            embedding_dim: 16,
            rho: 0.9,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("train: {m}")));
        if !(self.margin >= 0.0) {
            return fail("margin must be >= 0");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be > 0");
        }
        if self.per_speaker < 2 {
            return fail("per_speaker must be >= 2");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        if !(self.duration > 0.0) {
            return fail("duration must be > 0");
        }
        if !(0.0..1.0).contains(&self.rho) || !(self.epsilon >= 0.0) {
            return fail("rho must lie in [0, 1) and epsilon >= 0");
        }
        Ok(())
    }

    pub fn dims(&self, input_dim: usize) -> Dims {
        Dims::new(input_dim, self.lstm_units, self.dense_units, self.embedding_dim)
    }
}

/// Indices into a [`TripletPool`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sum of hinge losses over the epoch's triplets.
    pub loss: f64,
    pub triplets: usize,
    pub active_triplets: usize,
    pub skipped_pairs: usize,
}

/// Sequences grouped by speaker; triplets index into `sequences`.
#[derive(Debug, Clone)]
pub struct TripletPool {
    pub sequences: Vec<FeatureSequence>,
    /// Speaker index of each sequence.
    pub speaker_of: Vec<usize>,
    pub by_speaker: Vec<Vec<usize>>,
}

impl TripletPool {
    /// Rejects speakers holding fewer than `min_per_speaker` sequences.
    pub fn from_groups(groups: Vec<Vec<FeatureSequence>>, min_per_speaker: usize) -> Result<Self> {
        let mut pool = TripletPool {
            sequences: Vec::new(),
            speaker_of: Vec::new(),
            by_speaker: Vec::new(),
        };
        for (s, group) in groups.into_iter().enumerate() {
            if group.len() < min_per_speaker {
                return Err(Error::Config(format!(
                    "speaker #{s} has {} sequences, need {min_per_speaker}",
                    group.len()
                )));
            }
            let mut ids = Vec::with_capacity(group.len());
            for seq in group {
                ids.push(pool.sequences.len());
                pool.speaker_of.push(s);
                pool.sequences.push(seq);
            }
            pool.by_speaker.push(ids);
        }
        Ok(pool)
    }

    /// `per_speaker` fixed-duration crops for every corpus speaker, in sorted
    /// speaker order.
    pub fn sample<R: Rng + ?Sized>(corpus: &Corpus, duration: f64, per_speaker: usize, rng: &mut R) -> Result<Self> {
        let groups = corpus
            .speakers()
            .iter()
            .map(|spk| sample_fixed_sequences(corpus, spk, duration, per_speaker, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_groups(groups, per_speaker)
    }

    pub fn num_speakers(&self) -> usize {
        self.by_speaker.len()
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}
