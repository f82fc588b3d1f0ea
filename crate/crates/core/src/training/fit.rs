use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::epoch::train_epoch;
use super::optim::OptimizerState;
use super::sampler::sample_epoch_triplets;
use super::{EpochStats, TrainConfig, TripletPool};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::nn::{init_params, read_model_file, write_model_file, TristouNetParams};

/// Generator for epoch `epoch`; stream 0 is reserved for initialization.
/// Keeping one stream per epoch makes resumed runs identical to
/// uninterrupted ones.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState {
    pub params: TristouNetParams,
    pub optimizer: OptimizerState,
    /// Index of the next epoch to run.
    pub next_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: TristouNetParams,
    pub stats: Vec<EpochStats>,
}

pub fn fit(corpus: &Corpus, cfg: &TrainConfig) -> Result<FitResult> {
    fit_from(corpus, cfg, None, |_, _| Ok(()))
}

/// Runs epochs `start..cfg.epochs`, where `start` comes from `resume` (or 0).
/// Each epoch draws fresh sequences, samples triplets with the epoch-start
/// parameters, then trains. `on_epoch` sees every epoch's stats and the state
/// after it.
pub fn fit_from(
    corpus: &Corpus,
    cfg: &TrainConfig,
    resume: Option<TrainingState>,
    mut on_epoch: impl FnMut(&EpochStats, &TrainingState) -> Result<()>,
) -> Result<FitResult> {
    cfg.validate()?;
    if corpus.speakers().len() < 2 {
        return Err(Error::Config(format!(
            "training needs at least 2 speakers, corpus has {}",
            corpus.speakers().len()
        )));
    }
    let input_dim = corpus.feature_dim().ok_or(Error::Empty("corpus"))?;
    let mut state = match resume {
        Some(state) => {
            state.params.check_input_dim(input_dim)?;
            state
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let params = init_params(cfg.dims(input_dim), &mut rng)?;
            let optimizer = OptimizerState::new(&params, cfg.rho, cfg.epsilon);
            TrainingState {
                params,
                optimizer,
                next_epoch: 0,
            }
        }
    };
    let mut history = Vec::new();
    while state.next_epoch < cfg.epochs {
        let epoch = state.next_epoch;
        let mut rng = epoch_rng(cfg.seed, epoch);
        let pool = TripletPool::sample(corpus, cfg.duration, cfg.per_speaker, &mut rng)?;
        let sample = sample_epoch_triplets(&pool, &state.params, cfg, &mut rng)?;
        let mut stats = train_epoch(
            &mut state.params,
            &sample.triplets,
            &pool,
            cfg,
            &mut state.optimizer,
            &mut rng,
        )?;
        stats.epoch = epoch + 1;
        stats.skipped_pairs = sample.skipped_pairs;
        state.next_epoch += 1;
        on_epoch(&stats, &state)?;
        history.push(stats);
    }
    Ok(FitResult {
        params: state.params,
        stats: history,
    })
}

const OPT_PREFIX: &str = "rmsprop.";

/// Model file carrying the optimizer accumulators as extra tensors and the
/// epoch counter in the header.
pub fn save_checkpoint(path: &Path, state: &TrainingState) -> Result<()> {
    let params = state.params.tensors();
    let accum = state.optimizer.mean_square.tensors();
    let tensors = params
        .into_iter()
        .map(|(n, s, d)| (n.to_string(), s, d))
        .chain(accum.into_iter().map(|(n, s, d)| (format!("{OPT_PREFIX}{n}"), s, d)));
    let extra = serde_json::json!({
        "next_epoch": state.next_epoch,
        "optimizer_steps": state.optimizer.steps,
        "rho": state.optimizer.rho,
        "epsilon": state.optimizer.epsilon,
    });
    write_model_file(path, state.params.dims, tensors, extra)
}

pub fn load_checkpoint(path: &Path) -> Result<TrainingState> {
    let file = read_model_file(path)?;
    let params = crate::nn::params_from_file(&file)?;
    let field = |k: &str| {
        file.header
            .extra
            .get(k)
            .cloned()
            .ok_or_else(|| Error::ModelFormat(format!("checkpoint lacks {k}")))
    };
    let next_epoch: usize = serde_json::from_value(field("next_epoch")?)?;
    let steps: u64 = serde_json::from_value(field("optimizer_steps")?)?;
    let rho: f64 = serde_json::from_value(field("rho")?)?;
    let epsilon: f64 = serde_json::from_value(field("epsilon")?)?;
    let mut optimizer = OptimizerState::new(&params, rho, epsilon);
    optimizer.steps = steps;
    for (name, dst) in optimizer.mean_square.tensors_mut() {
        let key = format!("{OPT_PREFIX}{name}");
        let (entry, src) = file
            .tensor(&key)
            .ok_or_else(|| Error::ModelFormat(format!("checkpoint lacks {key}")))?;
        if entry.len != dst.len() {
            return Err(Error::ModelFormat(format!("{key} has {} values, need {}", entry.len, dst.len())));
        }
        dst.copy_from_slice(src);
    }
    Ok(TrainingState {
        params,
        optimizer,
        next_epoch,
    })
}
