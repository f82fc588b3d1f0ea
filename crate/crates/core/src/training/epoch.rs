use std::collections::BTreeMap;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::loss::{triplet_delta, triplet_loss_grad};
use super::optim::{rmsprop_update, OptimizerState};
use super::{EpochStats, TrainConfig, Triplet, TripletPool};
use crate::error::Result;
use crate::nn::{embed, embed_backward, Gradients, TristouNetParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchStats {
    /// Sum of hinge losses in the batch.
    pub loss: f64,
    pub active: usize,
}

/// Gradient of the batch-mean hinge loss. Each distinct sequence is embedded
/// once; a sequence appearing in several roles accumulates all its
/// contributions before a single backward pass.
pub fn batch_gradient(
    params: &TristouNetParams,
    pool: &TripletPool,
    batch: &[Triplet],
    margin: f64,
) -> Result<(Gradients, BatchStats)> {
    let mut slot_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut order = Vec::new();
    for t in batch {
        for i in [t.anchor, t.positive, t.negative] {
            slot_of.entry(i).or_insert_with(|| {
                order.push(i);
                order.len() - 1
            });
        }
    }
    let forward: Vec<_> = order
        .par_iter()
        .map(|&i| embed(params, pool.sequences[i].view()))
        .collect::<Result<_>>()?;

    let scale = 1.0 / batch.len().max(1) as f64;
    let dim = params.dims.embedding_dim;
    let mut upstream: Vec<Array1<f64>> = vec![Array1::zeros(dim); order.len()];
    let mut stats = BatchStats::default();
    for t in batch {
        let slots = [slot_of[&t.anchor], slot_of[&t.positive], slot_of[&t.negative]];
        let [a, p, n] = slots.map(|s| forward[s].0.view());
        let hinge = (triplet_delta(a, p, n) + margin).max(0.0);
        if hinge > 0.0 {
            stats.loss += hinge;
            stats.active += 1;
            let grads = triplet_loss_grad(a, p, n, margin);
            for (slot, g) in slots.into_iter().zip(grads) {
                upstream[slot].scaled_add(scale, &g);
            }
        }
    }

    let partials: Vec<Option<Gradients>> = forward
        .par_iter()
        .zip(upstream.par_iter())
        .map(|((_, cache), g)| {
            if g.iter().all(|&v| v == 0.0) {
                None
            } else {
                Some(embed_backward(params, cache, g.view()))
            }
        })
        .collect();
    let mut total = params.zeros_like();
    for g in partials.iter().flatten() {
        total.add_assign(g);
    }
    Ok((total, stats))
}

/// One pass over `triplets`: shuffle, then for each batch recompute embeddings
/// with the current parameters, backpropagate the batch-mean loss and take one
/// RMSProp step. `loss` in the returned stats is the summed hinge loss.
pub fn train_epoch<R: Rng + ?Sized>(
    params: &mut TristouNetParams,
    triplets: &[Triplet],
    pool: &TripletPool,
    cfg: &TrainConfig,
    opt: &mut OptimizerState,
    rng: &mut R,
) -> Result<EpochStats> {
    let mut order = triplets.to_vec();
    order.shuffle(rng);
    let mut stats = EpochStats {
        epoch: 0,
        loss: 0.0,
        triplets: triplets.len(),
        active_triplets: 0,
        skipped_pairs: 0,
    };
    for batch in order.chunks(cfg.batch_size) {
        let (grads, b) = batch_gradient(params, pool, batch, cfg.margin)?;
        stats.loss += b.loss;
        stats.active_triplets += b.active;
        rmsprop_update(params, &grads, opt, cfg.learning_rate)?;
    }
    Ok(stats)
}
