use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;

use super::loss::triplet_delta;
use super::{TrainConfig, Triplet, TripletPool};
use crate::error::{Error, Result};
use crate::nn::{embed_vector, TristouNetParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TripletSample {
    pub triplets: Vec<Triplet>,
    /// Anchor-positive pairs for which no negative violated the margin.
    pub skipped_pairs: usize,
    /// `N·n(n−1)/2`.
    pub total_pairs: usize,
}

/// Hard-negative sampling. Takes `n = cfg.per_speaker` sequences per speaker
/// (all of them when a speaker holds exactly `n`), embeds them once with
/// `params`, enumerates every same-speaker pair and, for each, draws negatives
/// uniformly without replacement until one satisfies `Δ + α > 0`. Pairs with no
/// such negative are skipped.
pub fn sample_epoch_triplets<R: Rng + ?Sized>(
    pool: &TripletPool,
    params: &TristouNetParams,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TripletSample> {
    let n = cfg.per_speaker;
    if pool.num_speakers() < 2 {
        return Err(Error::Config(format!(
            "triplet sampling needs at least 2 speakers, pool has {}",
            pool.num_speakers()
        )));
    }
    let chosen: Vec<Vec<usize>> = pool
        .by_speaker
        .iter()
        .enumerate()
        .map(|(s, ids)| {
            if ids.len() < n {
                Err(Error::Config(format!("speaker #{s} has {} sequences, need {n}", ids.len())))
            } else if ids.len() == n {
                Ok(ids.clone())
            } else {
                let mut pick = rand::seq::index::sample(rng, ids.len(), n).into_vec();
                pick.sort_unstable();
                Ok(pick.into_iter().map(|i| ids[i]).collect())
            }
        })
        .collect::<Result<_>>()?;

    let flat: Vec<usize> = chosen.iter().flatten().copied().collect();
    let embedded: Vec<Array1<f64>> = flat
        .par_iter()
        .map(|&i| embed_vector(params, pool.sequences[i].view()))
        .collect::<Result<_>>()?;
    let mut embedding_of: Vec<Option<&Array1<f64>>> = vec![None; pool.len()];
    for (&i, e) in flat.iter().zip(&embedded) {
        embedding_of[i] = Some(e);
    }
    let emb = |i: usize| embedding_of[i].expect("chosen sequence").view();

    let mut triplets = Vec::new();
    let mut skipped = 0usize;
    let mut total = 0usize;
    for (s, ids) in chosen.iter().enumerate() {
        let mut negatives: Vec<usize> = chosen
            .iter()
            .enumerate()
            .filter(|&(o, _)| o != s)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        for (a_pos, &anchor) in ids.iter().enumerate() {
            for &positive in &ids[a_pos + 1..] {
                total += 1;
                let mut found = None;
                // partial Fisher-Yates: uniform draws without replacement
                for k in 0..negatives.len() {
                    let j = rng.random_range(k..negatives.len());
                    negatives.swap(k, j);
                    let negative = negatives[k];
                    if triplet_delta(emb(anchor), emb(positive), emb(negative)) + cfg.margin > 0.0 {
                        found = Some(negative);
                        break;
                    }
                }
                match found {
                    Some(negative) => triplets.push(Triplet {
                        anchor,
                        positive,
                        negative,
                    }),
                    None => skipped += 1,
                }
            }
        }
    }
    Ok(TripletSample {
        triplets,
        skipped_pairs: skipped,
        total_pairs: total,
    })
}
