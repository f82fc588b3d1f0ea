use rand::Rng;

use super::{Corpus, CorpusFile, FeatureSequence, Segment, TIME_EPS};
use crate::error::{Error, Result};

/// Frame range `[first, last_end)` of `file` lying inside `segment`.
fn frames_within(file: &CorpusFile, segment: &Segment) -> (usize, usize) {
    let fs = &file.features;
    let first = ((segment.start - fs.origin) / fs.frame_step - TIME_EPS).ceil().max(0.0) as usize;
    let last_end = ((segment.end - fs.origin) / fs.frame_step + TIME_EPS).floor().max(0.0) as usize;
    (first, last_end.min(fs.num_frames()))
}

/// Number of frames covering `duration` seconds.
pub fn crop_frames(duration: f64, frame_step: f64) -> Result<usize> {
    let n = (duration / frame_step).round();
    if !(n >= 1.0) {
        return Err(Error::Config(format!(
            "duration {duration}s is shorter than one frame step"
        )));
    }
    Ok(n as usize)
}

struct Candidate<'a> {
    file: &'a CorpusFile,
    first: usize,
    offsets: usize,
}

/// Draws `count` contiguous crops of `round(duration / frame_step)` frames, each
/// inside one annotated turn of `speaker`, uniformly over (turn, offset).
///
/// Crops within one call are distinct when enough offsets exist; otherwise they
/// are drawn with replacement.
pub fn sample_fixed_sequences<R: Rng + ?Sized>(
    corpus: &Corpus,
    speaker: &str,
    duration: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<FeatureSequence>> {
    let mut candidates = Vec::new();
    let mut total = 0usize;
    for file in corpus.files().values() {
        let len = crop_frames(duration, file.features.frame_step)?;
        for turn in file.annotation.entries().iter().filter(|t| t.speaker == speaker) {
            let (first, last_end) = frames_within(file, &turn.segment);
            if last_end >= first + len {
                let offsets = last_end - first - len + 1;
                total += offsets;
                candidates.push(Candidate { file, first, offsets });
            }
        }
    }
    if total == 0 {
        return Err(Error::NoSegmentLongEnough {
            speaker: speaker.to_string(),
            duration,
        });
    }
    let picks: Vec<usize> = if total >= count {
        rand::seq::index::sample(rng, total, count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..total)).collect()
    };
    picks
        .into_iter()
        .map(|mut flat| {
            let c = candidates
                .iter()
                .find(|c| {
                    if flat < c.offsets {
                        true
                    } else {
                        flat -= c.offsets;
                        false
                    }
                })
                .expect("flat index within total");
            let len = crop_frames(duration, c.file.features.frame_step)?;
            c.file.features.slice(c.first + flat, len)
        })
        .collect()
}
