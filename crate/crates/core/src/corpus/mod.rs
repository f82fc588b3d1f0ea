//! Audio and annotation ingestion, synthetic corpora, and fixed-duration
//! sequence sampling.

mod annotation;
mod audio;
mod sampling;
mod store;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

pub use annotation::{
    load_annotation, load_annotations, parse_annotations, save_annotations, write_annotations,
};
pub use audio::{load_wav, AudioSignal, REQUIRED_SAMPLE_RATE};
pub use sampling::{crop_frames, sample_fixed_sequences};
pub use store::{
    load_corpus_dir, read_feature_blob, save_corpus_dir, write_feature_blob, CorpusManifest,
    FeatureSidecar,
};
pub use synth::{generate_synthetic_corpus, SynthConfig};

/// Slack used when comparing segment boundaries against the frame grid.
pub(crate) const TIME_EPS: f64 = 1e-6;

/// A time interval in seconds, `0 <= start < end`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 || start >= end {
            return Err(Error::Config(format!(
                "invalid segment [{start}, {end}]: need 0 <= start < end"
            )));
        }
        Ok(Segment { start, end })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Length of the intersection with `other` (0 when disjoint).
    pub fn overlap(&self, other: &Segment) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }

    pub fn contains(&self, other: &Segment) -> bool {
        other.start >= self.start - TIME_EPS && other.end <= self.end + TIME_EPS
    }
}

/// One labeled reference speech turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub segment: Segment,
    pub speaker: String,
}

/// Reference speech turns of one file, sorted by start and non-overlapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub uri: String,
    entries: Vec<Turn>,
}

impl Annotation {
    /// Sorts `entries` by start time and rejects overlapping turns.
    pub fn new(uri: impl Into<String>, mut entries: Vec<Turn>) -> Result<Self> {
        let uri = uri.into();
        entries.sort_by(|a, b| {
            a.segment
                .start
                .total_cmp(&b.segment.start)
                .then(a.segment.end.total_cmp(&b.segment.end))
        });
        for pair in entries.windows(2) {
            let (a, b) = (&pair[0].segment, &pair[1].segment);
            if b.start < a.end {
                return Err(Error::OverlappingSegments {
                    uri,
                    a_start: a.start,
                    a_end: a.end,
                    b_start: b.start,
                    b_end: b.end,
                });
            }
        }
        Ok(Annotation { uri, entries })
    }

    pub fn entries(&self) -> &[Turn] {
        &self.entries
    }

    pub fn segments(&self) -> Vec<Segment> {
        self.entries.iter().map(|t| t.segment).collect()
    }

    pub fn speakers(&self) -> BTreeSet<String> {
        self.entries.iter().map(|t| t.speaker.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Times at which the speaker label differs between consecutive turns.
    pub fn change_points(&self) -> Vec<f64> {
        self.entries
            .windows(2)
            .filter(|w| w[0].speaker != w[1].speaker)
            .map(|w| w[1].segment.start)
            .collect()
    }
}

/// T×F acoustic frames with timing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub frames: Array2<f64>,
    /// Seconds between consecutive frame starts.
    pub frame_step: f64,
    /// Analysis window length in seconds.
    pub frame_duration: f64,
    /// Absolute start time of frame 0 in the source file.
    pub origin: f64,
}

impl FeatureSequence {
    pub fn new(frames: Array2<f64>, frame_step: f64, frame_duration: f64, origin: f64) -> Result<Self> {
        if frames.nrows() == 0 {
            return Err(Error::Empty("feature sequence"));
        }
        if !(frame_step > 0.0) {
            return Err(Error::Config(format!("frame_step must be > 0, got {frame_step}")));
        }
        Ok(FeatureSequence {
            frames,
            frame_step,
            frame_duration,
            origin,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    /// `[origin, origin + T * frame_step]`.
    pub fn extent(&self) -> Segment {
        Segment {
            start: self.origin,
            end: self.origin + self.num_frames() as f64 * self.frame_step,
        }
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.frames.view()
    }

    /// Frames `[start, start + len)` as a new sequence with its own origin.
    pub fn slice(&self, start: usize, len: usize) -> Result<FeatureSequence> {
        if len == 0 || start + len > self.num_frames() {
            return Err(Error::Dimension(format!(
                "slice [{start}, {}) outside {} frames",
                start + len,
                self.num_frames()
            )));
        }
        Ok(FeatureSequence {
            frames: self.frames.slice(s![start..start + len, ..]).to_owned(),
            frame_step: self.frame_step,
            frame_duration: self.frame_duration,
            origin: self.origin + start as f64 * self.frame_step,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFile {
    pub features: FeatureSequence,
    pub annotation: Annotation,
}

/// Feature files with their reference annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    files: BTreeMap<String, CorpusFile>,
    speakers: BTreeSet<String>,
}

impl Corpus {
    /// Checks that every annotated turn lies inside its file's feature extent.
    pub fn new(files: BTreeMap<String, CorpusFile>) -> Result<Self> {
        let mut speakers = BTreeSet::new();
        let mut dim = None;
        for (uri, file) in &files {
            if &file.annotation.uri != uri {
                return Err(Error::Config(format!(
                    "annotation uri {} filed under {uri}",
                    file.annotation.uri
                )));
            }
            match dim {
                None => dim = Some(file.features.dim()),
                Some(d) if d != file.features.dim() => {
                    return Err(Error::Dimension(format!(
                        "file {uri} has {} feature columns, expected {d}",
                        file.features.dim()
                    )))
                }
                _ => {}
            }
            let extent = file.features.extent();
            for turn in file.annotation.entries() {
                if !extent.contains(&turn.segment) {
                    return Err(Error::Config(format!(
                        "turn [{}, {}] of {uri} lies outside feature extent [{}, {}]",
                        turn.segment.start, turn.segment.end, extent.start, extent.end
                    )));
                }
                speakers.insert(turn.speaker.clone());
            }
        }
        Ok(Corpus { files, speakers })
    }

    pub fn files(&self) -> &BTreeMap<String, CorpusFile> {
        &self.files
    }

    pub fn speakers(&self) -> &BTreeSet<String> {
        &self.speakers
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.files.values().next().map(|f| f.features.dim())
    }

    /// Same files with every turn of the listed speakers dropped.
    pub fn without_speakers(&self, excluded: &BTreeSet<String>) -> Result<Corpus> {
        let files = self
            .files
            .iter()
            .map(|(uri, f)| {
                let kept = f
                    .annotation
                    .entries()
                    .iter()
                    .filter(|t| !excluded.contains(&t.speaker))
                    .cloned()
                    .collect();
                Ok((
                    uri.clone(),
                    CorpusFile {
                        features: f.features.clone(),
                        annotation: Annotation::new(uri.clone(), kept)?,
                    },
                ))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Corpus::new(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn(start: f64, end: f64, spk: &str) -> Turn {
        Turn {
            segment: Segment::new(start, end).unwrap(),
            speaker: spk.into(),
        }
    }

    #[test]
    fn segment_rejects_reversed_bounds() {
        assert!(Segment::new(2.0, 1.0).is_err());
        assert!(Segment::new(1.0, 1.0).is_err());
        assert!(Segment::new(-0.1, 1.0).is_err());
    }

    #[test]
    fn annotation_sorts_and_allows_touching() {
        let a = Annotation::new("f", vec![turn(2.0, 4.0, "b"), turn(0.0, 2.0, "a")]).unwrap();
        assert_eq!(a.entries()[0].speaker, "a");
        assert_eq!(a.change_points(), vec![2.0]);
    }

    #[test]
    fn annotation_rejects_overlap() {
        let err = Annotation::new("f", vec![turn(0.0, 2.5, "a"), turn(2.0, 4.0, "b")]);
        assert!(matches!(err, Err(Error::OverlappingSegments { .. })));
    }

    #[test]
    fn corpus_rejects_turn_outside_extent() {
        let features = FeatureSequence::new(Array2::zeros((50, 2)), 0.02, 0.032, 0.0).unwrap();
        let annotation = Annotation::new("f", vec![turn(0.0, 1.5, "a")]).unwrap();
        let mut files = BTreeMap::new();
        files.insert("f".to_string(), CorpusFile { features, annotation });
        assert!(Corpus::new(files).is_err());
    }
}
