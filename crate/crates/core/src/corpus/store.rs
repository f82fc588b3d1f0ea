//! On-disk corpus layout:
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/annotations.txt
//! <dir>/features/<uri>.f32    raw little-endian float32, row-major T×F
//! <dir>/features/<uri>.json   sidecar {uri, T, F, frame_step, frame_duration, ...}
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{annotation, Annotation, Corpus, CorpusFile, FeatureSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub uri: String,
    #[serde(rename = "T")]
    pub num_frames: usize,
    #[serde(rename = "F")]
    pub dim: usize,
    pub frame_step: f64,
    pub frame_duration: f64,
    #[serde(default)]
    pub origin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: String,
    pub files: Vec<String>,
    pub speakers: Vec<String>,
    pub feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

const MANIFEST_FORMAT: &str = "tristou-corpus/1";

/// Writes `<base>.f32` and `<base>.json`.
pub fn write_feature_blob(
    base: &Path,
    uri: &str,
    seq: &FeatureSequence,
    config_hash: Option<&str>,
    seed: Option<u64>,
) -> Result<()> {
    let mut bytes = Vec::with_capacity(seq.frames.len() * 4);
    for v in seq.frames.iter() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let blob = base.with_extension("f32");
    std::fs::write(&blob, bytes).map_err(|e| Error::io(&blob, e))?;
    let sidecar = FeatureSidecar {
        uri: uri.to_string(),
        num_frames: seq.num_frames(),
        dim: seq.dim(),
        frame_step: seq.frame_step,
        frame_duration: seq.frame_duration,
        origin: seq.origin,
        config_hash: config_hash.map(str::to_string),
        seed,
    };
    let json = base.with_extension("json");
    std::fs::write(&json, serde_json::to_string_pretty(&sidecar)? + "\n").map_err(|e| Error::io(&json, e))
}

pub fn read_feature_blob(base: &Path) -> Result<(FeatureSidecar, FeatureSequence)> {
    let json = base.with_extension("json");
    let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let sidecar: FeatureSidecar = serde_json::from_str(&text)?;
    let blob = base.with_extension("f32");
    let bytes = std::fs::read(&blob).map_err(|e| Error::io(&blob, e))?;
    let expected = sidecar.num_frames * sidecar.dim * 4;
    if bytes.len() != expected {
        return Err(Error::Dimension(format!(
            "{}: {} bytes, sidecar implies {expected}",
            blob.display(),
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let frames = Array2::from_shape_vec((sidecar.num_frames, sidecar.dim), values)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    let seq = FeatureSequence::new(frames, sidecar.frame_step, sidecar.frame_duration, sidecar.origin)?;
    Ok((sidecar, seq))
}

fn features_dir(dir: &Path) -> PathBuf {
    dir.join("features")
}

pub fn save_corpus_dir(
    dir: &Path,
    corpus: &Corpus,
    config_hash: Option<&str>,
    seed: Option<u64>,
) -> Result<()> {
    let fdir = features_dir(dir);
    std::fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
    for (uri, file) in corpus.files() {
        write_feature_blob(&fdir.join(uri), uri, &file.features, config_hash, seed)?;
    }
    annotation::save_annotations(
        dir.join("annotations.txt"),
        corpus.files().values().map(|f| &f.annotation),
    )?;
    let manifest = CorpusManifest {
        format: MANIFEST_FORMAT.into(),
        files: corpus.files().keys().cloned().collect(),
        speakers: corpus.speakers().iter().cloned().collect(),
        feature_dim: corpus.feature_dim().unwrap_or(0),
        config_hash: config_hash.map(str::to_string),
        seed,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_corpus_dir(dir: &Path) -> Result<(CorpusManifest, Corpus)> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CorpusManifest = serde_json::from_str(&text)?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::Config(format!("unknown corpus format {:?}", manifest.format)));
    }
    let mut annotations = annotation::load_annotations(dir.join("annotations.txt"))?;
    let mut files = BTreeMap::new();
    for uri in &manifest.files {
        let (_, features) = read_feature_blob(&features_dir(dir).join(uri))?;
        let annotation = annotations
            .remove(uri)
            .unwrap_or_else(|| Annotation::new(uri.clone(), Vec::new()).expect("empty annotation"));
        files.insert(uri.clone(), CorpusFile { features, annotation });
    }
    if let Some(uri) = annotations.keys().next() {
        return Err(Error::Config(format!("annotation for unknown file {uri}")));
    }
    Ok((manifest, Corpus::new(files)?))
}
