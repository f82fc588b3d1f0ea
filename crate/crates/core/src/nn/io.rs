//! Model file layout (all integers little-endian):
//!
//! ```text
//! offset 0   8 bytes   magic "TRSTNET\0"
//! offset 8   u64       header length H in bytes
//! offset 16  H bytes   UTF-8 JSON header
//! offset 16+H          float64 blob, tensors concatenated row-major
//! ```
//!
//! The header is `{format_version, dims, tensors: [{name, shape, offset, len}], extra}`
//! where `offset` and `len` count float64 elements from the start of the blob.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Dims, TristouNetParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TRSTNET\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub dims: Dims,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct ModelFile {
    pub header: ModelHeader,
    pub data: Vec<f64>,
}

impl ModelFile {
    pub fn tensor(&self, name: &str) -> Option<(&TensorEntry, &[f64])> {
        self.header
            .tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| (t, &self.data[t.offset..t.offset + t.len]))
    }
}

pub fn write_model_file<'a>(
    path: &Path,
    dims: Dims,
    tensors: impl IntoIterator<Item = (String, Vec<usize>, &'a [f64])>,
    extra: serde_json::Value,
) -> Result<()> {
    let mut entries = Vec::new();
    let mut blob = Vec::new();
    let mut offset = 0;
    for (name, shape, data) in tensors {
        entries.push(TensorEntry {
            name,
            shape,
            offset,
            len: data.len(),
        });
        offset += data.len();
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = serde_json::to_vec(&ModelHeader {
        format_version: FORMAT_VERSION,
        dims,
        tensors: entries,
        extra,
    })?;
    let mut bytes = Vec::with_capacity(16 + header.len() + blob.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header);
    bytes.extend_from_slice(&blob);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_model_file(path: &Path) -> Result<ModelFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |m: &str| Error::ModelFormat(format!("{}: {m}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let blob_start = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("truncated header"))?;
    let header: ModelHeader =
        serde_json::from_slice(&bytes[16..blob_start]).map_err(|e| corrupt(&format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(corrupt(&format!("unsupported format_version {}", header.format_version)));
    }
    let total: usize = header.tensors.iter().map(|t| t.len).sum();
    let blob = &bytes[blob_start..];
    if blob.len() != total * 8 {
        return Err(corrupt(&format!("blob holds {} bytes, manifest needs {}", blob.len(), total * 8)));
    }
    for t in &header.tensors {
        if t.shape.iter().product::<usize>() != t.len || t.offset + t.len > total {
            return Err(corrupt(&format!("inconsistent manifest entry {}", t.name)));
        }
    }
    let data = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ModelFile { header, data })
}

pub fn save_params(p: &TristouNetParams, path: impl AsRef<Path>) -> Result<()> {
    write_model_file(
        path.as_ref(),
        p.dims,
        p.tensors().into_iter().map(|(n, s, d)| (n.to_string(), s, d)),
        serde_json::Value::Null,
    )
}

/// Rebuilds parameters from a model (or checkpoint) file, checking every
/// tensor shape against the stored dims.
pub(crate) fn params_from_file(file: &ModelFile) -> Result<TristouNetParams> {
    let dims = file.header.dims;
    dims.validate()?;
    let mut params = TristouNetParams::zeros(dims);
    let shapes: Vec<Vec<usize>> = params.tensors().into_iter().map(|(_, s, _)| s).collect();
    for ((name, dst), shape) in params.tensors_mut().into_iter().zip(shapes) {
        let (entry, src) = file
            .tensor(name)
            .ok_or_else(|| Error::ModelFormat(format!("missing tensor {name}")))?;
        if entry.shape != shape {
            return Err(Error::ModelFormat(format!(
                "tensor {name} has shape {:?}, dims imply {shape:?}",
                entry.shape
            )));
        }
        dst.copy_from_slice(src);
    }
    Ok(params)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<TristouNetParams> {
    params_from_file(&read_model_file(path.as_ref())?)
}

/// Loads and checks that the model consumes `input_dim` feature columns.
pub fn load_params_for(path: impl AsRef<Path>, input_dim: usize) -> Result<TristouNetParams> {
    let p = load_params(path)?;
    p.check_input_dim(input_dim)?;
    Ok(p)
}
