//! Binary checkpoint.
//!
//! ```text
//! "RLIDCKPT"            8 bytes
//! version               u32 LE (= 1)
//! header length         u32 LE
//! header                UTF-8 JSON: config, vocabulary, labels, tensor manifest
//! payload               f32 LE arrays in manifest order
//! ```
//!
//! Each manifest entry carries the tensor name, shape, and the byte offset
//! and byte length of its payload relative to the start of the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelConfig, ModelParameters, Tensor};
use crate::tokenizer::Vocabulary;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RLIDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const PREAMBLE: usize = 16;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint: {0}")]
    Truncated(String),
    #[error("malformed checkpoint header: {0}")]
    Header(String),
    #[error("manifest mismatch for {name}: {message}")]
    ManifestMismatch { name: String, message: String },
    #[error("checkpoint {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Everything needed to run the classifier again.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    /// Class names indexed by class id.
    pub labels: Vec<String>,
    pub params: ModelParameters,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub length: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vec<String>,
    labels: Vec<String>,
    tensors: Vec<ManifestEntry>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.manifest();
        let payload_len = tensors.last().map_or(0, |e| e.offset + e.length);
        let header = Header {
            config: self.config.clone(),
            vocab: self.vocab.tokens().to_vec(),
            labels: self.labels.clone(),
            tensors,
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload_len);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.params.tensors() {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < PREAMBLE {
            return Err(CheckpointError::Truncated("file ends inside the preamble".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let version = u32_at(8);
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let header_len = u32_at(12) as usize;
        let payload_start = PREAMBLE + header_len;
        if bytes.len() < payload_start {
            return Err(CheckpointError::Truncated(format!(
                "header declares {header_len} bytes but only {} follow",
                bytes.len() - PREAMBLE
            )));
        }
        let header: Header = serde_json::from_slice(&bytes[PREAMBLE..payload_start])
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        header
            .config
            .validate()
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        let vocab = Vocabulary::from_tokens(&header.vocab).map_err(|e| CheckpointError::Header(e.to_string()))?;
        if vocab.len() != header.config.vocab_size {
            return Err(CheckpointError::Header(format!(
                "vocabulary has {} tokens, config says {}",
                vocab.len(),
                header.config.vocab_size
            )));
        }
        if header.labels.len() != header.config.n_classes {
            return Err(CheckpointError::Header(format!(
                "{} labels for {} classes",
                header.labels.len(),
                header.config.n_classes
            )));
        }

        let payload = &bytes[payload_start..];
        let mut expected_offset = 0;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in &header.tensors {
            let mismatch = |message: String| CheckpointError::ManifestMismatch {
                name: entry.name.clone(),
                message,
            };
            let elements: usize = entry.shape.iter().product();
            if entry.length != elements * 4 {
                return Err(mismatch(format!(
                    "byte length {} does not match shape {:?} ({} bytes)",
                    entry.length,
                    entry.shape,
                    elements * 4
                )));
            }
            if entry.offset != expected_offset {
                return Err(mismatch(format!(
                    "offset {} where {expected_offset} was expected",
                    entry.offset
                )));
            }
            let end = entry.offset + entry.length;
            if end > payload.len() {
                return Err(CheckpointError::Truncated(format!(
                    "{} needs payload bytes {}..{end} but the payload has {}",
                    entry.name,
                    entry.offset,
                    payload.len()
                )));
            }
            let data = payload[entry.offset..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(Tensor::new(entry.name.clone(), entry.shape.clone(), data));
            expected_offset = end;
        }
        if expected_offset != payload.len() {
            return Err(CheckpointError::Header(format!(
                "{} trailing bytes after the last tensor",
                payload.len() - expected_offset
            )));
        }
        let params = ModelParameters::from_tensors(tensors);
        if let Err(e) = params.check(&header.config) {
            let name = header
                .tensors
                .iter()
                .zip(ModelParameters::<f32>::zeros(&header.config).tensors())
                .find(|(entry, want)| entry.name != want.name || entry.shape != want.shape)
                .map_or_else(|| "tensor list".to_string(), |(entry, _)| entry.name.clone());
            return Err(CheckpointError::ManifestMismatch {
                name,
                message: e.to_string(),
            });
        }
        if let Some(name) = params.first_non_finite() {
            return Err(CheckpointError::ManifestMismatch {
                name: name.to_string(),
                message: "holds a NaN or infinity".into(),
            });
        }
        Ok(Checkpoint {
            config: header.config,
            vocab,
            labels: header.labels,
            params,
        })
    }

    /// The manifest as stored in the header.
    pub fn manifest(&self) -> Vec<ManifestEntry> {
        let mut offset = 0;
        self.params
            .tensors()
            .iter()
            .map(|t| {
                let e = ManifestEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    offset,
                    length: t.data.len() * 4,
                };
                offset += e.length;
                e
            })
            .collect()
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Checkpoint::from_bytes(&bytes)
}
