//! Binary checkpoint container.
//!
//! Layout: `b"CC2V"`, `u32` LE format version, `u64` LE header length, the
//! JSON header, then every tensor as little-endian `f32` in directory order.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::corpus::{label_width, Vocabulary};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::{Parameters, Tensor};

pub const MAGIC: &[u8; 4] = b"CC2V";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub code_vocab: Vocabulary,
    pub message_vocab: Vocabulary,
    pub model: Model,
    /// Per-epoch training loss, if the model was trained.
    pub history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Vocabs {
    code: Vocabulary,
    message: Vocabulary,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset from the start of the payload.
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    vocab: Vocabs,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    history: Vec<f64>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut tensors = Vec::new();
        let mut offset = 0u64;
        for (name, t) in self.model.params.named() {
            tensors.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
            });
            offset += 4 * t.len() as u64;
        }
        let header = Header {
            config: self.config,
            vocab: Vocabs {
                code: self.code_vocab.clone(),
                message: self.message_vocab.clone(),
            },
            tensors,
            history: self.history.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.model.params.tensors() {
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let truncated = |what: &str| Error::Checkpoint(format!("truncated checkpoint: missing {what}"));
        let magic = bytes.get(..4).ok_or_else(|| truncated("magic"))?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic: found {:?}, expected {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(MAGIC)
            )));
        }
        let version = u32::from_le_bytes(bytes.get(4..8).ok_or_else(|| truncated("version"))?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header_len =
            u64::from_le_bytes(bytes.get(8..16).ok_or_else(|| truncated("header length"))?.try_into().unwrap());
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|l| l.checked_add(16))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| truncated("header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| Error::Checkpoint(format!("invalid header: {e}")))?;
        let payload = &bytes[header_end..];

        let mut tensors = HashMap::new();
        let mut expected_offset = 0u64;
        for entry in &header.tensors {
            if entry.offset != expected_offset {
                return Err(Error::Checkpoint(format!(
                    "tensor {} at offset {}, expected {}",
                    entry.name, entry.offset, expected_offset
                )));
            }
            let len: usize = entry.shape.iter().product();
            let start = entry.offset as usize;
            let end = start + 4 * len;
            let raw = payload.get(start..end).ok_or_else(|| truncated(&format!("tensor {}", entry.name)))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            tensors.insert(entry.name.clone(), Tensor::from_vec(&entry.shape, data));
            expected_offset = end as u64;
        }
        if expected_offset as usize != payload.len() {
            return Err(Error::Checkpoint(format!(
                "payload has {} bytes, directory covers {}",
                payload.len(),
                expected_offset
            )));
        }

        let config = header.config;
        config.validate()?;
        let Vocabs { code, message } = header.vocab;
        let mut model = Model::init(config.model, code.len(), label_width(&message), config.seed)?;
        model.params.load_named(tensors)?;
        Ok(Checkpoint {
            config,
            code_vocab: code,
            message_vocab: message,
            model,
            history: header.history,
        })
    }
}

/// Write atomically: a temporary file in the target directory is renamed
/// over `path`.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = checkpoint.to_bytes()?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
