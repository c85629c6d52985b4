//! Checkpoint layout:
//!
//! ```text
//! b"GDCK"  u32 version  u64 header_len  header (JSON)  f32 LE parameters
//! ```
//!
//! Parameters follow the order of [`WavenetClassifier::param_specs`].

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ModelConfig, ParamSpec, WavenetClassifier};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"GDCK";

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    params: Vec<ParamSpec>,
}

pub fn write_checkpoint(model: &WavenetClassifier<f32>, mut w: impl Write) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        config: model.config().clone(),
        params: model.param_specs(),
    })?;
    let mut buf = Vec::with_capacity(16 + header.len() + model.n_params() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in model.params().iter().flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
        .map_err(|e| Error::Checkpoint(format!("write failed: {e}")))
}

pub fn read_checkpoint(mut r: impl Read) -> Result<WavenetClassifier<f32>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(16..16 + header_len)
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(body)?;
    let expected = WavenetClassifier::<f32>::specs_for(&header.config);
    if expected != header.params {
        return Err(Error::Checkpoint("parameter table does not match config".into()));
    }
    let blob = &bytes[16 + header_len..];
    let total: usize = expected.iter().map(ParamSpec::len).sum();
    if blob.len() != total * 4 {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            total * 4,
            blob.len()
        )));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    let params = expected
        .iter()
        .map(|s| values.by_ref().take(s.len()).collect())
        .collect();
    WavenetClassifier::from_params(header.config, params)
}

pub fn save_checkpoint(model: &WavenetClassifier<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Load a checkpoint; when `expected` is given its config must match exactly.
pub fn load_checkpoint(
    path: impl AsRef<Path>,
    expected: Option<&ModelConfig>,
) -> Result<WavenetClassifier<f32>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let model = read_checkpoint(std::io::BufReader::new(file))?;
    if let Some(cfg) = expected {
        if cfg != model.config() {
            return Err(Error::ConfigMismatch(format!(
                "checkpoint {} was saved with a different model config",
                path.display()
            )));
        }
    }
    Ok(model)
}
