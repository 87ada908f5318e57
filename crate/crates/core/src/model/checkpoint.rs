//! Checkpoint I/O.
//!
//! Layout: magic `IBNW`, format version (u32 LE), a length-prefixed JSON
//! config blob (u32 LE), then every tensor in `named_tensors` order as
//! name length (u16 LE), name bytes, rank (u8), dims (u32 LE each), and
//! the payload as little-endian f64. Round-trips are bit-exact; the file
//! must end exactly after the last tensor.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{ModelConfig, ModelParams};

pub const MAGIC: [u8; 4] = *b"IBNW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}, expected {MAGIC:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {found}, expected {FORMAT_VERSION}")]
    UnsupportedVersion { found: u32 },
    #[error("bad embedded config: {detail}")]
    BadConfig { detail: String },
    #[error("tensor '{tensor}' has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("unexpected tensor '{found}', expected '{expected}'")]
    UnexpectedTensor { expected: String, found: String },
    #[error("file truncated while reading {at}")]
    Truncated { at: String },
    #[error("{extra} trailing bytes after the last tensor")]
    TrailingData { extra: usize },
}

pub fn save_checkpoint(
    params: &ModelParams,
    cfg: &ModelConfig,
    path: &Path,
) -> Result<(), CheckpointError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let config_json = serde_json::to_vec(cfg).map_err(|e| CheckpointError::BadConfig {
        detail: e.to_string(),
    })?;
    buf.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config_json);
    for (name, dims, data) in params.named_tensors() {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(dims.len() as u8);
        for &d in &dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, at: &str) -> Result<&'a [u8], CheckpointError> {
        if self.pos + len > self.bytes.len() {
            return Err(CheckpointError::Truncated { at: at.to_string() });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u16_le(&mut self, at: &str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, at)?.try_into().unwrap()))
    }

    fn u32_le(&mut self, at: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, at)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, ModelConfig), CheckpointError> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };

    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic {
            found: magic.try_into().unwrap(),
        });
    }
    let version = r.u32_le("version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }
    let config_len = r.u32_le("config length")? as usize;
    let config_bytes = r.take(config_len, "config")?;
    let cfg: ModelConfig =
        serde_json::from_slice(config_bytes).map_err(|e| CheckpointError::BadConfig {
            detail: e.to_string(),
        })?;
    cfg.validate().map_err(|e| CheckpointError::BadConfig {
        detail: e.to_string(),
    })?;

    // The config fixes every tensor name and shape; the file must agree.
    // Payloads arrive in `named_tensors` order, which is the flat layout.
    let mut params = ModelParams::zeros(&cfg);
    let expected: Vec<(String, Vec<usize>)> = params
        .named_tensors()
        .iter()
        .map(|(n, d, _)| (n.clone(), d.clone()))
        .collect();
    let mut flat: Vec<f64> = Vec::with_capacity(params.num_params());
    for (name, dims) in expected {
        let name_len = r.u16_le(&name)? as usize;
        let found_name = String::from_utf8_lossy(r.take(name_len, &name)?).into_owned();
        if found_name != name {
            return Err(CheckpointError::UnexpectedTensor {
                expected: name,
                found: found_name,
            });
        }
        let rank = r.take(1, &name)?[0] as usize;
        let mut found_dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            found_dims.push(r.u32_le(&name)? as usize);
        }
        if found_dims != dims {
            return Err(CheckpointError::ShapeMismatch {
                tensor: name,
                expected: dims,
                found: found_dims,
            });
        }
        let len: usize = dims.iter().product();
        let payload = r.take(len * 8, &name)?;
        for chunk in payload.chunks_exact(8) {
            flat.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingData {
            extra: bytes.len() - r.pos,
        });
    }
    params.set_flat(&flat);
    Ok((params, cfg))
}
