//! Checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `SUMAUGCK` |
//! | 4 | format version (`u32`, currently 1) |
//! | 4 | header length `h` (`u32`) |
//! | h | UTF-8 JSON header: `config`, `step`, `val_rouge`, and `params` as `[{name, rows, cols}]` |
//! | … | for each header param in order, `rows·cols` `f64` values, row-major |
//!
//! Nothing may follow the last array.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sumaug_core::model::tensor::Matrix;
use sumaug_core::model::{Checkpoint, ModelConfig, NamedParam};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"SUMAUGCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint data ends early")]
    Truncated,
    #[error("{0} unexpected bytes after the last parameter")]
    TrailingBytes(usize),
}

#[derive(Serialize, Deserialize)]
struct ParamHeader {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    step: u64,
    val_rouge: Option<f64>,
    params: Vec<ParamHeader>,
}

pub fn to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let header = Header {
        config: ckpt.config.clone(),
        step: ckpt.step,
        val_rouge: ckpt.val_rouge,
        params: ckpt
            .params
            .iter()
            .map(|p| ParamHeader { name: p.name.clone(), rows: p.value.rows, cols: p.value.cols })
            .collect(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let numel: usize = ckpt.params.iter().map(|p| p.value.data.len()).sum();
    let mut out = Vec::with_capacity(16 + header.len() + 8 * numel);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for p in &ckpt.params {
        for x in &p.value.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if bytes.len() < n {
        return Err(CheckpointError::Truncated);
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn u32_le(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4 bytes"))
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let b = &mut bytes;
    if take(b, 8).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32_le(take(b, 4)?);
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let len = u32_le(take(b, 4)?) as usize;
    let header: Header = serde_json::from_slice(take(b, len)?).map_err(|e| CheckpointError::Header(e.to_string()))?;
    let mut params = Vec::with_capacity(header.params.len());
    for p in header.params {
        let n = p.rows.checked_mul(p.cols).ok_or_else(|| CheckpointError::Header(format!("{} is too large", p.name)))?;
        let raw = take(b, n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        params.push(NamedParam { name: p.name, value: Matrix::from_vec(p.rows, p.cols, data) });
    }
    if !b.is_empty() {
        return Err(CheckpointError::TrailingBytes(b.len()));
    }
    Ok(Checkpoint { config: header.config, step: header.step, val_rouge: header.val_rouge, params })
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, to_bytes(ckpt)).map_err(|source| CheckpointError::Io { path: path.to_path_buf(), source })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io { path: path.to_path_buf(), source })?;
    from_bytes(&bytes)
}
