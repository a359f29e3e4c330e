//! Versioned binary checkpoints.
//!
//! Layout (all integers and floats little-endian): magic `RGAE`, format
//! version, the resolved run config as TOML, then every parameter in
//! registration order with its shape, Adam state and float32 payload.
//! Loading a checkpoint and saving it again produces identical bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::cells::ModelParams;
use crate::config::RunConfig;

const MAGIC: &[u8; 4] = b"RGAE";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0} is not a checkpoint (bad magic)")]
    BadMagic(PathBuf),
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("checkpoint config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("checkpoint parameter '{found}' does not match expected '{expected}'")]
    ParamMismatch { expected: String, found: String },
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + len > self.bytes.len() {
            return Err(CheckpointError::Truncated(self.pos));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32_vec(&mut self, len: usize) -> Result<Vec<f32>, CheckpointError> {
        let raw = self.take(4 * len)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn push_f32s(buf: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn save_checkpoint(
    path: &Path,
    model: &ModelParams,
    config: &RunConfig,
) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let config_text = config.to_toml();
    buf.extend_from_slice(&(config_text.len() as u32).to_le_bytes());
    buf.extend_from_slice(config_text.as_bytes());
    buf.extend_from_slice(&(model.store.len() as u32).to_le_bytes());
    for p in model.store.iter() {
        buf.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(p.name.as_bytes());
        buf.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
        for &d in &p.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.extend_from_slice(&p.step.to_le_bytes());
        push_f32s(&mut buf, &p.values);
        push_f32s(&mut buf, &p.m1);
        push_f32s(&mut buf, &p.m2);
    }
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(&buf).map_err(io)?;
    Ok(())
}

/// Loads a checkpoint, rebuilding the model structure from the embedded
/// config and overwriting every parameter with the stored state.
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, RunConfig), CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic(path.to_path_buf()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let config_len = r.u32()? as usize;
    let config_text = String::from_utf8_lossy(r.take(config_len)?).into_owned();
    let config = RunConfig::from_toml(&config_text)?;

    let mut model = ModelParams::init(config.cell_config(), 0);
    let count = r.u32()? as usize;
    if count != model.store.len() {
        return Err(CheckpointError::ParamMismatch {
            expected: format!("{} parameters", model.store.len()),
            found: format!("{count} parameters"),
        });
    }
    for p in model.store.iter_mut() {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8_lossy(r.take(name_len)?).into_owned();
        if name != p.name {
            return Err(CheckpointError::ParamMismatch {
                expected: p.name.clone(),
                found: name,
            });
        }
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        if shape != p.shape {
            return Err(CheckpointError::ParamMismatch {
                expected: format!("{} with shape {:?}", p.name, p.shape),
                found: format!("{name} with shape {shape:?}"),
            });
        }
        let numel: usize = shape.iter().product();
        p.step = r.u64()?;
        p.values = r.f32_vec(numel)?;
        p.m1 = r.f32_vec(numel)?;
        p.m2 = r.f32_vec(numel)?;
    }
    Ok((model, config))
}
