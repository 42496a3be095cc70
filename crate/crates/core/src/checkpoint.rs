//! Regressor checkpoints: a binary `SMLP` parameter file plus a JSON
//! metadata sidecar at `<path>.json`.
//!
//! ```text
//! magic       b"SMLP"
//! version     u32 (= 1)
//! n_sizes     u32
//! sizes       n_sizes × u32
//! n_params    u64
//! params      n_params × f64
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::ColumnNormalizer;
use crate::regressor::{MlpRegressor, RegressorError, TrainConfig};

pub const MAGIC: &[u8; 4] = b"SMLP";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an SMLP checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint has trailing bytes")]
    TrailingBytes,
    #[error("metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error("metadata disagrees with parameter file: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Model(#[from] RegressorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub format: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    pub output: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub columns: Vec<String>,
    pub normalization: ColumnNormalizer,
}

pub fn metadata_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

pub fn write_params<W: Write>(model: &MlpRegressor, mut w: W) -> Result<(), CheckpointError> {
    let sizes = model.layer_sizes();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for s in &sizes {
        w.write_all(&(*s as u32).to_le_bytes())?;
    }
    let params = model.params();
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in &params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], CheckpointError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CheckpointError::Truncated,
        _ => CheckpointError::Io(e),
    })?;
    Ok(buf)
}

/// Reads layer sizes and parameters; `seed` is stamped on the rebuilt model.
pub fn read_params<R: Read>(mut r: R, seed: u64) -> Result<MlpRegressor, CheckpointError> {
    let magic: [u8; 4] = read_array(&mut r).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let n_sizes = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let sizes = (0..n_sizes)
        .map(|_| Ok(u32::from_le_bytes(read_array(&mut r)?) as usize))
        .collect::<Result<Vec<_>, CheckpointError>>()?;
    let n_params = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let expected: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if n_params != expected {
        return Err(CheckpointError::Inconsistent(format!(
            "{n_params} parameters for layer sizes {sizes:?}"
        )));
    }
    let params = (0..n_params)
        .map(|_| Ok(f64::from_le_bytes(read_array(&mut r)?)))
        .collect::<Result<Vec<_>, CheckpointError>>()?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(CheckpointError::TrailingBytes);
    }
    Ok(MlpRegressor::from_params(&sizes, &params, seed)?)
}

pub fn save(model: &MlpRegressor, meta: &ModelMetadata, path: &Path) -> Result<(), CheckpointError> {
    write_params(model, BufWriter::new(File::create(path)?))?;
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    std::fs::write(metadata_path(path), json)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(MlpRegressor, ModelMetadata), CheckpointError> {
    let meta: ModelMetadata =
        serde_json::from_reader(BufReader::new(File::open(metadata_path(path))?))?;
    let mut model = read_params(BufReader::new(File::open(path)?), meta.seed)?;
    if model.layer_sizes() != meta.layer_sizes {
        return Err(CheckpointError::Inconsistent(format!(
            "layer sizes {:?} vs {:?}",
            model.layer_sizes(),
            meta.layer_sizes
        )));
    }
    model.set_dropout_rate(meta.config.dropout);
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::column_names;

    #[test]
    fn round_trip() {
        let model = MlpRegressor::init(17);
        let meta = ModelMetadata {
            format: "SMLP".into(),
            version: VERSION,
            layer_sizes: model.layer_sizes(),
            activation: "gelu".into(),
            output: "sigmoid".into(),
            seed: 17,
            config: TrainConfig::default(),
            columns: column_names().to_vec(),
            normalization: ColumnNormalizer::identity(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.smlp");
        save(&model, &meta, &path).unwrap();
        let (back, back_meta) = load(&path).unwrap();
        assert_eq!(back.params(), model.params());
        assert_eq!(back_meta, meta);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"SMLP");
        assert_eq!(bytes.len(), 4 + 4 + 4 + 5 * 4 + 8 + 3676 * 8);
    }

    #[test]
    fn corrupt_files() {
        let model = MlpRegressor::with_layers(&[2, 1], 0).unwrap();
        let mut buf = Vec::new();
        write_params(&model, &mut buf).unwrap();
        assert!(matches!(read_params(&buf[..buf.len() - 3], 0), Err(CheckpointError::Truncated)));
        let mut extra = buf.clone();
        extra.push(1);
        assert!(matches!(read_params(extra.as_slice(), 0), Err(CheckpointError::TrailingBytes)));
        let mut bad = buf.clone();
        bad[1] = 0;
        assert!(matches!(read_params(bad.as_slice(), 0), Err(CheckpointError::BadMagic)));
        let mut count = buf.clone();
        count[20] = 9;
        assert!(matches!(read_params(count.as_slice(), 0), Err(CheckpointError::Inconsistent(_))));
    }
}
