//! Model checkpoints: `meta.json` with shapes and config plus one
//! little-endian `f32` blob per tensor.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{DenseMatrix, GcnParams, TrainConfig};

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    w0: (usize, usize),
    head_target: (usize, usize),
    head_ss: Option<(usize, usize)>,
    config: TrainConfig,
}

fn write_blob(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut bytes = Vec::with_capacity(m.data().len() * 4);
    for &v in m.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_blob(path: &Path, shape: (usize, usize)) -> Result<DenseMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != shape.0 * shape.1 * 4 {
        return Err(Error::ShapeMismatch {
            op: "checkpoint blob",
            left: shape,
            right: (bytes.len() / 4, 1),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    DenseMatrix::from_vec(shape.0, shape.1, data)
}

pub fn save(dir: impl AsRef<Path>, params: &GcnParams, config: &TrainConfig) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = CheckpointMeta {
        w0: params.w0.shape(),
        head_target: params.head_target.shape(),
        head_ss: params.head_ss.as_ref().map(DenseMatrix::shape),
        config: config.clone(),
    };
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_vec_pretty(&meta).map_err(|e| Error::json(&meta_path, e))?;
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    write_blob(&dir.join("w0.f32"), &params.w0)?;
    write_blob(&dir.join("head_target.f32"), &params.head_target)?;
    if let Some(h) = &params.head_ss {
        write_blob(&dir.join("head_ss.f32"), h)?;
    }
    Ok(())
}

pub fn load(dir: impl AsRef<Path>) -> Result<(GcnParams, TrainConfig)> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let bytes = fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: CheckpointMeta =
        serde_json::from_slice(&bytes).map_err(|e| Error::json(&meta_path, e))?;
    let params = GcnParams {
        w0: read_blob(&dir.join("w0.f32"), meta.w0)?,
        head_target: read_blob(&dir.join("head_target.f32"), meta.head_target)?,
        head_ss: meta
            .head_ss
            .map(|s| read_blob(&dir.join("head_ss.f32"), s))
            .transpose()?,
    };
    Ok((params, meta.config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let params = GcnParams::init(6, 4, 3, Some(2), 9);
        let cfg = TrainConfig::default().with_seed(9);
        save(dir.path(), &params, &cfg).unwrap();
        let (back, back_cfg) = load(dir.path()).unwrap();
        assert_eq!(back_cfg, cfg);
        assert!(back.w0.max_abs_diff(&params.w0) < 1e-7);
        assert!(back.head_ss.unwrap().max_abs_diff(params.head_ss.as_ref().unwrap()) < 1e-7);
    }

    #[test]
    fn truncated_blob_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let params = GcnParams::init(3, 2, 2, None, 1);
        save(dir.path(), &params, &TrainConfig::default()).unwrap();
        fs::write(dir.path().join("w0.f32"), [0u8; 4]).unwrap();
        assert!(load(dir.path()).is_err());
    }
}
