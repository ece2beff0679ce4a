//! Versioned binary checkpoint.
//!
//! Layout (little-endian): `b"GLUECKPT"`, `u32` version, `u64` header length,
//! UTF-8 JSON header, then every parameter block's `f64` values in header
//! order. Parameters are stored as raw bits, so save/load is bitwise exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::NormStats;
use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::model::{GlueParams, ModelConfig};
use crate::numcore::Matrix;

const MAGIC: &[u8; 8] = b"GLUECKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: GlueParams,
    pub adjacency: Adjacency,
    pub sensor_names: Vec<String>,
    pub norm_stats: Option<NormStats>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    seed: u64,
    sensor_names: Vec<String>,
    norm_stats: Option<NormStats>,
    adjacency: Adjacency,
    blocks: Vec<BlockHeader>,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let blocks = ckpt.params.blocks();
    let header = Header {
        config: ckpt.params.config.clone(),
        seed: ckpt.seed,
        sensor_names: ckpt.sensor_names.clone(),
        norm_stats: ckpt.norm_stats.clone(),
        adjacency: ckpt.adjacency.clone(),
        blocks: blocks
            .iter()
            .map(|(name, m)| BlockHeader {
                name: name.clone(),
                rows: m.rows(),
                cols: m.cols(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for (_, m) in blocks {
        for v in m.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |detail: &str| Error::Format {
        what: "checkpoint",
        detail: detail.into(),
    };
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = bytes.get(20..).ok_or_else(|| bad("truncated"))?;
    let json = body.get(..hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(json)?;
    let mut data = &body[hlen..];

    let mut params = GlueParams::init(header.config, 0)?;
    {
        let mut blocks = params.blocks_mut();
        if blocks.len() != header.blocks.len() {
            return Err(bad("parameter block count disagrees with config"));
        }
        for ((name, m), bh) in blocks.iter_mut().zip(&header.blocks) {
            if *name != bh.name || m.shape() != (bh.rows, bh.cols) {
                return Err(bad(&format!("block `{}` does not match config", bh.name)));
            }
            let need = bh.rows * bh.cols * 8;
            if data.len() < need {
                return Err(bad("truncated parameters"));
            }
            let values: Vec<f64> = data[..need]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            **m = Matrix::from_vec(bh.rows, bh.cols, values)?;
            data = &data[need..];
        }
    }
    if !data.is_empty() {
        return Err(bad("trailing bytes"));
    }
    if header.adjacency.n() != params.config.n_sensors
        || header.sensor_names.len() != params.config.n_sensors
    {
        return Err(bad("sensor count disagrees with config"));
    }
    Ok(Checkpoint {
        params,
        adjacency: header.adjacency,
        sensor_names: header.sensor_names,
        norm_stats: header.norm_stats,
        seed: header.seed,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    decode_checkpoint(&bytes)
}

impl Checkpoint {
    /// Errors listing sensors that differ from `names`.
    pub fn check_sensors(&self, names: &[String]) -> Result<()> {
        if self.sensor_names == names {
            return Ok(());
        }
        let only_ckpt: Vec<&String> = self
            .sensor_names
            .iter()
            .filter(|s| !names.contains(s))
            .collect();
        let only_data: Vec<&String> = names
            .iter()
            .filter(|s| !self.sensor_names.contains(s))
            .collect();
        Err(Error::SensorMismatch(format!(
            "only in checkpoint: {only_ckpt:?}; only in dataset: {only_data:?}{}",
            if only_ckpt.is_empty() && only_data.is_empty() {
                " (order differs)"
            } else {
                ""
            }
        )))
    }
}
