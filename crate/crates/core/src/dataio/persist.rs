//! On-disk dataset format: `dataset.bin` holds the arrays, `dataset.json`
//! the sensor names, normalisation stats and split metadata.
//!
//! `dataset.bin` layout, little-endian:
//! `b"GLUEDSET"`, `u32` version, `u64` rows, `u64` sensors, `rows*sensors`
//! `f64` values (row-major), `u8` has-labels flag, `rows` label bytes when
//! flagged, `rows` `u32` segment ids.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{DatasetKind, NormStats, PreparedDataset, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

const MAGIC: &[u8; 8] = b"GLUEDSET";
const VERSION: u32 = 1;

pub const DATASET_BIN: &str = "dataset.bin";
pub const DATASET_META: &str = "dataset.json";

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    kind: DatasetKind,
    window: usize,
    anomaly_rate: Option<f64>,
    sensor_names: Vec<String>,
    dropped_sensors: Vec<String>,
    norm_stats: NormStats,
    train_len: usize,
    rows: usize,
}

pub fn save_dataset(prepared: &PreparedDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let ds = &prepared.dataset;
    let (rows, n) = ds.values.shape();

    let mut buf = Vec::with_capacity(32 + rows * n * 8 + rows * 5);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for v in ds.values.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    match &ds.labels {
        Some(l) => {
            buf.push(1);
            buf.extend_from_slice(l);
        }
        None => buf.push(0),
    }
    for s in &ds.segments {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    fs::write(dir.join(DATASET_BIN), buf)?;

    let meta = Sidecar {
        version: VERSION,
        kind: prepared.kind,
        window: prepared.window,
        anomaly_rate: prepared.anomaly_rate,
        sensor_names: ds.sensor_names.clone(),
        dropped_sensors: ds.dropped_sensors.clone(),
        norm_stats: ds.norm_stats.clone(),
        train_len: ds.train_len,
        rows,
    };
    fs::write(dir.join(DATASET_META), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Format {
                what: "dataset",
                detail: "truncated file".into(),
            });
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<PreparedDataset> {
    let dir = dir.as_ref();
    let meta: Sidecar = serde_json::from_str(&fs::read_to_string(dir.join(DATASET_META))?)?;
    let bytes = fs::read(dir.join(DATASET_BIN))?;
    let mut r = Reader { buf: &bytes, pos: 0 };
    let bad = |detail: &str| Error::Format {
        what: "dataset",
        detail: detail.into(),
    };
    if r.take(8)? != MAGIC {
        return Err(bad("bad magic"));
    }
    if r.u32()? != VERSION {
        return Err(bad("unsupported version"));
    }
    let rows = r.u64()? as usize;
    let n = r.u64()? as usize;
    if rows != meta.rows || n != meta.sensor_names.len() {
        return Err(bad("array shape disagrees with sidecar metadata"));
    }
    let mut values = Vec::with_capacity(rows * n);
    for _ in 0..rows * n {
        values.push(r.f64()?);
    }
    let labels = match r.take(1)?[0] {
        0 => None,
        1 => Some(r.take(rows)?.to_vec()),
        _ => return Err(bad("bad label flag")),
    };
    let mut segments = Vec::with_capacity(rows);
    for _ in 0..rows {
        segments.push(r.u32()?);
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(PreparedDataset {
        dataset: TimeSeriesDataset {
            sensor_names: meta.sensor_names,
            values: Matrix::from_vec(rows, n, values)?,
            labels,
            norm_stats: meta.norm_stats,
            dropped_sensors: meta.dropped_sensors,
            segments,
            train_len: meta.train_len,
        },
        kind: meta.kind,
        window: meta.window,
        anomaly_rate: meta.anomaly_rate,
    })
}
