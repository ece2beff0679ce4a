use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{
    drop_zero_variance, fill_missing, load_csv, normalize, downsample_median, ColumnRule,
    CsvSchema, RawTable, TimeSeriesDataset,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// 1 Hz water-distribution logs: block-median downsampled before use.
    Wadi,
    /// Multi-trajectory run-to-failure data; every failure mode is label 1.
    Nasa,
    Generic,
}

fn default_window() -> usize {
    5
}

fn default_downsample() -> usize {
    10
}

/// Key-value description of a train/test pair of CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: DatasetKind,
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Expected anomaly rate for thresholding. Defaults to the training
    /// label rate when the training split is labelled.
    #[serde(default)]
    pub anomaly_rate: Option<f64>,
    /// Block length for WADI downsampling, in rows (1 Hz samples).
    #[serde(default = "default_downsample")]
    pub downsample_seconds: usize,
    #[serde(default)]
    pub time_column: Option<String>,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default)]
    pub trajectory_column: Option<String>,
    #[serde(default)]
    pub sensor_columns: Option<Vec<String>>,
}

impl Manifest {
    /// Parses a manifest file; relative data paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        let mut m: Manifest = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if m.train.is_relative() {
            m.train = base.join(&m.train);
        }
        if m.test.is_relative() {
            m.test = base.join(&m.test);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if let Some(r) = self.anomaly_rate {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!("anomaly_rate {r} outside (0, 1)")));
            }
        }
        if self.downsample_seconds == 0 {
            return Err(Error::Config("downsample_seconds must be at least 1".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> CsvSchema {
        let rule = |declared: &Option<String>, fallback: Option<&str>| match (declared, fallback) {
            (Some(n), _) => ColumnRule::Required(n.clone()),
            (None, Some(f)) => ColumnRule::Optional(f.to_string()),
            (None, None) => ColumnRule::Absent,
        };
        CsvSchema {
            time_column: rule(&self.time_column, Some("timestamp")),
            label_column: rule(&self.label_column, Some("label")),
            trajectory_column: rule(&self.trajectory_column, None),
            sensor_columns: self.sensor_columns.clone(),
        }
    }
}

/// A preprocessed dataset together with the manifest settings that travel
/// with it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub dataset: TimeSeriesDataset,
    pub kind: DatasetKind,
    pub window: usize,
    pub anomaly_rate: Option<f64>,
}

impl PreparedDataset {
    /// Configured anomaly rate, else the training label rate.
    pub fn resolve_anomaly_rate(&self) -> Result<f64> {
        if let Some(r) = self.anomaly_rate {
            return Ok(r);
        }
        match self.dataset.train_label_rate() {
            Some(r) if r > 0.0 && r < 1.0 => Ok(r),
            _ => Err(Error::Config(
                "anomaly_rate must be set: the training split has no usable labels".into(),
            )),
        }
    }
}

/// Runs the full pipeline: load, fill, (WADI) downsample, variance filter,
/// normalise.
pub fn prepare(manifest: &Manifest) -> Result<PreparedDataset> {
    let schema = manifest.schema();
    let mut train = fill_missing(load_csv(&manifest.train, &schema)?);
    let mut test = fill_missing(load_csv(&manifest.test, &schema)?);
    if manifest.kind == DatasetKind::Wadi {
        train = downsample_median(&train, manifest.downsample_seconds)?;
        test = downsample_median(&test, manifest.downsample_seconds)?;
    }
    if train.n_rows() == 0 {
        return Err(Error::invalid(format!(
            "{}: training split is empty",
            manifest.train.display()
        )));
    }
    let mut prepared = prepare_tables(train, test, manifest.window)?;
    prepared.kind = manifest.kind;
    prepared.anomaly_rate = manifest.anomaly_rate;
    Ok(prepared)
}

/// Variance filter and normalisation of already filled train/test tables.
pub fn prepare_tables(train: RawTable, test: RawTable, window: usize) -> Result<PreparedDataset> {
    if train.n_rows() == 0 {
        return Err(Error::invalid("training split is empty"));
    }
    let train_len = train.n_rows();
    let table = train.concat_split(test, "train", "test")?;
    let (table, dropped) = drop_zero_variance(table, 0..train_len)?;
    if !dropped.is_empty() {
        log::info!("dropped {} zero-variance sensors", dropped.len());
    }
    let mut dataset = normalize(&table, 0..train_len)?;
    dataset.dropped_sensors = dropped;
    Ok(PreparedDataset {
        dataset,
        kind: DatasetKind::Generic,
        window,
        anomaly_rate: None,
    })
}
