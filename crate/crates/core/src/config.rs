//! Run configuration: a TOML file with one table per module.
//!
//! Unknown keys are rejected. Any key can be overridden from the
//! environment as `GLUE__<SECTION>__<KEY>=<value>` (for example
//! `GLUE__TRAIN__EPOCHS=5`); values are parsed as TOML literals and fall
//! back to plain strings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::model::{HeadMode, ModelConfig};
use crate::training::TrainConfig;

pub const ENV_PREFIX: &str = "GLUE__";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Raw-data manifest (TOML).
    pub manifest: Option<PathBuf>,
    /// Directory written by `preprocess`; preferred over `manifest`.
    pub prepared: Option<PathBuf>,
    /// Overrides the manifest's anomaly rate.
    pub anomaly_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    pub k: usize,
    pub head_mode: HeadMode,
    pub leaky_slope: f64,
    pub sigma_floor: f64,
    pub hidden_layers: usize,
    pub per_node_attention: bool,
    /// CSV of allowed `(sensor, candidate)` name pairs restricting each
    /// sensor's neighbor candidates.
    pub candidates_file: Option<PathBuf>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            d: 64,
            k: 15,
            head_mode: HeadMode::Gaussian,
            leaky_slope: 0.2,
            sigma_floor: 1e-6,
            hidden_layers: 1,
            per_node_attention: false,
            candidates_file: None,
        }
    }
}

impl ModelSection {
    /// Architecture for `n_sensors` and window `w`. `k` is capped at
    /// `n_sensors - 1`.
    pub fn model_config(&self, n_sensors: usize, w: usize, head_mode: HeadMode) -> ModelConfig {
        let mut c = ModelConfig::new(n_sensors, self.d, w, self.k.min(n_sensors.saturating_sub(1)).max(1));
        c.head_mode = head_mode;
        c.leaky_slope = self.leaky_slope;
        c.sigma_floor = self.sigma_floor;
        c.hidden_layers = self.hidden_layers;
        c.per_node_attention = self.per_node_attention;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// Any of `glue`, `gdn`, `pca`, `knn`, `ae`, `var`.
    pub models: Vec<String>,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            models: ["pca", "knn", "ae", "var", "gdn", "glue"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub baselines: BaselineConfig,
    pub compare: CompareSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            dataset: DatasetSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            baselines: BaselineConfig::default(),
            compare: CompareSection::default(),
        }
    }
}

fn env_value(raw: &str) -> toml::Value {
    // parse as a TOML literal by wrapping it in a one-key document
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path
        .split_last()
        .ok_or_else(|| Error::Config("empty override key".into()))?;
    let mut table = root;
    for p in parents {
        let entry = table
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path `{}` crosses a value", path.join("."))))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, then applies `overrides` as `(key path, raw value)`.
    pub fn from_toml_with(text: &str, overrides: &[(Vec<String>, String)]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        for (path, raw) in overrides {
            set_path(&mut table, path, env_value(raw))?;
        }
        let mut config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {e}")))?;
        config.sync_seed();
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` (or starts from defaults) and applies environment
    /// overrides. Relative paths in the file resolve against its directory.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut config = Self::from_toml_with(&text, &env_overrides())?;
        if let Some(base) = path.and_then(Path::parent) {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.dataset.manifest);
        fix(&mut self.dataset.prepared);
        fix(&mut self.model.candidates_file);
        if self.out_dir.is_relative() {
            self.out_dir = base.join(&self.out_dir);
        }
    }

    /// Keeps the training and baseline seeds tied to the run seed.
    pub fn sync_seed(&mut self) {
        self.train.seed = self.seed;
        self.baselines.ae.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.model.d == 0 || self.model.k == 0 {
            return Err(Error::Config("model.d and model.k must be at least 1".into()));
        }
        if let Some(r) = self.dataset.anomaly_rate {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!("dataset.anomaly_rate {r} outside (0, 1)")));
            }
        }
        for m in &self.compare.models {
            crate::experiment::ModelChoice::parse(m)?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serialize config: {e}")))
    }
}

/// `GLUE__SECTION__KEY` variables as lower-cased key paths.
pub fn env_overrides() -> Vec<(Vec<String>, String)> {
    let mut out: Vec<(Vec<String>, String)> = std::env::vars()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            let path: Vec<String> = rest.split("__").map(str::to_lowercase).collect();
            (!path.iter().any(String::is_empty)).then_some((path, v))
        })
        .collect();
    out.sort();
    out
}
