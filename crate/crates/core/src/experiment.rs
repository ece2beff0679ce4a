//! End-to-end runs: train, detect, and compare models on one dataset.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::baselines::{BaselineKind, BaselineModel};
use crate::config::RunConfig;
use crate::dataio::{load_dataset, prepare, Manifest, PreparedDataset, WindowBatch};
use crate::error::{Error, Result};
use crate::evaluation::{config_hash, make_report, ExperimentReport};
use crate::graph::{Adjacency, Candidates};
use crate::model::{forecast, Forecast, GlueParams, HeadMode};
use crate::plot::{label_spans, Band, Chart, Line};
use crate::scoring::{AnomalyReport, ReportContext};
use crate::training::{train, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    /// Gaussian head trained by NLL.
    Glue,
    /// Point head trained by MSE.
    Gdn,
    Baseline(BaselineKind),
}

impl ModelChoice {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "glue" => Ok(Self::Glue),
            "gdn" => Ok(Self::Gdn),
            other => other.parse().map(Self::Baseline).map_err(|_| {
                Error::Config(format!(
                    "unknown model `{other}` (expected glue, gdn, pca, knn, ae or var)"
                ))
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Glue => "glue",
            Self::Gdn => "gdn",
            Self::Baseline(k) => k.name(),
        }
    }
}

pub fn head_mode_name(mode: HeadMode) -> &'static str {
    match mode {
        HeadMode::Gaussian => "glue",
        HeadMode::Point => "gdn",
    }
}

/// Loads the prepared dataset directory if configured, otherwise runs the
/// manifest pipeline.
pub fn load_prepared(cfg: &RunConfig) -> Result<PreparedDataset> {
    if let Some(dir) = &cfg.dataset.prepared {
        return load_dataset(dir);
    }
    match &cfg.dataset.manifest {
        Some(m) => prepare(&Manifest::load(m)?),
        None => Err(Error::Config(
            "no dataset: set dataset.prepared or dataset.manifest".into(),
        )),
    }
}

pub fn anomaly_rate(cfg: &RunConfig, ds: &PreparedDataset) -> Result<f64> {
    match cfg.dataset.anomaly_rate {
        Some(r) => Ok(r),
        None => ds.resolve_anomaly_rate(),
    }
}

/// Reads `sensor,candidate` name pairs into per-sensor candidate sets.
pub fn load_candidates(path: &Path, names: &[String]) -> Result<Candidates> {
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut sets = vec![Vec::new(); names.len()];
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let lookup = |col: usize| -> Result<usize> {
            let name = rec.get(col).unwrap_or("");
            index.get(name).copied().ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: row + 2,
                msg: format!("unknown sensor `{name}`"),
            })
        };
        sets[lookup(0)?].push(lookup(1)?);
    }
    Ok(Candidates::Restricted(sets))
}

/// Initialises and trains a forecaster with the given head.
pub fn train_forecaster(ds: &PreparedDataset, cfg: &RunConfig, mode: HeadMode) -> Result<TrainOutcome> {
    let data = &ds.dataset;
    let windows = data.train_windows(ds.window)?;
    let mut mc = cfg.model.model_config(data.n_sensors(), ds.window, mode);
    if let Some(path) = &cfg.model.candidates_file {
        mc.candidates = load_candidates(path, &data.sensor_names)?;
    }
    let params = GlueParams::init(mc, cfg.seed)?;
    let mut tc = cfg.train.clone();
    tc.seed = cfg.seed;
    train(params, &windows, &tc)
}

/// Forecaster detection output with the forecasts behind it.
pub struct ForecastDetection {
    pub report: AnomalyReport,
    pub test_forecast: Forecast,
    pub test_windows: WindowBatch,
}

pub fn detect_forecaster(
    name: &str,
    params: &GlueParams,
    adjacency: &Adjacency,
    ds: &PreparedDataset,
    rate: f64,
) -> Result<ForecastDetection> {
    let data = &ds.dataset;
    if data.test_range().is_empty() {
        return Err(Error::invalid("empty test split"));
    }
    let train_w = data.train_windows(ds.window)?;
    let test_w = data.test_windows(ds.window)?;
    let fc_train = forecast(params, adjacency, &train_w)?;
    let fc_test = forecast(params, adjacency, &test_w)?;
    let ctx = ReportContext {
        model: name,
        sensor_names: &data.sensor_names,
        test_times: &test_w.target_times,
        truth: test_w.target_labels.as_deref(),
        anomaly_rate: rate,
    };
    let report = AnomalyReport::from_forecasts(
        &ctx,
        fc_train.point(),
        &train_w.targets,
        fc_test.point(),
        &test_w.targets,
    )?;
    Ok(ForecastDetection {
        report,
        test_forecast: fc_test,
        test_windows: test_w,
    })
}

/// Fits a baseline on the training windows and scores the test windows.
pub fn run_baseline(kind: BaselineKind, ds: &PreparedDataset, cfg: &RunConfig, rate: f64) -> Result<AnomalyReport> {
    let data = &ds.dataset;
    if data.test_range().is_empty() {
        return Err(Error::invalid("empty test split"));
    }
    let train_w = data.train_windows(ds.window)?;
    let test_w = data.test_windows(ds.window)?;
    let mut bc = cfg.baselines.clone();
    bc.ae.seed = cfg.seed;
    let model = BaselineModel::fit(kind, &bc, &train_w)?;
    let ctx = ReportContext {
        model: kind.name(),
        sensor_names: &data.sensor_names,
        test_times: &test_w.target_times,
        truth: test_w.target_labels.as_deref(),
        anomaly_rate: rate,
    };
    match (model.raw_scores(&train_w, true), model.raw_scores(&test_w, false)) {
        (Some(train_scores), Some(test_scores)) => {
            AnomalyReport::from_raw_scores(&ctx, kind.score_kind(), train_scores, test_scores)
        }
        _ => {
            let train_pred = model.forecast(&train_w).expect("forecasting baseline")?;
            let test_pred = model.forecast(&test_w).expect("forecasting baseline")?;
            AnomalyReport::from_forecasts(&ctx, &train_pred, &train_w.targets, &test_pred, &test_w.targets)
        }
    }
}

/// Hash of the run configuration, ignoring where outputs go.
pub fn run_hash(cfg: &RunConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.out_dir = PathBuf::new();
    Ok(config_hash(&c.to_toml()?))
}

pub struct CompareOutput {
    pub report: ExperimentReport,
    pub runs: Vec<AnomalyReport>,
}

/// Runs every model in `cfg.compare.models` on `ds`.
pub fn compare(ds: &PreparedDataset, cfg: &RunConfig) -> Result<CompareOutput> {
    let rate = anomaly_rate(cfg, ds)?;
    let mut runs = Vec::new();
    for name in &cfg.compare.models {
        let choice = ModelChoice::parse(name)?;
        log::info!("running {}", choice.name());
        let report = match choice {
            ModelChoice::Glue | ModelChoice::Gdn => {
                let mode = if choice == ModelChoice::Glue {
                    HeadMode::Gaussian
                } else {
                    HeadMode::Point
                };
                let outcome = train_forecaster(ds, cfg, mode)?;
                detect_forecaster(choice.name(), &outcome.params, &outcome.adjacency, ds, rate)?.report
            }
            ModelChoice::Baseline(kind) => run_baseline(kind, ds, cfg, rate)?,
        };
        runs.push(report);
    }
    let rows = runs
        .iter()
        .map(|r| {
            let m = r
                .metrics
                .clone()
                .ok_or_else(|| Error::invalid("comparison needs test labels"))?;
            Ok((r.model.clone(), m))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = make_report(rows, &run_hash(cfg)?)?;
    Ok(CompareOutput { report, runs })
}

/// Per-sensor forecast bands `μ ± 1.96σ` against the observed series.
/// Empty in point mode.
pub fn band_plots(fc: &Forecast, windows: &WindowBatch, names: &[String]) -> Vec<(String, String)> {
    let Some(sigma2) = &fc.sigma2 else {
        return Vec::new();
    };
    let xs: Vec<f64> = windows.target_times.iter().map(|&t| t as f64).collect();
    (0..names.len())
        .map(|i| {
            let mut chart = Chart::new(&format!("{} forecast", names[i]), "timestep", "normalized value");
            chart.bands.push(Band {
                label: "95% band".into(),
                color: "#9ecae1".into(),
                points: (0..fc.len())
                    .map(|b| {
                        let half = 1.96 * sigma2.get(b, i).sqrt();
                        let m = fc.mu.get(b, i);
                        (xs[b], m - half, m + half)
                    })
                    .collect(),
            });
            chart.lines.push(Line::new(
                "observed",
                "#333333",
                (0..fc.len()).map(|b| (xs[b], windows.targets.get(b, i))).collect(),
            ));
            chart.lines.push(Line::new(
                "mean",
                "#1f77b4",
                (0..fc.len()).map(|b| (xs[b], fc.mu.get(b, i))).collect(),
            ));
            if let Some(l) = &windows.target_labels {
                chart.spans = label_spans(&xs, l);
            }
            (names[i].clone(), chart.render())
        })
        .collect()
}

/// Loss curve over epochs.
pub fn loss_plot(history: &[f64], objective: &str) -> String {
    let mut chart = Chart::new("training loss", "epoch", objective);
    chart.lines.push(Line::new(
        "loss",
        "#1f77b4",
        history.iter().enumerate().map(|(e, &l)| ((e + 1) as f64, l)).collect(),
    ));
    chart.render()
}
