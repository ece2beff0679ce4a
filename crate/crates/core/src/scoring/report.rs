use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{abs_errors, detect, fit_threshold, mre_all, robust_stats, RobustStats};
use crate::error::{Error, Result};
use crate::evaluation::{forecast_metrics, prf1, MetricsSummary};
use crate::numcore::Matrix;
use crate::plot::{label_spans, Chart, Line};

pub const MRE_SCORE: &str = "max-robust-error";

/// Scores, threshold and decisions for one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub model: String,
    pub score_kind: String,
    pub anomaly_rate: f64,
    pub threshold: f64,
    pub sensor_names: Vec<String>,
    pub train_scores: Vec<f64>,
    pub test_scores: Vec<f64>,
    /// Sensor attaining the maximum robust error, for forecasters.
    pub test_argmax: Option<Vec<usize>>,
    pub test_times: Vec<usize>,
    pub predicted: Vec<u8>,
    pub truth: Option<Vec<u8>>,
    pub robust_stats: Option<RobustStats>,
    pub metrics: Option<MetricsSummary>,
}

/// Inputs shared by every report constructor.
pub struct ReportContext<'a> {
    pub model: &'a str,
    pub sensor_names: &'a [String],
    pub test_times: &'a [usize],
    pub truth: Option<&'a [u8]>,
    pub anomaly_rate: f64,
}

impl AnomalyReport {
    /// Forecaster path: standardise absolute errors by training median and
    /// IQR, score each timestep by its maximum, threshold on training.
    pub fn from_forecasts(
        ctx: &ReportContext,
        train_pred: &Matrix,
        train_truth: &Matrix,
        test_pred: &Matrix,
        test_truth: &Matrix,
    ) -> Result<Self> {
        let train_err = abs_errors(train_pred, train_truth)?;
        let test_err = abs_errors(test_pred, test_truth)?;
        let stats = robust_stats(&train_err)?;
        let (train_scores, _) = mre_all(&train_err, &stats)?;
        let (test_scores, argmax) = mre_all(&test_err, &stats)?;
        let fm = forecast_metrics(test_pred, test_truth)?;
        let mut report = Self::assemble(ctx, MRE_SCORE, train_scores, test_scores, Some(fm))?;
        report.test_argmax = Some(argmax);
        report.robust_stats = Some(stats);
        Ok(report)
    }

    /// Raw-score path for reconstruction and distance baselines.
    pub fn from_raw_scores(
        ctx: &ReportContext,
        score_kind: &str,
        train_scores: Vec<f64>,
        test_scores: Vec<f64>,
    ) -> Result<Self> {
        Self::assemble(ctx, score_kind, train_scores, test_scores, None)
    }

    fn assemble(
        ctx: &ReportContext,
        score_kind: &str,
        train_scores: Vec<f64>,
        test_scores: Vec<f64>,
        forecast: Option<(f64, f64)>,
    ) -> Result<Self> {
        if test_scores.is_empty() {
            return Err(Error::invalid("empty test split"));
        }
        if test_scores.len() != ctx.test_times.len() {
            return Err(Error::shape(
                "anomaly_report",
                format!("{} scores for {} timesteps", test_scores.len(), ctx.test_times.len()),
            ));
        }
        let threshold = fit_threshold(&train_scores, ctx.anomaly_rate)?;
        let predicted = detect(&test_scores, threshold);
        let metrics = ctx
            .truth
            .map(|t| prf1(&predicted, t).map(|d| MetricsSummary::new(d, forecast)))
            .transpose()?;
        Ok(Self {
            model: ctx.model.to_string(),
            score_kind: score_kind.to_string(),
            anomaly_rate: ctx.anomaly_rate,
            threshold,
            sensor_names: ctx.sensor_names.to_vec(),
            train_scores,
            test_scores,
            test_argmax: None,
            test_times: ctx.test_times.to_vec(),
            predicted,
            truth: ctx.truth.map(<[u8]>::to_vec),
            robust_stats: None,
            metrics,
        })
    }

    pub fn flagged(&self) -> usize {
        self.predicted.iter().filter(|&&p| p != 0).count()
    }

    /// `timestep,score,argmax_sensor,predicted,truth`.
    pub fn write_scores_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "timestep,score,argmax_sensor,predicted,truth")?;
        for (k, &t) in self.test_times.iter().enumerate() {
            let arg = self
                .test_argmax
                .as_ref()
                .map_or(String::new(), |a| self.sensor_names[a[k]].clone());
            let truth = self.truth.as_ref().map_or(String::new(), |l| l[k].to_string());
            writeln!(
                f,
                "{t},{},{arg},{},{truth}",
                self.test_scores[k], self.predicted[k]
            )?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn metrics_json(&self) -> Result<String> {
        let value = serde_json::json!({
            "model": self.model,
            "score_kind": self.score_kind,
            "anomaly_rate": self.anomaly_rate,
            "threshold": self.threshold,
            "n_train": self.train_scores.len(),
            "n_test": self.test_scores.len(),
            "n_flagged": self.flagged(),
            "metrics": self.metrics,
        });
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    /// Score over time with the threshold and labelled anomalies shaded.
    pub fn score_plot(&self) -> String {
        let xs: Vec<f64> = self.test_times.iter().map(|&t| t as f64).collect();
        let mut chart = Chart::new(
            &format!("{} anomaly score ({})", self.model, self.score_kind),
            "timestep",
            "score",
        );
        chart.lines.push(Line::new(
            "score",
            "#1f77b4",
            xs.iter().copied().zip(self.test_scores.iter().copied()).collect(),
        ));
        chart
            .hlines
            .push((self.threshold, "#d62728".into(), "threshold".into()));
        if let Some(truth) = &self.truth {
            chart.spans = label_spans(&xs, truth);
        }
        chart.render()
    }

    /// Writes `scores.csv`, `metrics.json` and `scores.svg` into `dir`.
    pub fn write_all(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.write_scores_csv(dir.join("scores.csv"))?;
        fs::write(dir.join("metrics.json"), self.metrics_json()?)?;
        fs::write(dir.join("scores.svg"), self.score_plot())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_spikes_flagged() {
        let names = vec!["a".to_string(), "b".to_string()];
        let train_truth = Matrix::from_fn(40, 2, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.1);
        let train_pred = train_truth.map(|x| x + 0.05);
        let mut test_truth = Matrix::from_fn(10, 2, |r, c| ((r * 3 + c) % 5) as f64 * 0.1);
        let test_pred = test_truth.map(|x| x + 0.05);
        test_truth.set(4, 1, 50.0);
        test_truth.set(7, 0, -50.0);
        let times: Vec<usize> = (100..110).collect();
        let mut truth = vec![0u8; 10];
        truth[4] = 1;
        truth[7] = 1;
        let ctx = ReportContext {
            model: "toy",
            sensor_names: &names,
            test_times: &times,
            truth: Some(&truth),
            anomaly_rate: 0.05,
        };
        let r = AnomalyReport::from_forecasts(&ctx, &train_pred, &train_truth, &test_pred, &test_truth)
            .unwrap();
        assert_eq!(r.predicted, truth);
        assert_eq!(r.test_argmax.as_ref().unwrap()[4], 1);
        assert_eq!(r.test_argmax.as_ref().unwrap()[7], 0);
        assert_eq!(r.metrics.as_ref().unwrap().f1, 1.0);
    }

    #[test]
    fn empty_test_rejected() {
        let ctx = ReportContext {
            model: "x",
            sensor_names: &[],
            test_times: &[],
            truth: None,
            anomaly_rate: 0.1,
        };
        assert!(AnomalyReport::from_raw_scores(&ctx, "k", vec![1.0], vec![]).is_err());
    }
}
