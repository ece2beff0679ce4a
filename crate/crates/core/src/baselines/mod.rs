//! Comparison models run on the same windows as the graph forecaster.
//!
//! PCA, kNN and the autoencoder yield one raw score per window, thresholded
//! directly. VAR is a forecaster and goes through the robust error score.

mod autoencoder;
mod knn;
mod pca;
mod var;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use autoencoder::{Autoencoder, AutoencoderConfig};
pub use knn::{knn_score, Knn};
pub use pca::{normalize_sign, Pca};
pub use var::{VarModel, RIDGE_LAMBDA};

use crate::dataio::WindowBatch;
use crate::error::Result;
use crate::numcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Pca,
    Knn,
    Ae,
    Var,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [Self::Pca, Self::Knn, Self::Ae, Self::Var];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pca => "pca",
            Self::Knn => "knn",
            Self::Ae => "ae",
            Self::Var => "var",
        }
    }

    pub fn score_kind(self) -> &'static str {
        match self {
            Self::Pca | Self::Ae => "reconstruction-error",
            Self::Knn => "knn-distance",
            Self::Var => "forecast-error",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::Error::Config(format!("unknown baseline `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Fixed PCA component count; otherwise chosen by `pca_variance`.
    pub pca_components: Option<usize>,
    pub pca_variance: f64,
    pub knn_k: usize,
    pub ae: AutoencoderConfig,
    /// Defaults to the window length.
    pub var_order: Option<usize>,
    pub var_ridge_fallback: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            pca_components: None,
            pca_variance: 0.95,
            knn_k: 5,
            ae: AutoencoderConfig::default(),
            var_order: None,
            var_ridge_fallback: true,
        }
    }
}

#[derive(Debug, Clone)]
pub enum BaselineModel {
    Pca(Pca),
    Knn(Knn),
    Ae(Autoencoder),
    Var(VarModel),
}

impl BaselineModel {
    /// Fits on training windows only.
    pub fn fit(kind: BaselineKind, config: &BaselineConfig, train: &WindowBatch) -> Result<Self> {
        Ok(match kind {
            BaselineKind::Pca => {
                let x = train.flattened();
                Self::Pca(match config.pca_components {
                    Some(k) => Pca::fit(&x, k)?,
                    None => Pca::fit_variance(&x, config.pca_variance)?,
                })
            }
            BaselineKind::Knn => Self::Knn(Knn::fit(train.flattened(), config.knn_k)?),
            BaselineKind::Ae => Self::Ae(Autoencoder::fit(&train.flattened(), &config.ae)?.0),
            BaselineKind::Var => Self::Var(VarModel::fit_windows(
                train,
                config.var_order.unwrap_or(train.w),
                config.var_ridge_fallback,
            )?),
        })
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            Self::Pca(_) => BaselineKind::Pca,
            Self::Knn(_) => BaselineKind::Knn,
            Self::Ae(_) => BaselineKind::Ae,
            Self::Var(_) => BaselineKind::Var,
        }
    }

    /// Raw per-window scores. `is_train` makes kNN leave each training
    /// window out of its own neighbor search. VAR has no raw score and
    /// returns `None`; use [`BaselineModel::forecast`].
    pub fn raw_scores(&self, batch: &WindowBatch, is_train: bool) -> Option<Vec<f64>> {
        let x = batch.flattened();
        let rows = |f: &(dyn Fn(&[f64]) -> f64 + Sync)| -> Vec<f64> {
            (0..x.rows()).into_par_iter().map(|r| f(x.row(r))).collect()
        };
        match self {
            Self::Pca(m) => Some(rows(&|v| m.score(v))),
            Self::Ae(m) => Some(rows(&|v| m.score(v))),
            Self::Knn(m) if is_train => Some(m.score_train()),
            Self::Knn(m) => Some(m.score_all(&x)),
            Self::Var(_) => None,
        }
    }

    pub fn forecast(&self, batch: &WindowBatch) -> Option<Result<Matrix>> {
        match self {
            Self::Var(m) => Some(m.forecast_windows(batch)),
            _ => None,
        }
    }
}
