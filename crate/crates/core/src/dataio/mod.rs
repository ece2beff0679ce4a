//! Loading, preprocessing and windowing of multivariate sensor series.
//!
//! The pipeline order is fixed: fill missing values, downsample (WADI only),
//! drop zero-variance sensors, normalise, window.

mod dataset;
mod manifest;
mod persist;
mod preprocess;
mod table;

pub use dataset::{make_windows, TimeSeriesDataset, WindowBatch};
pub use manifest::{prepare, prepare_tables, DatasetKind, Manifest, PreparedDataset};
pub use persist::{load_dataset, save_dataset, DATASET_BIN, DATASET_META};
pub use preprocess::{downsample_median, drop_zero_variance, fill_missing, normalize, NormStats};
pub use table::{load_csv, ColumnRule, CsvSchema, RawTable};
