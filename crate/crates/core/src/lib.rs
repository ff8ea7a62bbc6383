//! Prevalence prediction and forecasting from self-reported symptom survey
//! panels.
//!
//! The crate is organized around the experiment pipeline:
//!
//! - [`panel`]: region × date × signal datasets, CSV ingestion, feature
//!   pruning, train/test splitting and a planted synthetic generator.
//! - [`rankcorr`]: Pearson correlation studies and univariate F ranking.
//! - [`regress`]: least squares, CART and gradient-boosted trees behind one
//!   fit/predict contract.
//! - [`tseries`]: ADF stationarity test, VAR and a small LSTM forecaster.
//! - [`shapecluster`]: agglomerative clustering of regions and DTW.
//! - [`evalharness`]: MAE/MRE, repeated evaluation with confidence
//!   intervals, top-n sweeps, ablations and chronological backtests.

pub mod evalharness;
pub mod linalg;
pub mod numfmt;
pub mod panel;
pub mod rankcorr;
pub mod regress;
pub mod shapecluster;
pub mod tseries;

pub use evalharness::{
    AblationMode, AblationReport, DropOrder, EvalConfig, EvalError, EvalMetrics, RepeatedEval,
    SweepReport,
};
pub use panel::{ColumnKind, ColumnMeta, PanelDataset, PanelError, SchemaConfig, SplitSpec, SyntheticSpec};
pub use rankcorr::{CorrelationReport, FeatureRanking, RankError};
pub use regress::{FittedModel, ModelKind, ModelSpec, RegressError};
pub use shapecluster::{ClusterAssignment, DtwResult, Linkage};
pub use tseries::{AdfResult, ForecastResult, LstmConfig, LstmModel, VarModel};
