//! Stationarity testing and multivariate multi-step forecasting.

mod adf;
mod lstm;
mod var;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adf::{adf_test, schwert_max_lag, AdfResult, CriticalValues};
pub use lstm::{lstm_fit, lstm_forecast, lstm_loss_and_grad, LstmConfig, LstmModel, ParamLayout};
pub use var::{var_fit, var_fit_order, var_forecast, VarModel};

#[derive(Debug, Error)]
pub enum TseriesError {
    #[error("series too short: {0}")]
    SeriesTooShort(String),
    #[error("series is constant")]
    ConstantSeries,
    #[error("singular design at lag order {p}")]
    SingularDesign { p: usize },
    #[error("insufficient history: have {have} rows, need {need}")]
    InsufficientHistory { have: usize, need: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, TseriesError>;

/// One forecast step: every modeled series plus the target value pulled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastStep {
    pub step: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub date: Option<String>,
    pub forecast: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub actual: Option<f64>,
    pub values: Vec<f64>,
}

/// Multi-step forecast, optionally scored against held-out actuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub region: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<String>,
    pub horizon: usize,
    pub series: Vec<String>,
    pub target_index: usize,
    pub per_step: Vec<ForecastStep>,
    /// `None` when there are no actuals or the horizon is zero.
    pub mae: Option<f64>,
    pub mre: Option<f64>,
    /// DTW distance between the target forecast and actual curves.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dtw_distance: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ForecastResult {
    pub(crate) fn from_rows(rows: Vec<Vec<f64>>, series: Vec<String>, target_index: usize) -> Self {
        let per_step = rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| ForecastStep {
                step: i + 1,
                date: None,
                forecast: values[target_index],
                actual: None,
                values,
            })
            .collect::<Vec<_>>();
        Self {
            region: None,
            model: None,
            horizon: per_step.len(),
            series,
            target_index,
            per_step,
            mae: None,
            mre: None,
            dtw_distance: None,
            warnings: Vec::new(),
        }
    }

    /// Forecast matrix, `horizon × series`.
    pub fn matrix(&self) -> ndarray::Array2<f64> {
        let k = self.series.len();
        let flat: Vec<f64> = self.per_step.iter().flat_map(|s| s.values.iter().copied()).collect();
        ndarray::Array2::from_shape_vec((self.per_step.len(), k), flat).expect("rows of equal width")
    }

    pub fn target_forecast(&self) -> Vec<f64> {
        self.per_step.iter().map(|s| s.forecast).collect()
    }

    /// `date,actual,forecast` CSV (plot data).
    pub fn write_plot_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        use crate::numfmt::fmt_sig12;
        writeln!(w, "date,actual,forecast")?;
        for s in &self.per_step {
            let date = s.date.clone().unwrap_or_else(|| s.step.to_string());
            let actual = s.actual.map(fmt_sig12).unwrap_or_default();
            writeln!(w, "{},{},{}", date, actual, fmt_sig12(s.forecast))?;
        }
        Ok(())
    }
}

pub(crate) fn series_names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("y{j}")).collect()
}
