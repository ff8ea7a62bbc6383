use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{Result, TseriesError};
use crate::linalg;

/// MacKinnon (2010) asymptotic critical values for the constant-only,
/// no-trend ADF regression.
pub const CRITICAL_1PCT: f64 = -3.43035;
pub const CRITICAL_5PCT: f64 = -2.86154;
pub const CRITICAL_10PCT: f64 = -2.56677;

const MIN_EFFECTIVE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    #[serde(rename = "1%")]
    pub one_pct: f64,
    #[serde(rename = "5%")]
    pub five_pct: f64,
    #[serde(rename = "10%")]
    pub ten_pct: f64,
}

impl Default for CriticalValues {
    fn default() -> Self {
        Self { one_pct: CRITICAL_1PCT, five_pct: CRITICAL_5PCT, ten_pct: CRITICAL_10PCT }
    }
}

impl CriticalValues {
    pub fn as_map(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([("1%", self.one_pct), ("5%", self.five_pct), ("10%", self.ten_pct)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lags_used: usize,
    pub n_effective: usize,
    pub critical_values: CriticalValues,
    pub reject_at_5pct: bool,
}

/// `⌊12 (n / 100)^{1/4}⌋`.
pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey-Fuller test with a constant and no trend.
///
/// Regresses `Δy_t` on `1, y_{t-1}, Δy_{t-1}, …, Δy_{t-m}`. The lag order
/// `m` minimizes AIC over `0..=max_lag` on a common sample, then the
/// chosen order is refit on every usable observation. The statistic is the
/// t-ratio of the `y_{t-1}` coefficient.
pub fn adf_test(y: ArrayView1<f64>, max_lag: Option<usize>) -> Result<AdfResult> {
    let n = y.len();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(TseriesError::Invalid("series contains non-finite values".into()));
    }
    if n > 0 && y.iter().all(|&v| v == y[0]) {
        return Err(TseriesError::ConstantSeries);
    }
    let max_lag = max_lag.unwrap_or_else(|| schwert_max_lag(n));
    let common = (n - 1).saturating_sub(max_lag);
    if n < 2 || common < MIN_EFFECTIVE {
        return Err(TseriesError::SeriesTooShort(format!(
            "{n} points leave {common} usable observations at max lag {max_lag}, need {MIN_EFFECTIVE}"
        )));
    }
    let dy: Vec<f64> = (1..n).map(|t| y[t] - y[t - 1]).collect();

    let mut best: Option<(f64, usize)> = None;
    for m in 0..=max_lag {
        let fit = match regress(y, &dy, m, max_lag) {
            Ok(f) => f,
            Err(TseriesError::SingularDesign { .. }) if m > 0 => continue,
            Err(e) => return Err(e),
        };
        let aic = fit.n as f64 * (fit.ssr / fit.n as f64).ln() + 2.0 * (m + 2) as f64;
        if best.is_none_or(|(a, _)| aic < a) {
            best = Some((aic, m));
        }
    }
    let (_, lags) = best.expect("at least lag 0 evaluated");
    let fit = regress(y, &dy, lags, lags)?;
    let statistic = fit.gamma / fit.se_gamma;
    let critical_values = CriticalValues::default();
    Ok(AdfResult {
        statistic,
        lags_used: lags,
        n_effective: fit.n,
        critical_values,
        reject_at_5pct: statistic < critical_values.five_pct,
    })
}

struct AdfFit {
    gamma: f64,
    se_gamma: f64,
    ssr: f64,
    n: usize,
}

/// Rows `t = start..n-1` of `dy` (0-based, `dy[t] = y[t+1] - y[t]`).
fn regress(y: ArrayView1<f64>, dy: &[f64], lags: usize, start: usize) -> Result<AdfFit> {
    let rows = dy.len() - start;
    let mut x = Array2::<f64>::zeros((rows, lags + 1));
    let mut resp = Array2::<f64>::zeros((rows, 1));
    for (r, t) in (start..dy.len()).enumerate() {
        resp[[r, 0]] = dy[t];
        x[[r, 0]] = y[t];
        for i in 1..=lags {
            x[[r, i]] = dy[t - i];
        }
    }
    let fit = linalg::ols_centered(x.view(), resp.view(), 1e-12)
        .ok_or(TseriesError::SingularDesign { p: lags })?;
    let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
    let dof = rows as f64 - (lags + 2) as f64;
    if dof <= 0.0 {
        return Err(TseriesError::SeriesTooShort("no residual degrees of freedom".into()));
    }
    let se_gamma = (ssr / dof * fit.xtx_inv[[0, 0]]).sqrt();
    Ok(AdfFit { gamma: fit.slopes[[0, 0]], se_gamma, ssr, n: rows })
}
