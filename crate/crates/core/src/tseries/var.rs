use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{series_names, ForecastResult, Result, TseriesError};
use crate::linalg;

/// Relative pivot below which lagged regressors count as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    pub p: usize,
    pub k: usize,
    pub intercept: Array1<f64>,
    /// `A_1 … A_p`, each `k × k`, with `y_t = c + Σ A_i y_{t-i} + e_t`.
    pub coefficient_matrices: Vec<Array2<f64>>,
    /// Residual covariance (divided by the effective sample size).
    pub sigma: Array2<f64>,
    pub aic: f64,
    pub n_effective: usize,
    /// AIC per candidate order on the common sample; `None` where the
    /// design was singular. Empty for fixed-order fits.
    pub aic_by_order: Vec<Option<f64>>,
}

impl VarModel {
    /// `(I - Σ A_i)⁻¹ c`, or `None` for a unit-root system.
    pub fn unconditional_mean(&self) -> Option<Array1<f64>> {
        let mut m = Array2::<f64>::eye(self.k);
        for a in &self.coefficient_matrices {
            m -= a;
        }
        linalg::solve(m.view(), self.intercept.view())
    }

    /// One-step prediction from `lags[0] = y_{t-1}, lags[1] = y_{t-2}, …`.
    fn step(&self, lags: &[Array1<f64>]) -> Array1<f64> {
        let mut y = self.intercept.clone();
        for (a, lag) in self.coefficient_matrices.iter().zip(lags) {
            y += &a.dot(lag);
        }
        y
    }
}

fn check_columns(y: ArrayView2<f64>) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(TseriesError::Invalid("series contains non-finite values".into()));
    }
    for (j, col) in y.columns().into_iter().enumerate() {
        if col.iter().all(|&v| v == col[0]) {
            return Err(TseriesError::Invalid(format!("column {j} is constant")));
        }
    }
    Ok(())
}

/// VAR(p) of fixed order by equation-wise OLS with intercept.
pub fn var_fit_order(y: ArrayView2<f64>, p: usize) -> Result<VarModel> {
    let (t, k) = y.dim();
    if p == 0 {
        return Err(TseriesError::Invalid("lag order must be positive".into()));
    }
    if t < k * p + p + 2 {
        return Err(TseriesError::SeriesTooShort(format!(
            "{t} rows for {k} series at order {p}; need {}",
            k * p + p + 2
        )));
    }
    check_columns(y)?;
    fit_on(y, p)
}

fn fit_on(y: ArrayView2<f64>, p: usize) -> Result<VarModel> {
    let (t, k) = y.dim();
    let n = t - p;
    let mut x = Array2::<f64>::zeros((n, k * p));
    for i in 1..=p {
        x.slice_mut(s![.., (i - 1) * k..i * k]).assign(&y.slice(s![p - i..t - i, ..]));
    }
    let resp = y.slice(s![p.., ..]);
    let fit = linalg::ols_centered(x.view(), resp, COLLINEAR_TOL).ok_or(TseriesError::SingularDesign { p })?;
    let coefficient_matrices = (0..p)
        .map(|i| fit.slopes.slice(s![i * k..(i + 1) * k, ..]).t().to_owned())
        .collect();
    let sigma = fit.residuals.t().dot(&fit.residuals) / n as f64;
    let log_det = match linalg::cholesky(sigma.view(), 0.0) {
        Some(l) => 2.0 * l.diag().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    };
    let aic = log_det + 2.0 * (k * k * p + k) as f64 / n as f64;
    Ok(VarModel {
        p,
        k,
        intercept: fit.intercept,
        coefficient_matrices,
        sigma,
        aic,
        n_effective: n,
        aic_by_order: Vec::new(),
    })
}

/// Selects the lag order in `1..=p_max` by AIC (`ln det Σ̂ + 2(k²p + k)/T`)
/// on a common sample, then refits the winner on the full series.
///
/// Orders whose lagged design is collinear are skipped; if order 1 is
/// already collinear the fit fails with `SingularDesign { p: 1 }`.
pub fn var_fit(y: ArrayView2<f64>, p_max: usize) -> Result<VarModel> {
    let (t, k) = y.dim();
    if p_max == 0 {
        return Err(TseriesError::Invalid("p_max must be positive".into()));
    }
    if t < k * p_max + p_max + 2 {
        return Err(TseriesError::SeriesTooShort(format!(
            "{t} rows for {k} series at p_max {p_max}; need {}",
            k * p_max + p_max + 2
        )));
    }
    check_columns(y)?;
    let mut aic_by_order = Vec::with_capacity(p_max);
    let mut best: Option<(f64, usize)> = None;
    for p in 1..=p_max {
        match fit_on(y.slice(s![p_max - p.., ..]), p) {
            Ok(m) => {
                aic_by_order.push(Some(m.aic));
                if best.is_none_or(|(a, _)| m.aic < a) {
                    best = Some((m.aic, p));
                }
            }
            Err(TseriesError::SingularDesign { p }) if p > 1 => aic_by_order.push(None),
            Err(e) => return Err(e),
        }
    }
    let (_, p) = best.expect("order 1 fitted");
    let mut model = fit_on(y, p)?;
    model.aic_by_order = aic_by_order;
    Ok(model)
}

/// Recursive `h`-step forecast from the last `p` rows of `history`.
pub fn var_forecast(m: &VarModel, history: ArrayView2<f64>, h: usize) -> Result<ForecastResult> {
    if history.ncols() != m.k {
        return Err(TseriesError::Invalid(format!(
            "history has {} series, model has {}",
            history.ncols(),
            m.k
        )));
    }
    if history.nrows() < m.p {
        return Err(TseriesError::InsufficientHistory { have: history.nrows(), need: m.p });
    }
    // lags[0] is the most recent row
    let mut lags: Vec<Array1<f64>> =
        (0..m.p).map(|i| history.row(history.nrows() - 1 - i).to_owned()).collect();
    let mut rows = Vec::with_capacity(h);
    for _ in 0..h {
        let next = m.step(&lags);
        rows.push(next.to_vec());
        lags.rotate_right(1);
        lags[0] = next;
    }
    Ok(ForecastResult::from_rows(rows, series_names(m.k), 0))
}
