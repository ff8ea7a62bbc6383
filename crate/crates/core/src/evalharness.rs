//! Error metrics and the experiment protocols built on them: repeated
//! random-split evaluation with confidence intervals, top-n sweeps,
//! feature ablations and chronological forecast backtests.

use std::io::Write;

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::numfmt::fmt_sig12;
use crate::panel::{split_indices, PanelDataset, PanelError, SplitSpec, Units};
use crate::rankcorr::FeatureRanking;
use crate::regress::{self, ModelSpec, RegressError};
use crate::shapecluster::dtw;
use crate::tseries::{self, ForecastResult, LstmConfig, TseriesError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {pred} predictions vs {actual} actuals")]
    ShapeMismatch { pred: usize, actual: usize },
    #[error("cannot score an empty prediction")]
    Empty,
    #[error("actual value {0} is at or below -1; relative error undefined")]
    NegativeActual(f64),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Tseries(#[from] TseriesError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(EvalError::ShapeMismatch { pred: pred.len(), actual: actual.len() });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64)
}

/// Mean relative error in percent, `100/n Σ |p - a| / (a + 1)`.
///
/// Actuals are expected to be percentages. Negative actuals above -1 are
/// scored with a warning; at or below -1 the denominator is no longer
/// positive and the call fails.
pub fn mre(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    if let Some(&a) = actual.iter().find(|&&a| a <= -1.0) {
        return Err(EvalError::NegativeActual(a));
    }
    if actual.iter().any(|&a| a < 0.0) {
        log::warn!("negative actual values in relative error; percent domain assumed");
    }
    let sum: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).abs() / (a + 1.0)).sum();
    Ok(100.0 * sum / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mae: f64,
    pub mre_percent: f64,
    pub n: usize,
}

impl EvalMetrics {
    pub fn score(pred: &[f64], actual: &[f64]) -> Result<Self> {
        Ok(Self { mae: mae(pred, actual)?, mre_percent: mre(pred, actual)?, n: pred.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub runs: usize,
    pub base_seed: u64,
    pub train_fraction: f64,
    /// Use the normal 1.96 quantile instead of Student-t.
    pub normal_ci: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { runs: 20, base_seed: 0, train_fraction: 0.8, normal_ci: false }
    }
}

/// Mean and two-sided 95% interval of a sample.
///
/// Returns `(mean, (low, high), degenerate)`; with one observation the
/// interval collapses to the point and `degenerate` is set.
pub fn mean_ci95(sample: &[f64], normal: bool) -> (f64, (f64, f64), bool) {
    let n = sample.len();
    let mean = sample.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, (mean, mean), true);
    }
    let var = sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let q = if normal {
        1.959_963_984_540_054
    } else {
        StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive dof").inverse_cdf(0.975)
    };
    let half = q * var.sqrt() / (n as f64).sqrt();
    (mean, (mean - half, mean + half), false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedEval {
    pub features: Vec<String>,
    pub seeds: Vec<u64>,
    pub runs: Vec<EvalMetrics>,
    pub mean_mae: f64,
    pub mean_mre: f64,
    pub mre_ci_95: (f64, f64),
    pub degenerate_ci: bool,
}

impl RepeatedEval {
    pub fn ci_width(&self) -> f64 {
        self.mre_ci_95.1 - self.mre_ci_95.0
    }
}

/// Evaluates `model` on `features` over `cfg.runs` random splits, run `i`
/// using seed `base_seed + i` for both the split and the model.
///
/// Rows missing any of the features or the target are excluded up front.
pub fn evaluate_features(
    ds: &PanelDataset,
    features: &[String],
    model: &ModelSpec,
    cfg: &EvalConfig,
) -> Result<RepeatedEval> {
    if cfg.runs == 0 {
        return Err(EvalError::Invalid("runs must be positive".into()));
    }
    if features.is_empty() {
        return Err(EvalError::Invalid("no features to evaluate".into()));
    }
    let cols = features.iter().map(|f| ds.column_index(f)).collect::<std::result::Result<Vec<_>, _>>()?;
    let t = ds.target_index();
    let mut all = cols.clone();
    all.push(t);
    let sub = ds.select_rows(&ds.complete_rows(&all));
    let x = sub.matrix(&(0..sub.n_rows()).collect::<Vec<_>>(), &cols);
    let y = sub.values().column(t).to_owned();

    let seeds: Vec<u64> = (0..cfg.runs as u64).map(|i| cfg.base_seed.wrapping_add(i)).collect();
    let one_run = |seed: u64| -> Result<EvalMetrics> {
        let (train, test) = split_indices(&sub, &SplitSpec::random(cfg.train_fraction, seed))?;
        let spec = ModelSpec { seed, ..*model };
        let fitted = regress::fit(&spec, x.select(ndarray::Axis(0), &train).view(), y.select(ndarray::Axis(0), &train).view())?;
        let pred = fitted.predict(x.select(ndarray::Axis(0), &test).view())?;
        let actual: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        EvalMetrics::score(pred.as_slice().expect("contiguous"), &actual)
    };
    let runs = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| one_run(seed).map_err(|e| EvalError::Run { run: i, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    let mean_mae = runs.iter().map(|r| r.mae).sum::<f64>() / runs.len() as f64;
    let mres: Vec<f64> = runs.iter().map(|r| r.mre_percent).collect();
    let (mean_mre, mre_ci_95, degenerate_ci) = mean_ci95(&mres, cfg.normal_ci);
    Ok(RepeatedEval { features: features.to_vec(), seeds, runs, mean_mae, mean_mre, mre_ci_95, degenerate_ci })
}

/// [`evaluate_features`] on the top `n_features` of a ranking.
pub fn repeated_eval(
    ds: &PanelDataset,
    ranking: &FeatureRanking,
    n_features: usize,
    model: &ModelSpec,
    cfg: &EvalConfig,
) -> Result<RepeatedEval> {
    if n_features == 0 || n_features > ranking.len() {
        return Err(EvalError::Invalid(format!(
            "n_features {n_features} outside 1..={}",
            ranking.len()
        )));
    }
    evaluate_features(ds, &ranking.top(n_features), model, cfg)
}

fn write_trajectory<W: Write>(mut w: W, rows: impl Iterator<Item = (usize, f64, (f64, f64))>) -> std::io::Result<()> {
    writeln!(w, "n_or_step,mean_mre,ci_low,ci_high")?;
    for (i, m, (lo, hi)) in rows {
        writeln!(w, "{i},{},{},{}", fmt_sig12(m), fmt_sig12(lo), fmt_sig12(hi))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub eval: RepeatedEval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub ranking: Vec<String>,
    pub per_n: Vec<SweepPoint>,
    pub best_n: usize,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_trajectory(w, self.per_n.iter().map(|p| (p.n, p.eval.mean_mre, p.eval.mre_ci_95)))
    }
}

/// Repeated evaluation for each `n` in `n_values` (defaults to
/// `1..=ranking.len()`); the best `n` has the lowest mean MRE, smaller `n`
/// winning ties.
pub fn top_n_sweep(
    ds: &PanelDataset,
    ranking: &FeatureRanking,
    model: &ModelSpec,
    n_values: Option<&[usize]>,
    cfg: &EvalConfig,
) -> Result<SweepReport> {
    if ranking.is_empty() {
        return Err(EvalError::Invalid("ranking is empty".into()));
    }
    let all: Vec<usize> = (1..=ranking.len()).collect();
    let ns = n_values.unwrap_or(&all);
    if ns.is_empty() {
        return Err(EvalError::Invalid("no sweep points".into()));
    }
    let per_n = ns
        .iter()
        .map(|&n| Ok(SweepPoint { n, eval: repeated_eval(ds, ranking, n, model, cfg)? }))
        .collect::<Result<Vec<_>>>()?;
    let best = per_n
        .iter()
        .min_by(|a, b| a.eval.mean_mre.total_cmp(&b.eval.mean_mre).then(a.n.cmp(&b.n)))
        .expect("nonempty");
    Ok(SweepReport { ranking: ranking.names(), best_n: best.n, per_n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    AllButOne,
    Cumulative,
}

/// Which end of the ranking cumulative dropping starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropOrder {
    #[default]
    LeastFirst,
    MostFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationStep {
    pub dropped: Vec<String>,
    pub remaining: Vec<String>,
    pub eval: RepeatedEval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub mode: AblationMode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order: Option<DropOrder>,
    pub features: Vec<String>,
    pub baseline: RepeatedEval,
    pub steps: Vec<AblationStep>,
}

impl AblationReport {
    /// Trajectory CSV; step 0 is the baseline.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let base = std::iter::once((0, self.baseline.mean_mre, self.baseline.mre_ci_95));
        let steps = self.steps.iter().enumerate().map(|(i, s)| (i + 1, s.eval.mean_mre, s.eval.mre_ci_95));
        write_trajectory(w, base.chain(steps))
    }

    /// Index of the step with the highest mean MRE.
    pub fn worst_step(&self) -> usize {
        (0..self.steps.len())
            .max_by(|&a, &b| self.steps[a].eval.mean_mre.total_cmp(&self.steps[b].eval.mean_mre).then(b.cmp(&a)))
            .expect("ablation has steps")
    }

    /// Mean-MRE change of each step relative to the previous one (the
    /// baseline for step 0).
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = self.baseline.mean_mre;
        self.steps
            .iter()
            .map(|s| {
                let d = s.eval.mean_mre - prev;
                prev = s.eval.mean_mre;
                d
            })
            .collect()
    }
}

fn check_top(top: &[String]) -> Result<()> {
    if top.len() < 2 {
        return Err(EvalError::Invalid(format!("ablation needs at least 2 features, got {}", top.len())));
    }
    Ok(())
}

/// Baseline on all of `top` (most important first), then one step per
/// feature with that feature removed, in ranking order.
pub fn ablate_all_but_one(
    ds: &PanelDataset,
    top: &[String],
    model: &ModelSpec,
    cfg: &EvalConfig,
) -> Result<AblationReport> {
    check_top(top)?;
    let baseline = evaluate_features(ds, top, model, cfg)?;
    let steps = (0..top.len())
        .map(|i| {
            let remaining: Vec<String> = top.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, f)| f.clone()).collect();
            let eval = evaluate_features(ds, &remaining, model, cfg)?;
            Ok(AblationStep { dropped: vec![top[i].clone()], remaining, eval })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport { mode: AblationMode::AllButOne, order: None, features: top.to_vec(), baseline, steps })
}

/// Baseline on all of `top`, then step `i` evaluates the set with `i`
/// features removed, down to a single feature. `LeastFirst` removes from
/// the bottom of the ranking, `MostFirst` from the top.
pub fn ablate_cumulative(
    ds: &PanelDataset,
    top: &[String],
    model: &ModelSpec,
    cfg: &EvalConfig,
    order: DropOrder,
) -> Result<AblationReport> {
    check_top(top)?;
    let n = top.len();
    let baseline = evaluate_features(ds, top, model, cfg)?;
    let steps = (1..n)
        .map(|i| {
            let (remaining, dropped) = match order {
                DropOrder::LeastFirst => (top[..n - i].to_vec(), top[n - i..].iter().rev().cloned().collect()),
                DropOrder::MostFirst => (top[i..].to_vec(), top[..i].to_vec()),
            };
            let eval = evaluate_features(ds, &remaining, model, cfg)?;
            Ok(AblationStep { dropped, remaining, eval })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport { mode: AblationMode::Cumulative, order: Some(order), features: top.to_vec(), baseline, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastModel {
    Var,
    Lstm,
}

impl ForecastModel {
    pub fn name(self) -> &'static str {
        match self {
            ForecastModel::Var => "var",
            ForecastModel::Lstm => "lstm",
        }
    }
}

impl std::str::FromStr for ForecastModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "var" => Ok(Self::Var),
            "lstm" => Ok(Self::Lstm),
            _ => Err(format!("unknown forecast model `{s}`; expected one of var, lstm")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub horizon: usize,
    /// Largest VAR order considered; lowered automatically for short series.
    pub var_max_lag: usize,
    pub lstm: LstmConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self { horizon: 30, var_max_lag: 7, lstm: LstmConfig::default() }
    }
}

/// Largest VAR order the training length supports, capped at `p_max`.
fn feasible_var_order(t: usize, k: usize, p_max: usize) -> usize {
    (1..=p_max).rev().find(|&p| t >= k * p + p + 2).unwrap_or(1)
}

/// Holds out the last `horizon` days of `region`, fits `model` on the
/// earlier rows of `features` plus the target, forecasts recursively and
/// scores the target against the held-out days (MAE, MRE and the DTW
/// distance between the two curves).
///
/// Forecasts of percent columns are clipped to `[0, 100]`. A warning is
/// attached when the training target fails the ADF test at 5%.
pub fn forecast_backtest(
    ds: &PanelDataset,
    region: &str,
    features: &[String],
    model: ForecastModel,
    cfg: &BacktestConfig,
) -> Result<ForecastResult> {
    let target = ds.target().to_string();
    let mut series: Vec<String> = features.iter().filter(|f| **f != target).cloned().collect();
    series.push(target.clone());
    let cols = series.iter().map(|f| ds.column_index(f)).collect::<std::result::Result<Vec<_>, _>>()?;
    let rows = ds
        .region_rows(region)
        .map_err(|_| EvalError::Invalid(format!("unknown region `{region}`")))?;
    let data: Array2<f64> = ds.matrix(&rows, &cols);
    if data.iter().any(|v| v.is_nan()) {
        return Err(EvalError::Invalid(format!("region `{region}` has missing values in the forecast columns")));
    }
    let h = cfg.horizon;
    if data.nrows() <= h {
        return Err(EvalError::Invalid(format!("region `{region}` has {} days, horizon is {h}", data.nrows())));
    }
    let cut = data.nrows() - h;
    let train = data.slice(s![..cut, ..]);
    let k = series.len();
    let t_idx = k - 1;

    let mut warnings = Vec::new();
    match tseries::adf_test(train.column(t_idx), None) {
        Ok(r) if !r.reject_at_5pct => warnings.push(format!(
            "target not stationary by ADF at 5% (statistic {:.4}, {} lags)",
            r.statistic, r.lags_used
        )),
        Ok(_) => {}
        Err(e) => warnings.push(format!("ADF test skipped: {e}")),
    }

    let mut result = match model {
        ForecastModel::Var => {
            let p_max = feasible_var_order(cut, k, cfg.var_max_lag);
            let m = tseries::var_fit(train, p_max)?;
            tseries::var_forecast(&m, train, h)?
        }
        ForecastModel::Lstm => {
            let m = tseries::lstm_fit(train, cfg.lstm)?;
            tseries::lstm_forecast(&m, train, h)?
        }
    };

    let percent: Vec<bool> = cols.iter().map(|&c| ds.columns()[c].units == Units::Percent).collect();
    let dates = ds.rows();
    for (i, step) in result.per_step.iter_mut().enumerate() {
        for (v, &pct) in step.values.iter_mut().zip(&percent) {
            if pct {
                *v = v.clamp(0.0, 100.0);
            }
        }
        step.forecast = step.values[t_idx];
        step.actual = Some(data[[cut + i, t_idx]]);
        step.date = Some(dates[rows[cut + i]].date.to_string());
    }
    result.series = series;
    result.target_index = t_idx;
    result.region = Some(region.to_string());
    result.model = Some(model.name().to_string());
    if h > 0 {
        let pred = result.target_forecast();
        let actual: Vec<f64> = result.per_step.iter().map(|s| s.actual.expect("set above")).collect();
        result.mae = Some(mae(&pred, &actual)?);
        result.mre = Some(mre(&pred, &actual)?);
        result.dtw_distance = Some(dtw(&pred, &actual).expect("nonempty series").distance);
    }
    result.warnings = warnings;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{generate_synthetic, ColumnKind, ColumnMeta, Record, SyntheticSpec};
    use chrono::NaiveDate;

    #[test]
    fn metric_examples() {
        assert_eq!(mae(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), 1.5);
        assert_eq!(mae(&[0.0], &[5.0]).unwrap(), 5.0);
        assert_eq!(mre(&[2.0], &[1.0]).unwrap(), 50.0);
        assert_eq!(mre(&[1.0], &[0.0]).unwrap(), 100.0);
        assert_eq!(mre(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(EvalError::ShapeMismatch { .. })));
        assert!(matches!(mre(&[], &[]), Err(EvalError::Empty)));
        assert!(mre(&[0.0], &[-0.5]).is_ok());
        assert!(matches!(mre(&[0.0], &[-1.0]), Err(EvalError::NegativeActual(_))));
    }

    #[test]
    fn ci_cases() {
        let (m, ci, deg) = mean_ci95(&[4.0; 20], false);
        assert_eq!((m, ci, deg), (4.0, (4.0, 4.0), false));
        let (m, ci, deg) = mean_ci95(&[7.0], false);
        assert_eq!((m, ci, deg), (7.0, (7.0, 7.0), true));
        // 19 degrees of freedom: t = 2.093
        let sample: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let (m, (lo, hi), _) = mean_ci95(&sample, false);
        let sd = (sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 19.0).sqrt();
        assert!(((hi - m) / (sd / 20f64.sqrt()) - 2.093).abs() < 1e-3);
        assert!(lo < m);
    }

    fn planted() -> PanelDataset {
        generate_synthetic(&SyntheticSpec { n_regions: 3, n_days: 60, n_signals: 4, ..Default::default() }).unwrap()
    }

    #[test]
    fn structural_counts() {
        let ds = planted();
        let feats = ds.feature_names();
        let model = ModelSpec { gbt_stages: 5, ..ModelSpec::default() };
        let cfg = EvalConfig { runs: 2, ..Default::default() };
        let r = ablate_all_but_one(&ds, &feats[..3], &model, &cfg).unwrap();
        assert_eq!(r.steps.len(), 3);
        let r = ablate_cumulative(&ds, &feats[..3], &model, &cfg, DropOrder::LeastFirst).unwrap();
        assert_eq!(r.steps.iter().map(|s| s.remaining.len()).collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!(r.steps[1].remaining, vec![feats[0].clone()]);
        let r = ablate_cumulative(&ds, &feats[..3], &model, &cfg, DropOrder::MostFirst).unwrap();
        assert_eq!(r.steps[1].remaining, vec![feats[2].clone()]);
        assert!(ablate_all_but_one(&ds, &feats[..1], &model, &cfg).is_err());
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    }

    #[test]
    fn single_run_is_degenerate() {
        let ds = planted();
        let cfg = EvalConfig { runs: 1, ..Default::default() };
        let r = evaluate_features(&ds, &ds.feature_names(), &ModelSpec::new(regress::ModelKind::Linear), &cfg).unwrap();
        assert!(r.degenerate_ci);
        assert_eq!(r.mre_ci_95, (r.mean_mre, r.mean_mre));
    }

    #[test]
    fn sweep_single_feature_ranking() {
        let ds = planted();
        let ranking = FeatureRanking::from_scores(vec![(ds.feature_names()[0].clone(), 1.0)], ds.n_rows(), vec![]);
        let cfg = EvalConfig { runs: 2, ..Default::default() };
        let r = top_n_sweep(&ds, &ranking, &ModelSpec::new(regress::ModelKind::Linear), None, &cfg).unwrap();
        assert_eq!((r.per_n.len(), r.best_n), (1, 1));
    }

    fn var1_region(t: usize) -> PanelDataset {
        let cols = vec![
            ColumnMeta::new("a", ColumnKind::WeightedSignal, Units::Unitless),
            ColumnMeta::new("target", ColumnKind::Target, Units::Unitless),
        ];
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let (mut a, mut b) = (8.0, -6.0);
        let records = (0..t)
            .map(|i| {
                let rec = Record::new("X", start + chrono::Duration::days(i as i64), vec![a, b]);
                (a, b) = (2.0 + 0.6 * a - 0.2 * b, 5.0 + 0.3 * a + 0.4 * b);
                rec
            })
            .collect();
        PanelDataset::from_records(cols, "target", records).unwrap()
    }

    #[test]
    fn noiseless_var_backtest_is_exact() {
        let ds = var1_region(80);
        let cfg = BacktestConfig { horizon: 30, var_max_lag: 1, ..Default::default() };
        let r = forecast_backtest(&ds, "X", &["a".into()], ForecastModel::Var, &cfg).unwrap();
        assert_eq!(r.per_step.len(), 30);
        assert!(r.mre.unwrap() < 1e-6, "{:?}", r.mre);
        assert!(r.dtw_distance.unwrap() < 1e-4);
        assert_eq!(r.per_step[0].date.as_deref(), Some("2021-02-20"));
        let again = forecast_backtest(&ds, "X", &["a".into()], ForecastModel::Var, &cfg).unwrap();
        assert_eq!(r, again);
        let zero = forecast_backtest(&ds, "X", &["a".into()], ForecastModel::Var, &BacktestConfig { horizon: 0, ..cfg })
            .unwrap();
        assert!(zero.per_step.is_empty() && zero.mre.is_none() && zero.mae.is_none());
        assert!(forecast_backtest(&ds, "nowhere", &["a".into()], ForecastModel::Var, &cfg).is_err());
    }
}
