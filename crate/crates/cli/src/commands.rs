use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::Serialize;
use sympcast::evalharness::{
    ablate_all_but_one, ablate_cumulative, evaluate_features, forecast_backtest, top_n_sweep, BacktestConfig,
    ForecastModel,
};
use sympcast::panel::{generate_synthetic, write_csv_to, AuditEntry, ColumnMeta, PanelDataset};
use sympcast::rankcorr::{correlation_matrix, f_regression};
use sympcast::shapecluster::{agglomerate, dtw, region_profiles, sample_cross_cluster, Merge, ProfileMode};
use sympcast::tseries::{adf_test, AdfResult};
use sympcast::{DropOrder, EvalConfig, FeatureRanking, Linkage, ModelKind, ModelSpec, SyntheticSpec};

use crate::config::{Ctx, DataFlags};
use crate::output::{file_token, Sink};
use crate::{AblateMode, OrderArg, ProfileArg, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn csv_panel(ds: &PanelDataset) -> impl FnOnce(&mut Vec<u8>) -> std::io::Result<()> + '_ {
    move |buf| write_csv_to(ds, buf).map_err(std::io::Error::other)
}

pub struct SynthArgs {
    pub regions: Option<usize>,
    pub days: Option<usize>,
    pub signals: Option<usize>,
    pub weights: Option<Vec<f64>>,
    pub noise: Option<f64>,
    pub ar: Option<f64>,
}

#[derive(Serialize)]
struct SynthReport<'a> {
    spec: &'a SyntheticSpec,
    rows: usize,
    regions: usize,
    target: &'a str,
}

pub fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let base = ctx.synthetic_spec();
    let spec = SyntheticSpec {
        n_regions: a.regions.unwrap_or(base.n_regions),
        n_days: a.days.unwrap_or(base.n_days),
        n_signals: a.signals.unwrap_or(base.n_signals),
        planted_weights: a.weights.unwrap_or(base.planted_weights),
        noise_sigma: a.noise.unwrap_or(base.noise_sigma),
        ar_coefficient: a.ar.unwrap_or(base.ar_coefficient),
        seed: base.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let ds = generate_synthetic(&spec)?;
    let mut sink = Sink::new(&ctx.out)?;
    sink.csv("synthetic.csv", csv_panel(&ds))?;
    sink.json(
        "synthetic_spec.json",
        "synthetic_spec",
        &SynthReport { spec: &spec, rows: ds.n_rows(), regions: ds.regions().len(), target: ds.target() },
    )?;
    sink.finish();
    Ok(())
}

#[derive(Serialize)]
struct IngestReport<'a> {
    rows: usize,
    regions: &'a [String],
    target: &'a str,
    columns: &'a [ColumnMeta],
    flagged_rows: usize,
    audit: &'a [AuditEntry],
}

pub fn ingest(ctx: &Ctx, data: &DataFlags) -> Result<()> {
    let loaded = ctx.load(data)?;
    let ds = &loaded.ds;
    let mut sink = Sink::new(&ctx.out)?;
    sink.csv("panel.csv", csv_panel(ds))?;
    sink.json(
        "ingest.json",
        "ingest",
        &IngestReport {
            rows: ds.n_rows(),
            regions: ds.regions(),
            target: ds.target(),
            columns: ds.columns(),
            flagged_rows: ds.flagged().iter().filter(|&&f| f).count(),
            audit: &loaded.audit,
        },
    )?;
    sink.finish();
    Ok(())
}

#[derive(Serialize)]
struct PruneReport<'a> {
    kept: Vec<String>,
    dropped: &'a [AuditEntry],
}

pub fn prune(ctx: &Ctx, data: &DataFlags) -> Result<()> {
    let loaded = ctx.load(data)?;
    let (pruned, dropped) = loaded.pruned()?;
    let mut sink = Sink::new(&ctx.out)?;
    sink.csv("pruned.csv", csv_panel(&pruned))?;
    sink.json("prune.json", "prune", &PruneReport { kept: pruned.feature_names(), dropped: &dropped })?;
    sink.finish();
    Ok(())
}

/// Pruned dataset and its F ranking; shared by the modeling commands.
fn ranked(ctx: &Ctx, data: &DataFlags) -> Result<(PanelDataset, FeatureRanking)> {
    let loaded = ctx.load(data)?;
    let (ds, _) = loaded.pruned()?;
    let features = ds.feature_names();
    if features.is_empty() {
        return Err(usage("no features left after pruning"));
    }
    let ranking = f_regression(&ds, &features, ds.target())?;
    Ok((ds, ranking))
}

pub fn rank(ctx: &Ctx, data: &DataFlags) -> Result<()> {
    let (_, ranking) = ranked(ctx, data)?;
    let mut sink = Sink::new(&ctx.out)?;
    sink.csv("ranking.csv", |b| ranking.write_csv(b))?;
    sink.json("ranking.json", "ranking", &ranking)?;
    sink.finish();
    Ok(())
}

pub fn correlate(ctx: &Ctx, data: &DataFlags, columns: Option<Vec<String>>, threshold: Option<f64>) -> Result<()> {
    let loaded = ctx.load(data)?;
    let ds = &loaded.ds;
    let cols = match columns {
        Some(c) => c,
        None => {
            let mut c = ds.feature_names();
            c.push(ds.target().to_string());
            c
        }
    };
    if cols.len() < 2 {
        return Err(usage("correlation needs at least two columns"));
    }
    let threshold = threshold.or(ctx.file.correlation_threshold).unwrap_or(0.9);
    let report = correlation_matrix(ds, &cols, threshold)?;
    let mut sink = Sink::new(&ctx.out)?;
    sink.json("correlation.json", "correlation", &report)?;
    sink.csv("correlation_flagged.csv", |b| report.write_flagged_csv(b))?;
    sink.finish();
    Ok(())
}

pub fn model_spec(ctx: &Ctx, flag: Option<&str>) -> Result<ModelSpec> {
    let mut spec = ctx.file.model.unwrap_or_default();
    if let Some(name) = flag {
        spec.kind = ModelKind::from_str(name).map_err(usage)?;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn eval_config(ctx: &Ctx, train_fraction: Option<f64>, normal_ci: bool) -> Result<EvalConfig> {
    let train_fraction = train_fraction.or(ctx.file.train_fraction).unwrap_or(0.8);
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(usage(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    Ok(EvalConfig {
        runs: ctx.runs,
        base_seed: ctx.seed,
        train_fraction,
        normal_ci: normal_ci || ctx.file.normal_ci.unwrap_or(false),
    })
}

pub struct PredictArgs {
    pub model: Option<String>,
    pub top_n: Option<usize>,
    pub max_n: Option<usize>,
    pub train_fraction: Option<f64>,
    pub normal_ci: bool,
    pub plot_data: bool,
}

#[derive(Serialize)]
struct SingleEval<'a> {
    model: &'a ModelSpec,
    n_features: usize,
    eval: &'a sympcast::RepeatedEval,
}

#[derive(Serialize)]
struct SweepOut<'a> {
    model: &'a ModelSpec,
    #[serde(flatten)]
    sweep: &'a sympcast::SweepReport,
}

pub fn predict(ctx: &Ctx, data: &DataFlags, a: PredictArgs) -> Result<()> {
    let spec = model_spec(ctx, a.model.as_deref())?;
    let cfg = eval_config(ctx, a.train_fraction, a.normal_ci)?;
    let (ds, ranking) = ranked(ctx, data)?;
    let mut sink = Sink::new(&ctx.out)?;
    match a.top_n.or(ctx.file.top_n) {
        Some(n) => {
            if n == 0 || n > ranking.len() {
                return Err(usage(format!("--top-n {n} outside 1..={}", ranking.len())));
            }
            let eval = evaluate_features(&ds, &ranking.top(n), &spec, &cfg)?;
            sink.json("evaluation.json", "evaluation", &SingleEval { model: &spec, n_features: n, eval: &eval })?;
        }
        None => {
            let max_n = a.max_n.or(ctx.file.max_n).unwrap_or(ranking.len()).min(ranking.len());
            if max_n == 0 {
                return Err(usage("--max-n must be positive"));
            }
            let ns: Vec<usize> = (1..=max_n).collect();
            let sweep = top_n_sweep(&ds, &ranking, &spec, Some(&ns), &cfg)?;
            sink.json("sweep.json", "sweep", &SweepOut { model: &spec, sweep: &sweep })?;
            sink.csv("sweep.csv", |b| sweep.write_csv(b))?;
            if a.plot_data || ctx.file.plot_data.unwrap_or(false) {
                sink.csv("fig_error_vs_top_n.csv", |b| sweep.write_csv(b))?;
            }
        }
    }
    sink.finish();
    Ok(())
}

pub struct ForecastArgs {
    pub model: Option<String>,
    pub horizon: Option<usize>,
    pub regions: Vec<String>,
    pub features: Option<usize>,
    pub max_lag: Option<usize>,
    pub epochs: Option<usize>,
    pub hidden: Option<usize>,
}

pub fn forecast(ctx: &Ctx, data: &DataFlags, a: ForecastArgs) -> Result<()> {
    let model_name = a.model.or_else(|| ctx.file.forecast_model.clone()).unwrap_or_else(|| "var".into());
    let model = ForecastModel::from_str(&model_name).map_err(usage)?;
    let mut lstm = ctx.file.lstm.unwrap_or_default();
    lstm.seed = ctx.seed;
    if let Some(e) = a.epochs {
        lstm.epochs = e;
    }
    if let Some(h) = a.hidden {
        lstm.hidden = h;
    }
    let cfg = BacktestConfig {
        horizon: a.horizon.or(ctx.file.horizon).unwrap_or(30),
        var_max_lag: a.max_lag.or(ctx.file.var_max_lag).unwrap_or(7),
        lstm,
    };
    let (ds, ranking) = ranked(ctx, data)?;
    let n_feat = a.features.or(ctx.file.forecast_features).unwrap_or(3).min(ranking.len());
    let features = ranking.top(n_feat);
    let regions = if a.regions.is_empty() { ds.regions().to_vec() } else { a.regions };
    for r in &regions {
        if !ds.regions().contains(r) {
            return Err(usage(format!("unknown region `{r}`")));
        }
    }
    let mut sink = Sink::new(&ctx.out)?;
    for region in &regions {
        let result = forecast_backtest(&ds, region, &features, model, &cfg)
            .with_context(|| format!("forecasting region {region}"))?;
        for w in &result.warnings {
            log::warn!("{region}: {w}");
        }
        let stem = format!("forecast_{}_{}", file_token(region), model.name());
        sink.json(&format!("{stem}.json"), "forecast", &result)?;
        sink.csv(&format!("{stem}.csv"), |b| result.write_plot_csv(b))?;
    }
    sink.finish();
    Ok(())
}

pub struct AblateArgs {
    pub mode: AblateMode,
    pub top: Option<usize>,
    pub order: OrderArg,
    pub model: Option<String>,
    pub train_fraction: Option<f64>,
    pub plot_data: bool,
}

#[derive(Serialize)]
struct AblationOut<'a> {
    model: &'a ModelSpec,
    #[serde(flatten)]
    report: &'a sympcast::AblationReport,
}

pub fn ablate(ctx: &Ctx, data: &DataFlags, a: AblateArgs) -> Result<()> {
    let spec = model_spec(ctx, a.model.as_deref())?;
    let cfg = eval_config(ctx, a.train_fraction, false)?;
    let (ds, ranking) = ranked(ctx, data)?;
    let n = a.top.or(ctx.file.ablation_top).unwrap_or(10);
    if n < 2 || n > ranking.len() {
        return Err(usage(format!("--top {n} outside 2..={}", ranking.len())));
    }
    let top = ranking.top(n);
    let (report, stem, fig) = match a.mode {
        AblateMode::AllButOne => (ablate_all_but_one(&ds, &top, &spec, &cfg)?, "ablation_all_but_one", "fig_all_but_one_mre.csv"),
        AblateMode::Cumulative => {
            let order = match a.order {
                OrderArg::LeastFirst => DropOrder::LeastFirst,
                OrderArg::MostFirst => DropOrder::MostFirst,
            };
            (ablate_cumulative(&ds, &top, &spec, &cfg, order)?, "ablation_cumulative", "fig_cumulative_drop_mre.csv")
        }
    };
    let mut sink = Sink::new(&ctx.out)?;
    sink.json(&format!("{stem}.json"), "ablation", &AblationOut { model: &spec, report: &report })?;
    sink.csv(&format!("{stem}.csv"), |b| report.write_csv(b))?;
    if a.plot_data || ctx.file.plot_data.unwrap_or(false) {
        sink.csv(fig, |b| report.write_csv(b))?;
    }
    sink.finish();
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum AdfOutcome {
    Ok(AdfResult),
    Err { error: String },
}

#[derive(Serialize)]
struct AdfReport {
    column: String,
    regions: BTreeMap<String, AdfOutcome>,
}

pub fn adf(ctx: &Ctx, data: &DataFlags, column: Option<String>, max_lag: Option<usize>) -> Result<()> {
    let loaded = ctx.load(data)?;
    let ds = &loaded.ds;
    let column = column.unwrap_or_else(|| ds.target().to_string());
    let j = ds.column_index(&column).map_err(|e| usage(e.to_string()))?;
    let mut regions = BTreeMap::new();
    for region in ds.regions() {
        let rows = ds.region_rows(region)?;
        let series: Vec<f64> = rows.iter().map(|&i| ds.values()[[i, j]]).filter(|v| !v.is_nan()).collect();
        let outcome = match adf_test(ndarray::ArrayView1::from(&series), max_lag) {
            Ok(r) => AdfOutcome::Ok(r),
            Err(e) => {
                log::warn!("{region}: {e}");
                AdfOutcome::Err { error: e.to_string() }
            }
        };
        regions.insert(region.clone(), outcome);
    }
    let mut sink = Sink::new(&ctx.out)?;
    sink.json("adf.json", "adf", &AdfReport { column, regions })?;
    sink.finish();
    Ok(())
}

#[derive(Serialize)]
struct ClusterReport {
    k: usize,
    linkage: Linkage,
    profile: ProfileMode,
    features: Vec<String>,
    assignment: BTreeMap<String, usize>,
    trace: Vec<Merge>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample: Option<Vec<String>>,
}

pub fn cluster(
    ctx: &Ctx,
    data: &DataFlags,
    k: Option<usize>,
    linkage: Option<String>,
    profile: ProfileArg,
    sample: Option<usize>,
) -> Result<()> {
    let loaded = ctx.load(data)?;
    let (ds, _) = loaded.pruned()?;
    let features = ds.feature_names();
    if features.is_empty() {
        return Err(usage("no features left after pruning"));
    }
    let k = k.or(ctx.file.clusters).unwrap_or(3);
    let linkage = match linkage.or_else(|| ctx.file.linkage.clone()) {
        Some(l) => Linkage::from_str(&l).map_err(|e| usage(e.to_string()))?,
        None => Linkage::default(),
    };
    let profile = match profile {
        ProfileArg::Mean => ProfileMode::Mean,
        ProfileArg::Flatten => ProfileMode::Flatten,
    };
    let profiles = region_profiles(&ds, &features, profile)?;
    let assign = agglomerate(&profiles, k, linkage).map_err(|e| usage(e.to_string()))?;
    let sample = sample
        .map(|n| sample_cross_cluster(&assign, n, ctx.seed).map_err(|e| usage(e.to_string())))
        .transpose()?;
    let mut sink = Sink::new(&ctx.out)?;
    sink.json(
        "cluster.json",
        "cluster",
        &ClusterReport {
            k,
            linkage,
            profile,
            features,
            assignment: assign.by_item(),
            trace: assign.linkage_trace.clone(),
            sample,
        },
    )?;
    sink.finish();
    Ok(())
}

/// Reads one numeric column from a headed CSV: `column` if given,
/// otherwise the last column. Blank cells are skipped.
fn read_series(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let j = match column {
        Some(c) => headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| usage(format!("{}: no column `{c}`", path.display())))?,
        None => headers.len().checked_sub(1).ok_or_else(|| usage(format!("{}: empty header", path.display())))?,
    };
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(j).unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| usage(format!("{} line {}: `{cell}` is not a number", path.display(), line + 2)))?;
        out.push(v);
    }
    Ok(out)
}

#[derive(Serialize)]
struct DtwReport {
    distance: f64,
    path: Vec<(usize, usize)>,
    len_a: usize,
    len_b: usize,
}

pub fn dtw_cmd(ctx: &Ctx, a: PathBuf, b: PathBuf, column: Option<String>) -> Result<()> {
    let sa = read_series(&a, column.as_deref())?;
    let sb = read_series(&b, column.as_deref())?;
    let r = dtw(&sa, &sb).map_err(|e| usage(e.to_string()))?;
    let mut sink = Sink::new(&ctx.out)?;
    sink.json("dtw.json", "dtw", &DtwReport { distance: r.distance, path: r.path, len_a: sa.len(), len_b: sb.len() })?;
    sink.finish();
    Ok(())
}
