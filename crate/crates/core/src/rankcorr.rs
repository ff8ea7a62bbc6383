//! Correlation studies and univariate F-statistic feature ranking.

use std::io::Write;

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::numfmt::fmt_sig12;
use crate::panel::{PanelDataset, PanelError};

/// Stand-in for an infinite F statistic (perfect linear fit).
pub const F_SENTINEL: f64 = 1e308;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("input has zero variance")]
    ConstantInput,
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("correlation {0} outside [-1, 1]")]
    InvalidCorrelation(f64),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RankError>;

/// Sample product-moment correlation.
pub fn pearson(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(RankError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(RankError::DegenerateSample(format!("{} points, need at least 2", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RankError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `r` under the null of zero correlation, from the
/// Student-t distribution with `n - 2` degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(RankError::DegenerateSample(format!("n = {n}, need at least 3")));
    }
    if !(r.abs() <= 1.0) {
        return Err(RankError::InvalidCorrelation(r));
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t2 = r * r * df / (1.0 - r * r);
    // P(|T| > t) = I_{df / (df + t²)}(df / 2, 1 / 2)
    let p = beta_reg(df / 2.0, 0.5, df / (df + t2));
    Ok(p.clamp(0.0, 1.0))
}

/// F statistic of a one-feature linear regression, `r² / (1 - r²) · (n - 2)`.
pub fn f_from_r(r: f64, n: usize) -> f64 {
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        F_SENTINEL
    } else {
        (r * r / denom * (n as f64 - 2.0)).min(F_SENTINEL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub name: String,
    pub f_stat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub entries: Vec<RankEntry>,
    pub n_samples: usize,
    pub warnings: Vec<String>,
}

impl FeatureRanking {
    /// Sorts by F descending, name ascending, and assigns ranks 1..k.
    pub fn from_scores(scores: Vec<(String, f64)>, n_samples: usize, warnings: Vec<String>) -> Self {
        let mut scores = scores;
        scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let entries = scores
            .into_iter()
            .enumerate()
            .map(|(i, (name, f_stat))| RankEntry { rank: i + 1, name, f_stat })
            .collect();
        Self { entries, n_samples, warnings }
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn top(&self, n: usize) -> Vec<String> {
        self.entries.iter().take(n).map(|e| e.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `rank,signal,f_statistic` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rank,signal,f_statistic")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.rank, e.name, fmt_sig12(e.f_stat))?;
        }
        Ok(())
    }
}

/// Per-column F statistics of `x` against `y`, plus warnings for constant
/// columns (F = 0) and perfect fits (F = sentinel).
pub fn f_statistics(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<(Vec<f64>, Vec<Option<String>>)> {
    let n = y.len();
    if x.nrows() != n {
        return Err(RankError::LengthMismatch(x.nrows(), n));
    }
    if n < 3 {
        return Err(RankError::DegenerateSample(format!("{n} complete rows, need at least 3")));
    }
    let per_col: Vec<Result<(f64, Option<String>)>> = (0..x.ncols())
        .into_par_iter()
        .map(|j| match pearson(x.column(j), y) {
            Ok(r) => {
                let f = f_from_r(r, n);
                let warn = (f == F_SENTINEL).then(|| "perfect fit".to_string());
                Ok((f, warn))
            }
            Err(RankError::ConstantInput) => Ok((0.0, Some("constant input".to_string()))),
            Err(e) => Err(e),
        })
        .collect();
    let mut fs = Vec::with_capacity(per_col.len());
    let mut warnings = Vec::with_capacity(per_col.len());
    for r in per_col {
        let (f, w) = r?;
        fs.push(f);
        warnings.push(w);
    }
    Ok((fs, warnings))
}

/// Ranks `features` by their univariate F statistic against `target` over
/// rows complete in every listed column.
pub fn f_regression(ds: &PanelDataset, features: &[String], target: &str) -> Result<FeatureRanking> {
    let feat_idx = features
        .iter()
        .map(|f| ds.column_index(f))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let t = ds.column_index(target)?;
    let mut all = feat_idx.clone();
    all.push(t);
    let rows = ds.complete_rows(&all);
    let x = ds.matrix(&rows, &feat_idx);
    let y = ds.matrix(&rows, &[t]).column(0).to_owned();
    let (fs, warns) = f_statistics(x.view(), y.view())?;
    let mut warnings = Vec::new();
    for (name, w) in features.iter().zip(&warns) {
        if let Some(w) = w {
            log::warn!("feature `{name}`: {w}");
            warnings.push(format!("{name}: {w}"));
        }
    }
    Ok(FeatureRanking::from_scores(
        features.iter().cloned().zip(fs).collect(),
        rows.len(),
        warnings,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub col_a: String,
    pub col_b: String,
    /// `None` when either column is constant over the sample.
    pub r: Option<f64>,
    pub p_value: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub columns: Vec<String>,
    pub matrix: Vec<Vec<Option<f64>>>,
    pub pairs: Vec<PairCorrelation>,
    pub n: usize,
    pub highlight_threshold: f64,
}

impl CorrelationReport {
    pub fn flagged(&self) -> impl Iterator<Item = &PairCorrelation> {
        self.pairs.iter().filter(|p| p.flagged)
    }

    /// `col_a,col_b,r,p_value` for flagged pairs.
    pub fn write_flagged_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "col_a,col_b,r,p_value")?;
        for p in self.flagged() {
            writeln!(
                w,
                "{},{},{},{}",
                p.col_a,
                p.col_b,
                fmt_sig12(p.r.unwrap_or(f64::NAN)),
                fmt_sig12(p.p_value.unwrap_or(f64::NAN))
            )?;
        }
        Ok(())
    }
}

/// Pairwise Pearson correlations over rows complete in every listed column.
/// Pairs with `|r| > highlight_threshold` are flagged.
pub fn correlation_matrix(
    ds: &PanelDataset,
    cols: &[String],
    highlight_threshold: f64,
) -> Result<CorrelationReport> {
    let idx = cols
        .iter()
        .map(|c| ds.column_index(c))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let rows = ds.complete_rows(&idx);
    if rows.len() < 2 {
        return Err(RankError::DegenerateSample(format!("{} complete rows, need at least 2", rows.len())));
    }
    let data = ds.matrix(&rows, &idx);
    let k = cols.len();
    let mut matrix = vec![vec![Some(0.0); k]; k];
    let mut pairs = Vec::new();
    for i in 0..k {
        matrix[i][i] = Some(1.0);
        for j in (i + 1)..k {
            let r = match pearson(data.column(i), data.column(j)) {
                Ok(r) => Some(r),
                Err(RankError::ConstantInput) => None,
                Err(e) => return Err(e),
            };
            let p_value = match r {
                Some(r) if rows.len() >= 3 => Some(pearson_p_value(r, rows.len())?),
                _ => None,
            };
            matrix[i][j] = r;
            matrix[j][i] = r;
            pairs.push(PairCorrelation {
                col_a: cols[i].clone(),
                col_b: cols[j].clone(),
                r,
                p_value,
                flagged: r.is_some_and(|r| r.abs() > highlight_threshold),
            });
        }
    }
    Ok(CorrelationReport {
        columns: cols.to_vec(),
        matrix,
        pairs,
        n: rows.len(),
        highlight_threshold,
    })
}
