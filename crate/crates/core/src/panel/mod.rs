//! Region × date × signal survey panels.
//!
//! A [`PanelDataset`] stores one row per observation (a region on a date,
//! optionally within a demographic bucket) and one column per survey
//! signal. Missing numeric cells are NaN. Demographic columns may carry
//! free text (e.g. `gender = female`), kept alongside the numeric matrix.

mod csvio;
mod prune;
mod schema;
mod split;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csvio::{ingest_csv, ingest_reader, write_csv, write_csv_to};
pub use prune::{prune_features, PruneConfig};
pub use schema::SchemaConfig;
pub use split::{split, split_indices, SplitMode, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec, SYNTHETIC_START, SYNTHETIC_TARGET};

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("missing header column `{0}`")]
    MissingHeader(String),
    #[error("target column `{0}` not found")]
    UnknownTargetColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("dataset is empty: {0}")]
    EmptyDataset(String),
    #[error("pruning rule `{rule}` would drop the target column `{target}`")]
    TargetWouldBeDropped { target: String, rule: String },
    #[error("insufficient rows: {0}")]
    InsufficientRows(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema parse error: {0}")]
    Schema(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PanelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Demographic,
    WeightedSignal,
    UnweightedSignal,
    TestingRelated,
    Derived,
    MeanScale,
    Target,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Percent,
    Count,
    Unitless,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    pub units: Units,
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, kind: ColumnKind, units: Units) -> Self {
        Self { name: name.into(), kind, units }
    }
}

/// One audit-log line: either a column or a source row, plus the reason it
/// was touched. Serialized as JSON lines `{"column"|"row": .., "reason": ..}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub row: Option<u64>,
    pub reason: String,
}

impl AuditEntry {
    pub fn column(name: &str, reason: impl Into<String>) -> Self {
        Self { column: Some(name.to_string()), row: None, reason: reason.into() }
    }

    pub fn row(line: u64, reason: impl Into<String>) -> Self {
        Self { column: None, row: Some(line), reason: reason.into() }
    }
}

/// Input row used to assemble a dataset in code.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub region: String,
    pub date: NaiveDate,
    pub values: Vec<f64>,
    /// Text cells by column index (demographic columns only).
    pub text: BTreeMap<usize, String>,
}

impl Record {
    pub fn new(region: impl Into<String>, date: NaiveDate, values: Vec<f64>) -> Self {
        Self { region: region.into(), date, values, text: BTreeMap::new() }
    }

    pub fn with_text(mut self, column: usize, value: impl Into<String>) -> Self {
        self.text.insert(column, value.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub region: usize,
    pub date: NaiveDate,
}

#[derive(Debug, Clone)]
pub struct PanelDataset {
    regions: Vec<String>,
    dates: Vec<NaiveDate>,
    columns: Vec<ColumnMeta>,
    target: usize,
    rows: Vec<RowKey>,
    values: Array2<f64>,
    text: BTreeMap<usize, Vec<String>>,
    flagged: Vec<bool>,
}

/// Missing cells (NaN) compare equal to each other.
impl PartialEq for PanelDataset {
    fn eq(&self, other: &Self) -> bool {
        self.regions == other.regions
            && self.dates == other.dates
            && self.columns == other.columns
            && self.target == other.target
            && self.rows == other.rows
            && self.text == other.text
            && self.flagged == other.flagged
            && self.values.dim() == other.values.dim()
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .all(|(a, b)| a == b || (a.is_nan() && b.is_nan()))
    }
}

impl PanelDataset {
    /// Assembles a dataset from records.
    ///
    /// Rows are ordered by region (first appearance), then date. A record
    /// repeating an earlier (region, date, demographic labels) triple is
    /// rejected, as is any percent-unit value outside `[0, 100]` unless
    /// the row is only flagged (see [`PanelDataset::flagged`]).
    pub fn from_records(
        columns: Vec<ColumnMeta>,
        target: &str,
        records: Vec<Record>,
    ) -> Result<Self> {
        let mut names = BTreeSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(PanelError::Invalid(format!("duplicate column `{}`", c.name)));
            }
        }
        let target_idx = columns
            .iter()
            .position(|c| c.name == target)
            .ok_or_else(|| PanelError::UnknownTargetColumn(target.to_string()))?;
        let extra_targets = columns
            .iter()
            .enumerate()
            .filter(|(i, c)| c.kind == ColumnKind::Target && *i != target_idx)
            .count();
        if extra_targets > 0 {
            return Err(PanelError::Invalid("more than one target column".into()));
        }
        let mut columns = columns;
        columns[target_idx].kind = ColumnKind::Target;

        let width = columns.len();
        let mut regions: Vec<String> = Vec::new();
        let mut region_idx: HashMap<String, usize> = HashMap::new();
        let mut keyed = Vec::with_capacity(records.len());
        for (order, rec) in records.into_iter().enumerate() {
            if rec.values.len() != width {
                return Err(PanelError::Invalid(format!(
                    "record {} has {} values, expected {}",
                    order,
                    rec.values.len(),
                    width
                )));
            }
            let r = *region_idx.entry(rec.region.clone()).or_insert_with(|| {
                regions.push(rec.region.clone());
                regions.len() - 1
            });
            keyed.push((RowKey { region: r, date: rec.date }, order, rec));
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

        let text_cols: Vec<usize> = (0..width)
            .filter(|&j| columns[j].kind == ColumnKind::Demographic)
            .collect();
        let mut seen = BTreeSet::new();
        let mut rows = Vec::with_capacity(keyed.len());
        let mut flat = Vec::with_capacity(keyed.len() * width);
        let mut text: BTreeMap<usize, Vec<String>> =
            text_cols.iter().map(|&j| (j, Vec::new())).collect();
        for (key, _, rec) in keyed {
            let labels: Vec<String> = text_cols
                .iter()
                .map(|j| label_of(&rec, *j))
                .collect();
            if !seen.insert((key, labels.clone())) {
                return Err(PanelError::Invalid(format!(
                    "duplicate row for region `{}` on {}",
                    regions[key.region], key.date
                )));
            }
            rows.push(key);
            flat.extend_from_slice(&rec.values);
            for (j, l) in text_cols.iter().zip(labels) {
                text.get_mut(j).expect("text column").push(l);
            }
        }
        let values = Array2::from_shape_vec((rows.len(), width), flat)
            .expect("row-major values match shape");
        let mut ds = Self {
            regions,
            dates: Vec::new(),
            columns,
            target: target_idx,
            flagged: vec![false; rows.len()],
            rows,
            values,
            text,
        };
        ds.refresh_dates();
        ds.flag_out_of_range();
        Ok(ds)
    }

    fn refresh_dates(&mut self) {
        let set: BTreeSet<NaiveDate> = self.rows.iter().map(|r| r.date).collect();
        self.dates = set.into_iter().collect();
    }

    fn flag_out_of_range(&mut self) {
        for (j, c) in self.columns.iter().enumerate() {
            if c.units != Units::Percent {
                continue;
            }
            for (i, v) in self.values.column(j).iter().enumerate() {
                if v.is_finite() && !(0.0..=100.0).contains(v) {
                    self.flagged[i] = true;
                }
            }
        }
    }

    /// Rows whose percent-unit cells fall outside `[0, 100]`, with the
    /// offending column names.
    pub fn range_violations(&self) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        for (j, c) in self.columns.iter().enumerate() {
            if c.units != Units::Percent {
                continue;
            }
            for (i, v) in self.values.column(j).iter().enumerate() {
                if v.is_finite() && !(0.0..=100.0).contains(v) {
                    out.push((i, c.name.clone()));
                }
            }
        }
        out.sort();
        out
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn target(&self) -> &str {
        &self.columns[self.target].name
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn rows(&self) -> &[RowKey] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    pub fn region_name(&self, row: usize) -> &str {
        &self.regions[self.rows[row].region]
    }

    /// Text label of a demographic cell; numeric columns render their value.
    pub fn label(&self, row: usize, column: usize) -> String {
        match self.text.get(&column) {
            Some(t) => t[row].clone(),
            None => crate::numfmt::fmt_sig12(self.values[[row, column]]),
        }
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| PanelError::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<ArrayView1<'_, f64>> {
        Ok(self.values.column(self.column_index(name)?))
    }

    /// Names of every non-target column that is not demographic.
    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(j, c)| *j != self.target && c.kind != ColumnKind::Demographic)
            .map(|(_, c)| c.name.clone())
            .collect()
    }

    /// Row indices where every listed column is present.
    pub fn complete_rows(&self, columns: &[usize]) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| columns.iter().all(|&j| !self.values[[i, j]].is_nan()))
            .collect()
    }

    /// Dense `rows × columns` sub-matrix.
    pub fn matrix(&self, rows: &[usize], columns: &[usize]) -> Array2<f64> {
        let sel = self.values.select(Axis(0), rows);
        sel.select(Axis(1), columns)
    }

    /// Row indices of one region in date order.
    pub fn region_rows(&self, region: &str) -> Result<Vec<usize>> {
        let r = self
            .regions
            .iter()
            .position(|x| x == region)
            .ok_or_else(|| PanelError::UnknownColumn(format!("region `{region}`")))?;
        Ok((0..self.rows.len()).filter(|&i| self.rows[i].region == r).collect())
    }

    /// Subset of rows, metadata preserved. Region and date lists are
    /// narrowed to what remains.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut keep: Vec<usize> = rows.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let present: BTreeSet<usize> = keep.iter().map(|&i| self.rows[i].region).collect();
        let remap: HashMap<usize, usize> =
            present.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let regions = present.iter().map(|&r| self.regions[r].clone()).collect();
        let new_rows = keep
            .iter()
            .map(|&i| RowKey { region: remap[&self.rows[i].region], date: self.rows[i].date })
            .collect();
        let text = self
            .text
            .iter()
            .map(|(&j, t)| (j, keep.iter().map(|&i| t[i].clone()).collect()))
            .collect();
        let mut ds = Self {
            regions,
            dates: Vec::new(),
            columns: self.columns.clone(),
            target: self.target,
            rows: new_rows,
            values: self.values.select(Axis(0), &keep),
            text,
            flagged: keep.iter().map(|&i| self.flagged[i]).collect(),
        };
        ds.refresh_dates();
        ds
    }

    /// Keeps only the listed columns (order preserved from the dataset).
    pub(crate) fn select_columns(&self, keep: &[usize]) -> Self {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let target = keep
            .iter()
            .position(|&j| j == self.target)
            .expect("target retained");
        let text = keep
            .iter()
            .enumerate()
            .filter_map(|(new, old)| self.text.get(old).map(|t| (new, t.clone())))
            .collect();
        let mut ds = Self {
            regions: self.regions.clone(),
            dates: self.dates.clone(),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            target,
            rows: self.rows.clone(),
            values: self.values.select(Axis(1), &keep),
            text,
            flagged: vec![false; self.rows.len()],
        };
        ds.flag_out_of_range();
        ds
    }

    /// True when every region has at most one row per date.
    pub fn has_unique_region_dates(&self) -> bool {
        self.rows.windows(2).all(|w| w[0] != w[1])
    }
}

fn label_of(rec: &Record, column: usize) -> String {
    match rec.text.get(&column) {
        Some(s) => s.clone(),
        None => crate::numfmt::fmt_sig12(rec.values[column]),
    }
}

/// Row filter on column values: every condition must match.
///
/// Text cells compare as strings. Numeric cells compare as numbers when the
/// condition value parses, otherwise by their formatted text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupFilter {
    pub conditions: Vec<(String, String)>,
}

impl GroupFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn eq(column: impl Into<String>, value: impl Into<String>) -> Self {
        Self { conditions: vec![(column.into(), value.into())] }
    }

    pub fn and(mut self, column: impl Into<String>, value: impl Into<String>) -> Self {
        self.conditions.push((column.into(), value.into()));
        self
    }
}

pub fn group_filter(ds: &PanelDataset, filter: &GroupFilter) -> Result<PanelDataset> {
    let mut resolved = Vec::with_capacity(filter.conditions.len());
    for (col, val) in &filter.conditions {
        resolved.push((ds.column_index(col)?, val.as_str()));
    }
    let rows: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| {
            resolved.iter().all(|&(j, val)| match ds.text.get(&j) {
                Some(t) => t[i] == val,
                None => match val.parse::<f64>() {
                    Ok(x) => ds.values[[i, j]] == x,
                    Err(_) => ds.label(i, j) == val,
                },
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(PanelError::EmptyDataset(format!(
            "no rows match filter {:?}",
            filter.conditions
        )));
    }
    Ok(ds.select_rows(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 5, day).unwrap()
    }

    fn bucketed() -> PanelDataset {
        let cols = vec![
            ColumnMeta::new("gender", ColumnKind::Demographic, Units::Unitless),
            ColumnMeta::new("cough_weighted", ColumnKind::WeightedSignal, Units::Percent),
            ColumnMeta::new("target", ColumnKind::Target, Units::Percent),
        ];
        let mut recs = Vec::new();
        for day in 1..=4 {
            for (g, v) in [("female", 1.0), ("male", 2.0)] {
                recs.push(
                    Record::new("NY", d(day), vec![f64::NAN, v, v * 3.0]).with_text(0, g),
                );
            }
        }
        PanelDataset::from_records(cols, "target", recs).unwrap()
    }

    #[test]
    fn filter_keeps_matching_rows() {
        let ds = bucketed();
        let f = group_filter(&ds, &GroupFilter::eq("gender", "female")).unwrap();
        assert_eq!(f.n_rows(), 4);
        assert!(f.column("cough_weighted").unwrap().iter().all(|&v| v == 1.0));
        assert!(f.has_unique_region_dates());
        assert_eq!(f.columns(), ds.columns());
    }

    #[test]
    fn filter_identity_and_empty() {
        let ds = bucketed();
        assert_eq!(group_filter(&ds, &GroupFilter::all()).unwrap(), ds);
        assert!(matches!(
            group_filter(&ds, &GroupFilter::eq("gender", "other")),
            Err(PanelError::EmptyDataset(_))
        ));
        assert!(matches!(
            group_filter(&ds, &GroupFilter::eq("age", "30")),
            Err(PanelError::UnknownColumn(_))
        ));
    }

    #[test]
    fn numeric_filter() {
        let ds = bucketed();
        let f = group_filter(&ds, &GroupFilter::eq("cough_weighted", "2")).unwrap();
        assert_eq!(f.n_rows(), 4);
        let f = group_filter(&ds, &GroupFilter::eq("cough_weighted", "2").and("gender", "female"));
        assert!(f.is_err());
    }

    #[test]
    fn rows_sorted_and_duplicates_rejected() {
        let cols = vec![
            ColumnMeta::new("a", ColumnKind::Other, Units::Unitless),
            ColumnMeta::new("t", ColumnKind::Target, Units::Percent),
        ];
        let recs = vec![
            Record::new("B", d(2), vec![1.0, 1.0]),
            Record::new("A", d(3), vec![1.0, 1.0]),
            Record::new("B", d(1), vec![1.0, 1.0]),
        ];
        let ds = PanelDataset::from_records(cols.clone(), "t", recs).unwrap();
        assert_eq!(ds.regions(), &["B".to_string(), "A".to_string()]);
        assert_eq!(ds.rows()[0].date, d(1));
        assert_eq!(ds.dates(), &[d(1), d(2), d(3)]);

        let dup = vec![Record::new("A", d(1), vec![1.0, 1.0]), Record::new("A", d(1), vec![2.0, 2.0])];
        assert!(PanelDataset::from_records(cols, "t", dup).is_err());
    }

    #[test]
    fn out_of_range_percent_is_flagged_not_clipped() {
        let cols = vec![ColumnMeta::new("t", ColumnKind::Target, Units::Percent)];
        let recs = vec![Record::new("A", d(1), vec![120.0]), Record::new("A", d(2), vec![5.0])];
        let ds = PanelDataset::from_records(cols, "t", recs).unwrap();
        assert_eq!(ds.flagged(), &[true, false]);
        assert_eq!(ds.values()[[0, 0]], 120.0);
        assert_eq!(ds.range_violations(), vec![(0, "t".to_string())]);
    }
}
