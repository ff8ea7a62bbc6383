use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AuditEntry, ColumnKind, PanelDataset, PanelError, Result, SchemaConfig};

/// Which pruning rules run, and their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub drop_demographic: bool,
    pub drop_unweighted_twins: bool,
    pub drop_testing_related: bool,
    pub drop_derived: bool,
    /// Columns whose max |value| exceeds this are dropped. `None` disables.
    pub magnitude_threshold: Option<f64>,
    pub weighted_suffix: String,
    pub unweighted_suffix: String,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self::from(&SchemaConfig::new(""))
    }
}

impl From<&SchemaConfig> for PruneConfig {
    fn from(s: &SchemaConfig) -> Self {
        Self {
            drop_demographic: true,
            drop_unweighted_twins: true,
            drop_testing_related: true,
            drop_derived: true,
            magnitude_threshold: Some(s.magnitude_threshold),
            weighted_suffix: s.weighted_suffix.clone(),
            unweighted_suffix: s.unweighted_suffix.clone(),
        }
    }
}

/// Drops, in order: demographic columns, unweighted columns with a weighted
/// twin, testing-related columns, derived columns, and columns whose
/// magnitude exceeds the threshold. The target is never dropped; a rule
/// that would drop it is an error.
pub fn prune_features(
    ds: &PanelDataset,
    rules: &PruneConfig,
) -> Result<(PanelDataset, Vec<AuditEntry>)> {
    let names: BTreeSet<&str> = ds.columns().iter().map(|c| c.name.as_str()).collect();
    let target = ds.target_index();
    let mut audit = Vec::new();
    let mut keep = Vec::new();
    for (j, col) in ds.columns().iter().enumerate() {
        let reason = if rules.drop_demographic && col.kind == ColumnKind::Demographic {
            Some("demographic")
        } else if rules.drop_unweighted_twins
            && col.kind == ColumnKind::UnweightedSignal
            && has_weighted_twin(&col.name, &names, rules)
        {
            Some("unweighted_twin")
        } else if rules.drop_testing_related && col.kind == ColumnKind::TestingRelated {
            Some("testing_related")
        } else if rules.drop_derived && col.kind == ColumnKind::Derived {
            Some("derived")
        } else if rules
            .magnitude_threshold
            .is_some_and(|t| max_abs(ds, j) > t)
        {
            Some("magnitude")
        } else {
            None
        };
        match reason {
            Some(rule) if j == target => {
                return Err(PanelError::TargetWouldBeDropped {
                    target: col.name.clone(),
                    rule: rule.to_string(),
                })
            }
            Some(rule) => audit.push(AuditEntry::column(&col.name, rule)),
            None => keep.push(j),
        }
    }
    Ok((ds.select_columns(&keep), audit))
}

fn has_weighted_twin(name: &str, names: &BTreeSet<&str>, rules: &PruneConfig) -> bool {
    let stem = name.strip_suffix(rules.unweighted_suffix.as_str()).unwrap_or(name);
    names.contains(format!("{stem}{}", rules.weighted_suffix).as_str())
}

fn max_abs(ds: &PanelDataset, j: usize) -> f64 {
    ds.values()
        .column(j)
        .iter()
        .filter(|v| !v.is_nan())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}
