use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ColumnKind, ColumnMeta, PanelError, Result, Units};

/// Column-role configuration for ingestion and pruning.
///
/// Read from JSON with keys `target`, `demographic[]`, `testing_related[]`,
/// `derived[]`, `weighted_suffix`, `unweighted_suffix` and
/// `magnitude_threshold`. `mean_scale[]`, `units{}`, `region_column` and
/// `date_column` are optional extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub target: String,
    #[serde(default = "default_region_column")]
    pub region_column: String,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default)]
    pub demographic: Vec<String>,
    #[serde(default)]
    pub testing_related: Vec<String>,
    #[serde(default)]
    pub derived: Vec<String>,
    #[serde(default)]
    pub mean_scale: Vec<String>,
    #[serde(default = "default_weighted_suffix")]
    pub weighted_suffix: String,
    #[serde(default = "default_unweighted_suffix")]
    pub unweighted_suffix: String,
    #[serde(default = "default_magnitude_threshold")]
    pub magnitude_threshold: f64,
    #[serde(default)]
    pub units: BTreeMap<String, Units>,
}

fn default_region_column() -> String {
    "region".into()
}
fn default_date_column() -> String {
    "date".into()
}
fn default_weighted_suffix() -> String {
    "_weighted".into()
}
fn default_unweighted_suffix() -> String {
    "_unweighted".into()
}
fn default_magnitude_threshold() -> f64 {
    1e6
}

impl SchemaConfig {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            region_column: default_region_column(),
            date_column: default_date_column(),
            demographic: Vec::new(),
            testing_related: Vec::new(),
            derived: Vec::new(),
            mean_scale: Vec::new(),
            weighted_suffix: default_weighted_suffix(),
            unweighted_suffix: default_unweighted_suffix(),
            magnitude_threshold: default_magnitude_threshold(),
            units: BTreeMap::new(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PanelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Assigns kinds and units to signal columns.
    ///
    /// Explicit lists win over suffix rules. A name ending in the weighted
    /// suffix is a weighted signal; a name ending in the unweighted suffix,
    /// or a bare stem whose weighted twin is present, is an unweighted
    /// signal. Everything else is `other`.
    pub fn classify(&self, names: &[&str]) -> Vec<ColumnMeta> {
        let present: BTreeSet<&str> = names.iter().copied().collect();
        names
            .iter()
            .map(|&name| {
                let kind = self.kind_of(name, &present);
                let units = self.units.get(name).copied().unwrap_or(match kind {
                    ColumnKind::WeightedSignal
                    | ColumnKind::UnweightedSignal
                    | ColumnKind::TestingRelated
                    | ColumnKind::Target => Units::Percent,
                    _ => Units::Unitless,
                });
                ColumnMeta::new(name, kind, units)
            })
            .collect()
    }

    fn kind_of(&self, name: &str, present: &BTreeSet<&str>) -> ColumnKind {
        let listed = |list: &[String]| list.iter().any(|x| x == name);
        if name == self.target {
            ColumnKind::Target
        } else if listed(&self.demographic) {
            ColumnKind::Demographic
        } else if listed(&self.testing_related) {
            ColumnKind::TestingRelated
        } else if listed(&self.derived) {
            ColumnKind::Derived
        } else if listed(&self.mean_scale) {
            ColumnKind::MeanScale
        } else if !self.unweighted_suffix.is_empty() && name.ends_with(&self.unweighted_suffix) {
            ColumnKind::UnweightedSignal
        } else if !self.weighted_suffix.is_empty() && name.ends_with(&self.weighted_suffix) {
            ColumnKind::WeightedSignal
        } else if present.contains(format!("{name}{}", self.weighted_suffix).as_str()) {
            ColumnKind::UnweightedSignal
        } else {
            ColumnKind::Other
        }
    }

    /// Stem shared by a weighted/unweighted pair, if `name` carries a suffix.
    pub fn stem<'a>(&self, name: &'a str) -> &'a str {
        name.strip_suffix(self.unweighted_suffix.as_str())
            .or_else(|| name.strip_suffix(self.weighted_suffix.as_str()))
            .unwrap_or(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_rules() {
        let s = SchemaConfig::new("t");
        let metas = s.classify(&["cough", "cough_weighted", "fever_unweighted", "t", "misc"]);
        let kinds: Vec<_> = metas.iter().map(|m| m.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ColumnKind::UnweightedSignal,
                ColumnKind::WeightedSignal,
                ColumnKind::UnweightedSignal,
                ColumnKind::Target,
                ColumnKind::Other
            ]
        );
        assert_eq!(metas[3].units, Units::Percent);
        assert_eq!(s.stem("fever_unweighted"), "fever");
        assert_eq!(s.stem("fever_weighted"), "fever");
    }

    #[test]
    fn json_keys() {
        let s: SchemaConfig = serde_json::from_str(
            r#"{"target":"t","demographic":["age"],"testing_related":[],"derived":["ili"],
                "weighted_suffix":"_w","unweighted_suffix":"_u","magnitude_threshold":1e9}"#,
        )
        .unwrap();
        assert_eq!(s.magnitude_threshold, 1e9);
        let kinds: Vec<_> = s.classify(&["age", "ili", "x_w", "x_u"]).iter().map(|m| m.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ColumnKind::Demographic,
                ColumnKind::Derived,
                ColumnKind::WeightedSignal,
                ColumnKind::UnweightedSignal
            ]
        );
        assert!(serde_json::from_str::<SchemaConfig>(r#"{"target":"t","bogus":1}"#).is_err());
    }
}
