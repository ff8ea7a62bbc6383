//! Run configuration. Every setting resolves as command-line flag, then the
//! `--config` file, then the built-in default.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use sympcast::panel::{
    ingest_csv, prune_features, AuditEntry, PanelDataset, PruneConfig, SchemaConfig, SyntheticSpec,
    SYNTHETIC_TARGET,
};
use sympcast::{LstmConfig, ModelSpec};

use crate::UsageError;

/// Contents of a `--config` JSON file. All keys are optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub schema: Option<PathBuf>,
    pub target: Option<String>,
    pub model: Option<ModelSpec>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub out: Option<PathBuf>,
    pub train_fraction: Option<f64>,
    pub normal_ci: Option<bool>,
    pub top_n: Option<usize>,
    pub max_n: Option<usize>,
    pub horizon: Option<usize>,
    pub forecast_model: Option<String>,
    pub forecast_features: Option<usize>,
    pub lstm: Option<LstmConfig>,
    pub var_max_lag: Option<usize>,
    pub clusters: Option<usize>,
    pub linkage: Option<String>,
    pub correlation_threshold: Option<f64>,
    pub ablation_top: Option<usize>,
    pub plot_data: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        if cfg.data.is_some() && cfg.synthetic.is_some() {
            return Err(UsageError("config sets both `data` and `synthetic`; choose one".into()).into());
        }
        Ok(cfg)
    }
}

/// Settings shared by every command after precedence is applied.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub file: FileConfig,
    pub seed: u64,
    pub runs: usize,
    pub out: PathBuf,
    seed_flag: bool,
}

impl Ctx {
    pub fn new(file: FileConfig, seed: Option<u64>, runs: Option<usize>, out: Option<PathBuf>) -> Result<Self> {
        let runs = runs.or(file.runs).unwrap_or(20);
        if runs == 0 {
            return Err(UsageError("--runs must be positive".into()).into());
        }
        Ok(Self {
            seed: seed.or(file.seed).unwrap_or(0),
            runs,
            out: out.or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            seed_flag: seed.is_some(),
            file,
        })
    }

    /// Synthetic spec from the config file (or the default), with the
    /// global seed applied when it was given on the command line or the
    /// file has no spec of its own.
    pub fn synthetic_spec(&self) -> SyntheticSpec {
        match &self.file.synthetic {
            Some(spec) if !self.seed_flag => spec.clone(),
            Some(spec) => SyntheticSpec { seed: self.seed, ..spec.clone() },
            None => SyntheticSpec { seed: self.seed, ..SyntheticSpec::default() },
        }
    }

    /// Loads the dataset named by `--data`/config, or generates the
    /// synthetic panel when no file is given.
    pub fn load(&self, data: &DataFlags) -> Result<Loaded> {
        let path = data.data.clone().or_else(|| self.file.data.clone());
        let target = data.target.clone().or_else(|| self.file.target.clone());
        let schema_path = data.schema.clone().or_else(|| self.file.schema.clone());
        match path {
            Some(path) => {
                let mut schema = match &schema_path {
                    Some(p) => SchemaConfig::from_json_file(p).map_err(|e| UsageError(format!("schema {}: {e}", p.display())))?,
                    None => SchemaConfig::new(target.clone().ok_or_else(|| {
                        UsageError("a --target or --schema is required with --data".into())
                    })?),
                };
                if let Some(t) = target {
                    schema.target = t;
                }
                if !path.exists() {
                    return Err(UsageError(format!("data file {} not found", path.display())).into());
                }
                let (ds, audit) = ingest_csv(&path, &schema).with_context(|| format!("ingesting {}", path.display()))?;
                for a in &audit {
                    log::warn!("ingest: {}", serde_json::to_string(a).expect("audit entry serializes"));
                }
                Ok(Loaded { ds, audit, schema })
            }
            None => {
                let spec = self.synthetic_spec();
                let ds = sympcast::panel::generate_synthetic(&spec)?;
                Ok(Loaded { ds, audit: Vec::new(), schema: SchemaConfig::new(SYNTHETIC_TARGET) })
            }
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct DataFlags {
    /// Panel CSV to read (default: generate the synthetic panel).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema JSON describing column roles.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Target column (overrides the schema).
    #[arg(long)]
    pub target: Option<String>,
}

pub struct Loaded {
    pub ds: PanelDataset,
    pub audit: Vec<AuditEntry>,
    pub schema: SchemaConfig,
}

impl Loaded {
    /// Dataset after the schema's pruning rules.
    pub fn pruned(&self) -> Result<(PanelDataset, Vec<AuditEntry>)> {
        Ok(prune_features(&self.ds, &PruneConfig::from(&self.schema))?)
    }
}
