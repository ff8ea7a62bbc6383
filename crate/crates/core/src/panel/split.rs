use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PanelDataset, PanelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    RandomRow,
    ChronologicalTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_fraction: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { mode: SplitMode::RandomRow, train_fraction: 0.8, horizon: 30, seed: 0 }
    }
}

impl SplitSpec {
    pub fn random(train_fraction: f64, seed: u64) -> Self {
        Self { mode: SplitMode::RandomRow, train_fraction, seed, ..Self::default() }
    }

    pub fn chronological(horizon: usize) -> Self {
        Self { mode: SplitMode::ChronologicalTail, horizon, ..Self::default() }
    }
}

/// Train/test row indices (each ascending).
pub fn split_indices(ds: &PanelDataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = ds.n_rows();
    let (mut train, mut test) = match spec.mode {
        SplitMode::RandomRow => {
            if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
                return Err(PanelError::Invalid(format!(
                    "train_fraction {} not in (0, 1)",
                    spec.train_fraction
                )));
            }
            if n < 2 {
                return Err(PanelError::InsufficientRows(format!("{n} rows, need at least 2")));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
            // ceil(f * n), kept within [1, n - 1] so neither side is empty
            let cut = ((spec.train_fraction * n as f64) - 1e-9).ceil() as usize;
            let cut = cut.clamp(1, n - 1);
            let test = idx.split_off(cut);
            (idx, test)
        }
        SplitMode::ChronologicalTail => {
            if spec.horizon == 0 {
                return Err(PanelError::Invalid("horizon must be positive".into()));
            }
            if !ds.has_unique_region_dates() {
                return Err(PanelError::Invalid(
                    "chronological split needs one row per region and date; filter to a single bucket first".into(),
                ));
            }
            let mut train = Vec::new();
            let mut test = Vec::new();
            for region in ds.regions() {
                let rows = ds.region_rows(region)?;
                if rows.len() <= spec.horizon {
                    return Err(PanelError::InsufficientRows(format!(
                        "region `{region}` has {} days, horizon is {}",
                        rows.len(),
                        spec.horizon
                    )));
                }
                let cut = rows.len() - spec.horizon;
                train.extend_from_slice(&rows[..cut]);
                test.extend_from_slice(&rows[cut..]);
            }
            (train, test)
        }
    };
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(ds: &PanelDataset, spec: &SplitSpec) -> Result<(PanelDataset, PanelDataset)> {
    let (train, test) = split_indices(ds, spec)?;
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}
