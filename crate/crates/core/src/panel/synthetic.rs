use chrono::{Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ColumnKind, ColumnMeta, PanelDataset, PanelError, Record, Result, Units};

pub const SYNTHETIC_TARGET: &str = "pct_tested_positive";

pub const SYNTHETIC_START: NaiveDate = match NaiveDate::from_ymd_opt(2020, 4, 6) {
    Some(d) => d,
    None => panic!("valid date"),
};

// Observed signals live on a percent scale: CENTER + SCALE * u, u ~ unit AR(1).
const SIGNAL_CENTER: f64 = 30.0;
const SIGNAL_SCALE: f64 = 5.0;
const TARGET_CENTER: f64 = 20.0;
const TARGET_SCALE: f64 = 4.0;

/// Planted panel: target is a known weighted sum of AR(1) signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_regions: usize,
    pub n_days: usize,
    pub n_signals: usize,
    pub planted_weights: Vec<f64>,
    pub noise_sigma: f64,
    pub ar_coefficient: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_regions: 10,
            n_days: 150,
            n_signals: 10,
            planted_weights: vec![5.0, 1.0, 0.1],
            noise_sigma: 0.01,
            ar_coefficient: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PanelError::InvalidSpec(m));
        if self.n_regions == 0 || self.n_days == 0 || self.n_signals == 0 {
            return bad("n_regions, n_days and n_signals must be positive".into());
        }
        if self.planted_weights.is_empty() || self.planted_weights.len() > self.n_signals {
            return bad(format!(
                "need between 1 and {} planted weights, got {}",
                self.n_signals,
                self.planted_weights.len()
            ));
        }
        if self.planted_weights.iter().any(|w| !w.is_finite()) {
            return bad("planted weights must be finite".into());
        }
        if self.planted_weights.windows(2).any(|w| w[0].abs() < w[1].abs()) {
            return bad("planted weights must have descending magnitudes".into());
        }
        if self.planted_weights.iter().all(|w| *w == 0.0) {
            return bad("at least one planted weight must be nonzero".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be nonnegative", self.noise_sigma));
        }
        if !(self.ar_coefficient > -1.0 && self.ar_coefficient < 1.0) {
            return bad(format!("ar_coefficient {} not in (-1, 1)", self.ar_coefficient));
        }
        Ok(())
    }

    pub fn signal_name(j: usize) -> String {
        format!("signal_{j:02}_weighted")
    }
}

/// Generates the planted panel.
///
/// Per region and signal, a unit-variance AR(1) latent `z` plus observation
/// noise gives `u`, reported as `30 + 5u` (clipped to `[0, 100]`). The
/// target is `20 + 4 (Σ w_j u_j + ε) / ‖w‖` clipped to `[0, 100]`, with
/// `u_j` recovered from the reported signal, so with zero noise it is an
/// exact affine function of the emitted signals.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<PanelDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let phi = spec.ar_coefficient;
    let innov = (1.0 - phi * phi).sqrt();
    let norm = spec.planted_weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let k = spec.n_signals;

    let mut columns: Vec<ColumnMeta> = (0..k)
        .map(|j| ColumnMeta::new(SyntheticSpec::signal_name(j), ColumnKind::WeightedSignal, Units::Percent))
        .collect();
    columns.push(ColumnMeta::new(SYNTHETIC_TARGET, ColumnKind::Target, Units::Percent));

    let mut records = Vec::with_capacity(spec.n_regions * spec.n_days);
    for r in 0..spec.n_regions {
        let mut latent: Vec<f64> = (0..k).map(|_| normal()).collect();
        for day in 0..spec.n_days {
            if day > 0 {
                for z in latent.iter_mut() {
                    *z = phi * *z + innov * normal();
                }
            }
            let mut values = Vec::with_capacity(k + 1);
            for z in &latent {
                let u = z + spec.noise_sigma * normal();
                values.push((SIGNAL_CENTER + SIGNAL_SCALE * u).clamp(0.0, 100.0));
            }
            let raw: f64 = spec
                .planted_weights
                .iter()
                .zip(&values)
                .map(|(w, s)| w * (s - SIGNAL_CENTER) / SIGNAL_SCALE)
                .sum::<f64>()
                + spec.noise_sigma * normal();
            values.push((TARGET_CENTER + TARGET_SCALE * raw / norm).clamp(0.0, 100.0));
            records.push(Record::new(
                format!("R{r}"),
                SYNTHETIC_START + Duration::days(day as i64),
                values,
            ));
        }
    }
    PanelDataset::from_records(columns, SYNTHETIC_TARGET, records)
}
