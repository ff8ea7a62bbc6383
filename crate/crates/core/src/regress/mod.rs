//! Cross-sectional regressors behind one fit/predict contract.

pub mod tree;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use tree::{Presorted, Tree, TreeParams};

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("Gram matrix is singular even after jitter")]
    Singular,
    #[error("model document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, RegressError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Tree,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Linear, ModelKind::Tree, ModelKind::Gbt];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Tree => "tree",
            ModelKind::Gbt => "gbt",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model `{s}`; expected one of linear, tree, gbt"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub gbt_stages: usize,
    pub gbt_learning_rate: f64,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Gbt,
            tree_max_depth: 3,
            tree_min_leaf: 5,
            gbt_stages: 100,
            gbt_learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tree_max_depth == 0 || self.tree_min_leaf == 0 || self.gbt_stages == 0 {
            return Err(RegressError::InvalidSpec(
                "tree_max_depth, tree_min_leaf and gbt_stages must be positive".into(),
            ));
        }
        if !(self.gbt_learning_rate > 0.0 && self.gbt_learning_rate <= 1.0) {
            return Err(RegressError::InvalidSpec(format!(
                "gbt_learning_rate {} not in (0, 1]",
                self.gbt_learning_rate
            )));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams { max_depth: self.tree_max_depth, min_leaf: self.tree_min_leaf }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    Linear { intercept: f64, coefficients: Vec<f64> },
    Tree { tree: Tree },
    Gbt { init: f64, learning_rate: f64, stages: Vec<Tree> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub params: ModelParams,
    /// Training MSE after each boosting stage (gbt only).
    pub train_diagnostics: Vec<f64>,
}

/// Fits `spec.kind` on an `n × k` design.
///
/// `linear` is OLS with intercept via the normal equations on centered
/// data, solved by Cholesky; a singular Gram gets a 1e-10 relative ridge
/// jitter. `tree` is a CART regressor. `gbt` starts from `mean(y)` and adds
/// `gbt_stages` depth-limited trees fit to the residuals, each scaled by
/// the learning rate.
pub fn fit(spec: &ModelSpec, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<FittedModel> {
    spec.validate()?;
    let (n, k) = x.dim();
    if y.len() != n {
        return Err(RegressError::ShapeMismatch(format!("X has {n} rows, y has {}", y.len())));
    }
    if n == 0 || k == 0 {
        return Err(RegressError::EmptyInput(format!("X is {n}×{k}")));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite);
    }
    let (params, train_diagnostics) = match spec.kind {
        ModelKind::Linear => {
            if n < k + 1 {
                return Err(RegressError::EmptyInput(format!(
                    "linear fit needs at least {} rows, got {n}",
                    k + 1
                )));
            }
            let (intercept, coefficients) = ols(x, y)?;
            (ModelParams::Linear { intercept, coefficients }, Vec::new())
        }
        ModelKind::Tree => {
            if n < 2 {
                return Err(RegressError::EmptyInput("tree fit needs at least 2 rows".into()));
            }
            let t = tree::grow(y, &Presorted::new(x), spec.tree_params());
            (ModelParams::Tree { tree: t }, Vec::new())
        }
        ModelKind::Gbt => {
            if n < 2 {
                return Err(RegressError::EmptyInput("gbt fit needs at least 2 rows".into()));
            }
            fit_gbt(spec, x, y)
        }
    };
    Ok(FittedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: *spec,
        feature_names: (0..k).map(|j| format!("x{j}")).collect(),
        params,
        train_diagnostics,
    })
}

fn ols(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<(f64, Vec<f64>)> {
    let means = x.mean_axis(Axis(0)).expect("nonempty");
    let ybar = y.mean().expect("nonempty");
    let xc = &x - &means;
    let yc = y.mapv(|v| v - ybar);
    let g = linalg::gram(xc.view());
    let rhs = xc.t().dot(&yc);
    let l = match linalg::cholesky(g.view(), 1e-13) {
        Some(l) => l,
        None => {
            let scale = g.diag().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
            let mut gj = g.clone();
            for i in 0..gj.nrows() {
                gj[[i, i]] += 1e-10 * scale;
            }
            linalg::cholesky(gj.view(), 0.0).ok_or(RegressError::Singular)?
        }
    };
    let beta = linalg::cholesky_solve(&l, rhs.view());
    let intercept = ybar - means.dot(&beta);
    Ok((intercept, beta.to_vec()))
}

fn fit_gbt(spec: &ModelSpec, x: ArrayView2<f64>, y: ArrayView1<f64>) -> (ModelParams, Vec<f64>) {
    let n = y.len();
    let init = y.mean().expect("nonempty");
    let presorted = Presorted::new(x);
    let mut pred = Array1::from_elem(n, init);
    let mut stages = Vec::with_capacity(spec.gbt_stages);
    let mut mse = Vec::with_capacity(spec.gbt_stages);
    for _ in 0..spec.gbt_stages {
        let resid = &y - &pred;
        let t = tree::grow(resid.view(), &presorted, spec.tree_params());
        for (i, row) in x.outer_iter().enumerate() {
            pred[i] += spec.gbt_learning_rate * t.predict_row(row);
        }
        let m = y.iter().zip(pred.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
        mse.push(m);
        stages.push(t);
    }
    (
        ModelParams::Gbt { init, learning_rate: spec.gbt_learning_rate, stages },
        mse,
    )
}

impl FittedModel {
    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_names.len() {
            return Err(RegressError::ShapeMismatch(format!(
                "{} names for {} features",
                names.len(),
                self.feature_names.len()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features() {
            return Err(RegressError::ShapeMismatch(format!(
                "model takes {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        Ok(x.outer_iter().map(|row| self.predict_row(row)).collect())
    }

    fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        match &self.params {
            ModelParams::Linear { intercept, coefficients } => {
                intercept + row.iter().zip(coefficients).map(|(a, b)| a * b).sum::<f64>()
            }
            ModelParams::Tree { tree } => tree.predict_row(row),
            ModelParams::Gbt { init, learning_rate, stages } => {
                let mut p = *init;
                for t in stages {
                    p += learning_rate * t.predict_row(row);
                }
                p
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: FittedModel =
            serde_json::from_str(text).map_err(|e| RegressError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(RegressError::Format(format!(
                "unsupported format_version {}",
                m.format_version
            )));
        }
        let k = m.feature_names.len();
        let ok = match &m.params {
            ModelParams::Linear { coefficients, .. } => coefficients.len() == k,
            ModelParams::Tree { tree } => tree.is_consistent(k),
            ModelParams::Gbt { stages, .. } => stages.iter().all(|t| t.is_consistent(k)),
        };
        if !ok {
            return Err(RegressError::Format("parameters inconsistent with feature count".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_recovers_exact_line() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0]];
        let y = x.column(0).mapv(|v| 3.0 * v + 2.0);
        let m = fit(&ModelSpec::new(ModelKind::Linear), x.view(), y.view()).unwrap();
        let ModelParams::Linear { intercept, coefficients } = &m.params else { panic!() };
        assert!((coefficients[0] - 3.0).abs() < 1e-9);
        assert!((intercept - 2.0).abs() < 1e-9);
        let p = m.predict(array![[10.0]].view()).unwrap();
        assert!((p[0] - 32.0).abs() < 1e-9);
    }

    #[test]
    fn linear_with_duplicate_column_uses_jitter() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let y = array![1.0, 3.0, 5.0, 7.0];
        let m = fit(&ModelSpec::new(ModelKind::Linear), x.view(), y.view()).unwrap();
        let p = m.predict(x.view()).unwrap();
        for (a, b) in p.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn tree_on_constant_is_leaf() {
        let x = array![[1.0], [5.0], [2.0], [8.0], [3.0], [4.0]];
        let y = Array1::from_elem(6, 4.25);
        let m = fit(&ModelSpec::new(ModelKind::Tree), x.view(), y.view()).unwrap();
        let ModelParams::Tree { tree } = &m.params else { panic!() };
        assert_eq!(tree.n_nodes(), 1);
        assert_eq!(m.predict(array![[-100.0], [1e9]].view()).unwrap().to_vec(), vec![4.25, 4.25]);
    }

    fn stump_spec() -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Gbt,
            tree_max_depth: 1,
            tree_min_leaf: 1,
            gbt_stages: 1,
            gbt_learning_rate: 1.0,
            seed: 0,
        }
    }

    #[test]
    fn gbt_stump_hand_trace() {
        // mean 0.5; one stump at x <= 1.5 fits residuals ±0.5 exactly
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = array![0.0, 0.0, 1.0, 1.0];
        let m = fit(&stump_spec(), x.view(), y.view()).unwrap();
        assert_eq!(m.predict(x.view()).unwrap().to_vec(), vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(m.predict(array![[5.0]].view()).unwrap()[0], 1.0);
        assert_eq!(m.train_diagnostics, vec![0.0]);
    }

    #[test]
    fn errors() {
        let x = array![[0.0], [1.0]];
        let spec = ModelSpec::new(ModelKind::Linear);
        assert!(matches!(fit(&spec, x.view(), array![1.0].view()), Err(RegressError::ShapeMismatch(_))));
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(matches!(
            fit(&spec, empty.view(), Array1::zeros(0).view()),
            Err(RegressError::EmptyInput(_))
        ));
        let m = fit(&spec, x.view(), array![1.0, 2.0].view()).unwrap();
        assert!(matches!(m.predict(array![[1.0, 2.0]].view()), Err(RegressError::ShapeMismatch(_))));
        assert!(matches!(
            fit(&spec, array![[f64::NAN], [1.0]].view(), array![1.0, 2.0].view()),
            Err(RegressError::NonFinite)
        ));
        assert!("forest".parse::<ModelKind>().unwrap_err().contains("linear, tree, gbt"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((80, 3), |_| rng.random::<f64>() * 10.0);
        let y = x.map_axis(Axis(1), |r| r[0].sin() * 3.0 + r[1] * 0.7 - r[2]);
        for kind in ModelKind::ALL {
            let spec = ModelSpec { gbt_stages: 20, ..ModelSpec::new(kind) };
            let m = fit(&spec, x.view(), y.view()).unwrap();
            let back = FittedModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.predict(x.view()).unwrap(), m.predict(x.view()).unwrap());
        }
        assert!(FittedModel::from_json("{\"format_version\": 99}").is_err());
    }
}
