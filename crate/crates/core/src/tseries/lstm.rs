//! Single-layer LSTM with a linear head, trained full-batch with Adam on
//! sliding windows (`W` rows in, next row out) of min-max scaled data.
//!
//! Parameters live in one flat vector (see [`ParamLayout`]) so the
//! optimizer and finite-difference checks can treat them uniformly. Weight
//! matrices are stored column-major: column `j` of `W_x` is the 4H-vector
//! multiplying input `j`, which keeps the inner loops as contiguous axpys.
//! Gate order inside each 4H block is input, forget, cell, output.

use std::ops::Range;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{series_names, ForecastResult, Result, TseriesError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub hidden: usize,
    pub window: usize,
    pub epochs: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self { hidden: 32, window: 14, epochs: 500, step_size: 1e-2, seed: 0 }
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub hidden: usize,
    pub inputs: usize,
}

impl ParamLayout {
    pub fn new(hidden: usize, inputs: usize) -> Self {
        Self { hidden, inputs }
    }

    fn g(&self) -> usize {
        4 * self.hidden
    }

    /// Input weights, `4H × k`.
    pub fn wx(&self) -> Range<usize> {
        0..self.g() * self.inputs
    }

    /// Recurrent weights, `4H × H`.
    pub fn wh(&self) -> Range<usize> {
        let s = self.wx().end;
        s..s + self.g() * self.hidden
    }

    /// Gate biases, `4H`.
    pub fn b(&self) -> Range<usize> {
        let s = self.wh().end;
        s..s + self.g()
    }

    /// Output head, `k × H`.
    pub fn wy(&self) -> Range<usize> {
        let s = self.b().end;
        s..s + self.inputs * self.hidden
    }

    /// Output bias, `k`.
    pub fn by(&self) -> Range<usize> {
        let s = self.wy().end;
        s..s + self.inputs
    }

    pub fn len(&self) -> usize {
        self.by().end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tensors(&self) -> [(&'static str, Range<usize>); 5] {
        [("w_input", self.wx()), ("w_recurrent", self.wh()), ("b_gates", self.b()), ("w_out", self.wy()), ("b_out", self.by())]
    }

    fn forget_bias(&self) -> Range<usize> {
        let s = self.b().start + self.hidden;
        s..s + self.hidden
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub config: LstmConfig,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
    /// Per-feature scaling from the training data.
    pub norm_min: Vec<f64>,
    pub norm_max: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_steps: usize,
    pub loss_history: Vec<f64>,
}

impl LstmModel {
    /// Seeded initialization: every parameter uniform in `±1/√H`, then the
    /// forget-gate biases set to 1.
    pub fn init(config: LstmConfig, inputs: usize) -> Self {
        let layout = ParamLayout::new(config.hidden, inputs);
        let bound = 1.0 / (config.hidden as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-bound..bound)).collect();
        for v in &mut params[layout.forget_bias()] {
            *v = 1.0;
        }
        Self {
            config,
            layout,
            adam_m: vec![0.0; params.len()],
            adam_v: vec![0.0; params.len()],
            params,
            norm_min: vec![0.0; inputs],
            norm_max: vec![1.0; inputs],
            adam_steps: 0,
            loss_history: Vec::new(),
        }
    }

    fn range(&self, j: usize) -> f64 {
        let r = self.norm_max[j] - self.norm_min[j];
        if r > 0.0 {
            r
        } else {
            1.0
        }
    }

    pub fn normalize(&self, y: ArrayView2<f64>) -> Array2<f64> {
        let mut out = y.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (lo, r) = (self.norm_min[j], self.range(j));
            col.mapv_inplace(|v| (v - lo) / r);
        }
        out
    }

    fn denormalize_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v * self.range(j) + self.norm_min[j];
        }
    }

    /// Next normalized row from a normalized `W × k` window.
    fn predict_next(&self, window: &[f64]) -> Vec<f64> {
        let mut scratch = Scratch::new(self.layout, self.config.window);
        forward(&self.params, self.layout, window, self.config.window, &mut scratch);
        scratch.yhat.clone()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn axpy(y: &mut [f64], a: &[f64], s: f64) {
    for (yi, ai) in y.iter_mut().zip(a) {
        *yi += ai * s;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Per-window activations kept for backpropagation.
struct Scratch {
    // step-major, each entry H wide (gates 4H wide)
    gates: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
    yhat: Vec<f64>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    dz: Vec<f64>,
}

impl Scratch {
    fn new(l: ParamLayout, w: usize) -> Self {
        let hd = l.hidden;
        Self {
            gates: vec![0.0; w * 4 * hd],
            c: vec![0.0; (w + 1) * hd],
            tc: vec![0.0; w * hd],
            h: vec![0.0; (w + 1) * hd],
            yhat: vec![0.0; l.inputs],
            dh: vec![0.0; hd],
            dc: vec![0.0; hd],
            dz: vec![0.0; 4 * hd],
        }
    }
}

/// Runs one window (`w` rows of `k`, row-major). `h[0]`, `c[0]` are zero
/// state; step `t` writes `h[t+1]`, `c[t+1]`.
fn forward(p: &[f64], l: ParamLayout, x: &[f64], w: usize, s: &mut Scratch) {
    let (hd, k, g) = (l.hidden, l.inputs, 4 * l.hidden);
    let (wx, wh, b) = (&p[l.wx()], &p[l.wh()], &p[l.b()]);
    s.h[..hd].fill(0.0);
    s.c[..hd].fill(0.0);
    for t in 0..w {
        let (h_prev, h_rest) = s.h.split_at_mut((t + 1) * hd);
        let h_prev = &h_prev[t * hd..];
        let z = &mut s.gates[t * g..(t + 1) * g];
        z.copy_from_slice(b);
        let xt = &x[t * k..(t + 1) * k];
        for j in 0..k {
            axpy(z, &wx[j * g..(j + 1) * g], xt[j]);
        }
        for j in 0..hd {
            axpy(z, &wh[j * g..(j + 1) * g], h_prev[j]);
        }
        for v in &mut z[..2 * hd] {
            *v = sigmoid(*v);
        }
        for v in &mut z[2 * hd..3 * hd] {
            *v = v.tanh();
        }
        for v in &mut z[3 * hd..] {
            *v = sigmoid(*v);
        }
        let (c_prev, c_rest) = s.c.split_at_mut((t + 1) * hd);
        let c_prev = &c_prev[t * hd..];
        let c_new = &mut c_rest[..hd];
        let tc = &mut s.tc[t * hd..(t + 1) * hd];
        let h_new = &mut h_rest[..hd];
        for u in 0..hd {
            let (i, f, gg, o) = (z[u], z[hd + u], z[2 * hd + u], z[3 * hd + u]);
            c_new[u] = f * c_prev[u] + i * gg;
            tc[u] = c_new[u].tanh();
            h_new[u] = o * tc[u];
        }
    }
    let (wy, by) = (&p[l.wy()], &p[l.by()]);
    s.yhat.copy_from_slice(by);
    let h_last = &s.h[w * hd..(w + 1) * hd];
    for j in 0..hd {
        axpy(&mut s.yhat, &wy[j * k..(j + 1) * k], h_last[j]);
    }
}

/// Backpropagates `dy = ∂L/∂ŷ` through the window, accumulating into `grad`.
fn backward(p: &[f64], l: ParamLayout, x: &[f64], w: usize, dy: &[f64], s: &mut Scratch, grad: &mut [f64]) {
    let (hd, k, g) = (l.hidden, l.inputs, 4 * l.hidden);
    let (wy_r, by_r, wx_r, wh_r, b_r) = (l.wy(), l.by(), l.wx(), l.wh(), l.b());
    {
        let h_last = &s.h[w * hd..(w + 1) * hd];
        axpy(&mut grad[by_r], dy, 1.0);
        let gwy = &mut grad[wy_r.clone()];
        for j in 0..hd {
            axpy(&mut gwy[j * k..(j + 1) * k], dy, h_last[j]);
        }
        let wy = &p[wy_r];
        for j in 0..hd {
            s.dh[j] = dot(&wy[j * k..(j + 1) * k], dy);
        }
    }
    s.dc.fill(0.0);
    let wh = &p[wh_r.clone()];
    for t in (0..w).rev() {
        let z = &s.gates[t * g..(t + 1) * g];
        let tc = &s.tc[t * hd..(t + 1) * hd];
        let c_prev = &s.c[t * hd..(t + 1) * hd];
        for u in 0..hd {
            let (i, f, gg, o) = (z[u], z[hd + u], z[2 * hd + u], z[3 * hd + u]);
            let dh = s.dh[u];
            let d_o = dh * tc[u];
            let dc = s.dc[u] + dh * o * (1.0 - tc[u] * tc[u]);
            s.dz[u] = dc * gg * i * (1.0 - i);
            s.dz[hd + u] = dc * c_prev[u] * f * (1.0 - f);
            s.dz[2 * hd + u] = dc * i * (1.0 - gg * gg);
            s.dz[3 * hd + u] = d_o * o * (1.0 - o);
            s.dc[u] = dc * f;
        }
        let xt = &x[t * k..(t + 1) * k];
        let h_prev = &s.h[t * hd..(t + 1) * hd];
        {
            let gwx = &mut grad[wx_r.clone()];
            for j in 0..k {
                axpy(&mut gwx[j * g..(j + 1) * g], &s.dz, xt[j]);
            }
        }
        {
            let gwh = &mut grad[wh_r.clone()];
            for j in 0..hd {
                axpy(&mut gwh[j * g..(j + 1) * g], &s.dz, h_prev[j]);
            }
        }
        axpy(&mut grad[b_r.clone()], &s.dz, 1.0);
        for j in 0..hd {
            s.dh[j] = dot(&wh[j * g..(j + 1) * g], &s.dz);
        }
    }
}

/// Mean squared one-step error over every window of `data` (normalized,
/// `T × k`) and its gradient with respect to `params`.
pub fn lstm_loss_and_grad(
    params: &[f64],
    layout: ParamLayout,
    window: usize,
    data: ArrayView2<f64>,
) -> (f64, Vec<f64>) {
    let (t, k) = data.dim();
    let flat: Vec<f64> = data.iter().copied().collect();
    let n = t - window;
    let scale = 1.0 / (n * k) as f64;
    let mut grad = vec![0.0; params.len()];
    let mut s = Scratch::new(layout, window);
    let mut loss = 0.0;
    let mut dy = vec![0.0; k];
    for start in 0..n {
        let x = &flat[start * k..(start + window) * k];
        let target = &flat[(start + window) * k..(start + window + 1) * k];
        forward(params, layout, x, window, &mut s);
        for j in 0..k {
            let e = s.yhat[j] - target[j];
            loss += e * e * scale;
            dy[j] = 2.0 * e * scale;
        }
        backward(params, layout, x, window, &dy, &mut s, &mut grad);
    }
    (loss, grad)
}

/// Fits the LSTM on `y` (`T × k`, raw units).
pub fn lstm_fit(y: ArrayView2<f64>, config: LstmConfig) -> Result<LstmModel> {
    let (t, k) = y.dim();
    if config.hidden == 0 || config.window == 0 || k == 0 {
        return Err(TseriesError::Invalid("hidden size, window and series count must be positive".into()));
    }
    if !(config.step_size > 0.0) {
        return Err(TseriesError::Invalid("step size must be positive".into()));
    }
    if t <= config.window + 1 {
        return Err(TseriesError::SeriesTooShort(format!(
            "{t} rows, need more than window + 1 = {}",
            config.window + 1
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(TseriesError::Invalid("series contains non-finite values".into()));
    }
    let mut model = LstmModel::init(config, k);
    for (j, col) in y.columns().into_iter().enumerate() {
        model.norm_min[j] = col.iter().copied().fold(f64::INFINITY, f64::min);
        model.norm_max[j] = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let data = model.normalize(y);
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    for epoch in 0..config.epochs {
        let (loss, grad) = lstm_loss_and_grad(&model.params, model.layout, config.window, data.view());
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(TseriesError::NonFiniteLoss { epoch });
        }
        model.loss_history.push(loss);
        model.adam_steps += 1;
        let bc1 = 1.0 - beta1.powi(model.adam_steps as i32);
        let bc2 = 1.0 - beta2.powi(model.adam_steps as i32);
        for (((p, g), m), v) in model
            .params
            .iter_mut()
            .zip(&grad)
            .zip(model.adam_m.iter_mut())
            .zip(model.adam_v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= config.step_size * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        }
    }
    Ok(model)
}

/// Recursive `h`-step forecast: each prediction is appended to the window
/// in normalized space; outputs are returned in raw units.
pub fn lstm_forecast(m: &LstmModel, history: ArrayView2<f64>, h: usize) -> Result<ForecastResult> {
    let k = m.layout.inputs;
    let w = m.config.window;
    if history.ncols() != k {
        return Err(TseriesError::Invalid(format!("history has {} series, model has {k}", history.ncols())));
    }
    if history.nrows() < w {
        return Err(TseriesError::InsufficientHistory { have: history.nrows(), need: w });
    }
    let tail = history.slice(ndarray::s![history.nrows() - w.., ..]);
    let mut window: Vec<f64> = m.normalize(tail).iter().copied().collect();
    let mut rows = Vec::with_capacity(h);
    for _ in 0..h {
        let next = m.predict_next(&window);
        window.drain(..k);
        window.extend_from_slice(&next);
        let mut raw = next;
        m.denormalize_row(&mut raw);
        rows.push(raw);
    }
    Ok(ForecastResult::from_rows(rows, series_names(k), 0))
}
