//! Recurrent intent estimator.
//!
//! A dense input layer feeds a stack of LSTM layers whose last hidden state
//! is mapped to a one-step-ahead prediction of the six motion channels
//! `(vx, vy, vz, ωx, ωy, ωz)`. Longer horizons come from iterated prediction:
//! each output is appended to the window and the oldest sample dropped.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Planar;
use crate::error::{ensure_finite, Error, Result};
use crate::metrics::{resample_linear, TrialLog};

pub const CHANNELS: usize = 6;
pub const MODEL_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"DYADLSTM";

pub type Sample = [f64; CHANNELS];

/// Motion sample for a planar twist; the out-of-plane channels are zero.
pub fn sample_from_twist(t: &Planar) -> Sample {
    [t.x, t.y, 0.0, 0.0, 0.0, t.theta]
}

pub fn twist_from_sample(s: &Sample) -> Planar {
    Planar::new(s[0], s[1], s[5])
}

// ---------------------------------------------------------------------------
// Standardization

/// Mean and population standard deviation of a series. A zero-variance
/// series gets std 1 so standardizing it is still defined.
pub fn channel_stats(series: &[f64]) -> Result<(f64, f64)> {
    if series.is_empty() {
        return Err(Error::invalid("cannot standardize an empty series"));
    }
    ensure_finite(series, "series")?;
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-12 {
        Ok((mean, std))
    } else {
        log::warn!("zero-variance channel; std clamped to 1");
        Ok((mean, 1.0))
    }
}

pub fn standardize(series: &[f64], mean: f64, std: f64) -> Result<Vec<f64>> {
    if !(std > 0.0) {
        return Err(Error::invalid("standard deviation must be positive"));
    }
    Ok(series.iter().map(|v| (v - mean) / std).collect())
}

pub fn unstandardize(series: &[f64], mean: f64, std: f64) -> Vec<f64> {
    series.iter().map(|v| v * std + mean).collect()
}

/// Per-channel standardization constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Sample,
    pub std: Sample,
}

impl Default for Standardization {
    fn default() -> Self {
        Standardization {
            mean: [0.0; CHANNELS],
            std: [1.0; CHANNELS],
        }
    }
}

impl Standardization {
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Result<Self> {
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); CHANNELS];
        for s in samples {
            for (c, v) in cols.iter_mut().zip(s) {
                c.push(*v);
            }
        }
        let mut out = Standardization::default();
        for (i, c) in cols.iter().enumerate() {
            let (m, s) = channel_stats(c)?;
            out.mean[i] = m;
            out.std[i] = s;
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.std.iter().all(|s| *s > 0.0 && s.is_finite()) && self.mean.iter().all(|m| m.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("standardization std must be positive and finite"))
        }
    }

    pub fn apply(&self, s: &Sample) -> Sample {
        std::array::from_fn(|i| (s[i] - self.mean[i]) / self.std[i])
    }

    pub fn invert(&self, s: &Sample) -> Sample {
        std::array::from_fn(|i| s[i] * self.std[i] + self.mean[i])
    }
}

// ---------------------------------------------------------------------------
// Window

/// The most recent `capacity` standardized samples, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionWindow {
    capacity: usize,
    buf: VecDeque<Sample>,
}

impl PredictionWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("window capacity must be positive"));
        }
        Ok(PredictionWindow {
            capacity,
            buf: VecDeque::with_capacity(capacity + 1),
        })
    }

    pub fn from_samples(capacity: usize, samples: &[Sample]) -> Result<Self> {
        let mut w = PredictionWindow::new(capacity)?;
        for s in samples {
            w.push(*s);
        }
        Ok(w)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn is_warm(&self) -> bool {
        self.buf.len() == self.capacity
    }

    /// Appends a sample, dropping the oldest once full.
    pub fn push(&mut self, s: Sample) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(s);
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &Sample> + '_ {
        self.buf.iter()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.buf.back()
    }

    fn require_warm(&self) -> Result<()> {
        if self.is_warm() {
            Ok(())
        } else {
            Err(Error::ColdWindow {
                filled: self.buf.len(),
                capacity: self.capacity,
            })
        }
    }
}

/// Anything that maps a warm window to the next standardized sample.
pub trait Predictor {
    fn predict(&self, window: &PredictionWindow) -> Result<Sample>;
}

/// Rolls `predictor` forward `horizon` steps, feeding every prediction back
/// into a copy of the window.
pub fn iterated_predict<P: Predictor + ?Sized>(
    predictor: &P,
    window: &PredictionWindow,
    horizon: usize,
) -> Result<Vec<Sample>> {
    if horizon < 1 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    window.require_warm()?;
    let mut w = window.clone();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let y = predictor.predict(&w)?;
        w.push(y);
        out.push(y);
    }
    Ok(out)
}

/// Training loss: the plain sum of squared residuals, not averaged.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    Ok(predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum())
}

// ---------------------------------------------------------------------------
// Network

/// Network dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden: usize,
    pub window: usize,
    pub horizon: usize,
    /// Predict the change from the last input sample instead of the sample.
    pub residual: bool,
}

impl Default for ModelConfig {
    /// Desk-scale network.
    fn default() -> Self {
        ModelConfig {
            layers: 2,
            hidden: 32,
            window: 150,
            horizon: 50,
            residual: false,
        }
    }
}

impl ModelConfig {
    /// Three layers of 100 units.
    pub fn full() -> Self {
        ModelConfig {
            layers: 3,
            hidden: 100,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.window == 0 || self.horizon == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        Ok(())
    }
}

/// One LSTM layer. `w` maps `[input, h_prev]` to the stacked gate
/// pre-activations `[i, f, g, o]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// All trainable tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    /// `CHANNELS × hidden`
    pub input_w: Array2<f64>,
    pub input_b: Array1<f64>,
    pub lstm: Vec<LstmLayer>,
    /// `hidden × CHANNELS`
    pub output_w: Array2<f64>,
    pub output_b: Array1<f64>,
    /// Output is added to the last input sample.
    pub residual: bool,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct LayerCache {
    z: Array2<f64>,
    gates: Array2<f64>,
    c_prev: Array2<f64>,
    tanh_c: Array2<f64>,
}

struct StepCache {
    x: Array2<f64>,
    a_pre: Array2<f64>,
    layers: Vec<LayerCache>,
}

impl Weights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden;
        Weights {
            input_w: Array2::zeros((CHANNELS, h)),
            input_b: Array1::zeros(h),
            lstm: (0..cfg.layers)
                .map(|_| LstmLayer {
                    w: Array2::zeros((2 * h, 4 * h)),
                    b: Array1::zeros(4 * h),
                })
                .collect(),
            output_w: Array2::zeros((h, CHANNELS)),
            output_b: Array1::zeros(CHANNELS),
            residual: cfg.residual,
        }
    }

    /// Uniform `±1/√fan_in` initialization, forget-gate bias 1.
    pub fn random(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut w = Weights::zeros(cfg);
        let h = cfg.hidden;
        let mut fill = |a: &mut [f64], fan_in: usize| {
            let r = 1.0 / (fan_in as f64).sqrt();
            for v in a {
                *v = rng.gen_range(-r..r);
            }
        };
        fill(w.input_w.as_slice_mut().unwrap(), CHANNELS);
        for l in &mut w.lstm {
            fill(l.w.as_slice_mut().unwrap(), 2 * h);
            l.b.slice_mut(s![h..2 * h]).fill(1.0);
        }
        fill(w.output_w.as_slice_mut().unwrap(), h);
        w
    }

    pub fn hidden(&self) -> usize {
        self.input_b.len()
    }

    pub fn config_matches(&self, cfg: &ModelConfig) -> bool {
        let h = cfg.hidden;
        self.input_w.dim() == (CHANNELS, h)
            && self.input_b.len() == h
            && self.lstm.len() == cfg.layers
            && self
                .lstm
                .iter()
                .all(|l| l.w.dim() == (2 * h, 4 * h) && l.b.len() == 4 * h)
            && self.output_w.dim() == (h, CHANNELS)
            && self.output_b.len() == CHANNELS
            && self.residual == cfg.residual
    }

    /// Tensors in serialization order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![
            self.input_w.as_slice().unwrap(),
            self.input_b.as_slice().unwrap(),
        ];
        for l in &self.lstm {
            v.push(l.w.as_slice().unwrap());
            v.push(l.b.as_slice().unwrap());
        }
        v.push(self.output_w.as_slice().unwrap());
        v.push(self.output_b.as_slice().unwrap());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![
            self.input_w.as_slice_mut().unwrap(),
            self.input_b.as_slice_mut().unwrap(),
        ];
        for l in &mut self.lstm {
            v.push(l.w.as_slice_mut().unwrap());
            v.push(l.b.as_slice_mut().unwrap());
        }
        v.push(self.output_w.as_slice_mut().unwrap());
        v.push(self.output_b.as_slice_mut().unwrap());
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Runs a batch of sequences (`xs[t]` is `batch × CHANNELS`) and returns
    /// the prediction after the last step.
    fn run<'a, I>(&self, xs: I, mut cache: Option<&mut Vec<StepCache>>) -> Array2<f64>
    where
        I: IntoIterator<Item = ArrayView2<'a, f64>>,
    {
        let h = self.hidden();
        let mut xs = xs.into_iter().peekable();
        let b = xs.peek().map(|x| x.nrows()).unwrap_or(0);
        let mut hs: Vec<Array2<f64>> = vec![Array2::zeros((b, h)); self.lstm.len()];
        let mut cs: Vec<Array2<f64>> = vec![Array2::zeros((b, h)); self.lstm.len()];
        let mut last_x = None;
        for x in xs {
            last_x = Some(x);
            let a_pre = x.dot(&self.input_w) + &self.input_b;
            let mut inp = a_pre.mapv(|v| v.max(0.0));
            let mut layer_caches = Vec::with_capacity(self.lstm.len());
            for (l, layer) in self.lstm.iter().enumerate() {
                let z = concatenate![Axis(1), inp, hs[l]];
                let mut gates = z.dot(&layer.w) + &layer.b;
                let mut c_new = Array2::zeros((b, h));
                let mut h_new = Array2::zeros((b, h));
                let mut tanh_c = Array2::zeros((b, h));
                for r in 0..b {
                    let g = gates.row_mut(r).into_slice().unwrap();
                    for v in &mut g[..2 * h] {
                        *v = sigmoid(*v);
                    }
                    for v in &mut g[2 * h..3 * h] {
                        *v = v.tanh();
                    }
                    for v in &mut g[3 * h..] {
                        *v = sigmoid(*v);
                    }
                    let cp = cs[l].row(r);
                    for j in 0..h {
                        let c = g[h + j] * cp[j] + g[j] * g[2 * h + j];
                        let tc = c.tanh();
                        c_new[[r, j]] = c;
                        tanh_c[[r, j]] = tc;
                        h_new[[r, j]] = g[3 * h + j] * tc;
                    }
                }
                let c_prev = std::mem::replace(&mut cs[l], c_new);
                hs[l] = h_new.clone();
                if cache.is_some() {
                    layer_caches.push(LayerCache {
                        z,
                        gates,
                        c_prev,
                        tanh_c,
                    });
                }
                inp = h_new;
            }
            if let Some(c) = cache.as_deref_mut() {
                c.push(StepCache {
                    x: x.to_owned(),
                    a_pre,
                    layers: layer_caches,
                });
            }
        }
        let mut y = hs.last().unwrap().dot(&self.output_w) + &self.output_b;
        if let (true, Some(x)) = (self.residual, last_x) {
            y += &x;
        }
        y
    }

    /// Single-sequence forward pass on plain slices; same result as `run` with
    /// a batch of one, without the per-step allocations.
    fn run_single<'a, I>(&self, xs: I) -> Sample
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let h = self.hidden();
        let nl = self.lstm.len();
        let mut hs = vec![0.0; nl * h];
        let mut cs = vec![0.0; nl * h];
        let mut inp = vec![0.0; h];
        let mut z = vec![0.0; 2 * h];
        let mut g = vec![0.0; 4 * h];
        let iw = self.input_w.as_slice().unwrap();
        let ib = self.input_b.as_slice().unwrap();
        let mut last_x = None;
        for x in xs {
            last_x = Some(x);
            inp.copy_from_slice(ib);
            for (c, xv) in x.iter().enumerate() {
                for (v, w) in inp.iter_mut().zip(&iw[c * h..(c + 1) * h]) {
                    *v += xv * w;
                }
            }
            for v in &mut inp {
                *v = v.max(0.0);
            }
            for (l, layer) in self.lstm.iter().enumerate() {
                z[..h].copy_from_slice(&inp);
                z[h..].copy_from_slice(&hs[l * h..(l + 1) * h]);
                let lw = layer.w.as_slice().unwrap();
                g.copy_from_slice(layer.b.as_slice().unwrap());
                for (k, zv) in z.iter().enumerate() {
                    if *zv == 0.0 {
                        continue;
                    }
                    for (gv, w) in g.iter_mut().zip(&lw[k * 4 * h..(k + 1) * 4 * h]) {
                        *gv += zv * w;
                    }
                }
                let c = &mut cs[l * h..(l + 1) * h];
                let hl = &mut hs[l * h..(l + 1) * h];
                for j in 0..h {
                    let i = sigmoid(g[j]);
                    let f = sigmoid(g[h + j]);
                    let cand = g[2 * h + j].tanh();
                    let o = sigmoid(g[3 * h + j]);
                    c[j] = f * c[j] + i * cand;
                    hl[j] = o * c[j].tanh();
                }
                inp.copy_from_slice(hl);
            }
        }
        let mut y: Sample = std::array::from_fn(|c| self.output_b[c]);
        let ow = self.output_w.as_slice().unwrap();
        for (j, hv) in inp.iter().enumerate() {
            for (c, yv) in y.iter_mut().enumerate() {
                *yv += hv * ow[j * CHANNELS + c];
            }
        }
        if let (true, Some(x)) = (self.residual, last_x) {
            for (yv, xv) in y.iter_mut().zip(x) {
                *yv += xv;
            }
        }
        y
    }

    /// Batch loss (sum of squared residuals over batch and channels) and its
    /// gradient by backpropagation through time.
    pub fn loss_and_grad(&self, inputs: &[Array2<f64>], targets: &Array2<f64>) -> Result<(f64, Weights)> {
        if inputs.is_empty() {
            return Err(Error::invalid("empty input sequence"));
        }
        if targets.nrows() != inputs[0].nrows() || targets.ncols() != CHANNELS {
            return Err(Error::LengthMismatch {
                expected: inputs[0].nrows(),
                got: targets.nrows(),
            });
        }
        let h = self.hidden();
        let nl = self.lstm.len();
        let mut caches = Vec::with_capacity(inputs.len());
        let y = self.run(inputs.iter().map(|x| x.view()), Some(&mut caches));
        let resid = &y - targets;
        let loss = resid.iter().map(|r| r * r).sum::<f64>();
        let dy = resid * 2.0;

        let mut g = Weights {
            input_w: Array2::zeros(self.input_w.dim()),
            input_b: Array1::zeros(self.input_b.len()),
            lstm: self
                .lstm
                .iter()
                .map(|l| LstmLayer {
                    w: Array2::zeros(l.w.dim()),
                    b: Array1::zeros(l.b.len()),
                })
                .collect(),
            output_w: Array2::zeros(self.output_w.dim()),
            output_b: Array1::zeros(self.output_b.len()),
            residual: self.residual,
        };
        let last = caches.last().unwrap();
        let top = &last.layers[nl - 1];
        let h_top = &top.gates.slice(s![.., 3 * h..]) * &top.tanh_c;
        g.output_w = h_top.t().dot(&dy);
        g.output_b = dy.sum_axis(Axis(0));

        let b = dy.nrows();
        let mut dh_rec: Vec<Array2<f64>> = vec![Array2::zeros((b, h)); nl];
        let mut dc_rec: Vec<Array2<f64>> = vec![Array2::zeros((b, h)); nl];
        dh_rec[nl - 1] = dy.dot(&self.output_w.t());

        for step in caches.iter().rev() {
            let mut from_above: Option<Array2<f64>> = None;
            for l in (0..nl).rev() {
                let lc = &step.layers[l];
                let mut dh = std::mem::replace(&mut dh_rec[l], Array2::zeros((b, h)));
                if let Some(a) = from_above.take() {
                    dh += &a;
                }
                let mut dpre = Array2::zeros((b, 4 * h));
                let mut dc_prev = Array2::zeros((b, h));
                for r in 0..b {
                    let gt = lc.gates.row(r);
                    let gt = gt.as_slice().unwrap();
                    let dp = dpre.row_mut(r).into_slice().unwrap();
                    for j in 0..h {
                        let (i, f, gg, o) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                        let tc = lc.tanh_c[[r, j]];
                        let dhj = dh[[r, j]];
                        let dc = dhj * o * (1.0 - tc * tc) + dc_rec[l][[r, j]];
                        let d_o = dhj * tc;
                        dp[j] = dc * gg * i * (1.0 - i);
                        dp[h + j] = dc * lc.c_prev[[r, j]] * f * (1.0 - f);
                        dp[2 * h + j] = dc * i * (1.0 - gg * gg);
                        dp[3 * h + j] = d_o * o * (1.0 - o);
                        dc_prev[[r, j]] = dc * f;
                    }
                }
                g.lstm[l].w += &lc.z.t().dot(&dpre);
                g.lstm[l].b += &dpre.sum_axis(Axis(0));
                let dz = dpre.dot(&self.lstm[l].w.t());
                from_above = Some(dz.slice(s![.., ..h]).to_owned());
                dh_rec[l] = dz.slice(s![.., h..]).to_owned();
                dc_rec[l] = dc_prev;
            }
            let mut da = from_above.unwrap();
            da.zip_mut_with(&step.a_pre, |d, p| {
                if *p <= 0.0 {
                    *d = 0.0
                }
            });
            g.input_w += &step.x.t().dot(&da);
            g.input_b += &da.sum_axis(Axis(0));
        }
        Ok((loss, g))
    }

    /// Iterated prediction for a batch of windows.
    fn rollout(&self, mut xs: VecDeque<Array2<f64>>, horizon: usize) -> Vec<Array2<f64>> {
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let y = self.run(xs.iter().map(|x| x.view()), None);
            xs.pop_front();
            xs.push_back(y.clone());
            out.push(y);
        }
        out
    }
}

/// Stacks windows (each `window` samples long) into per-step batch matrices.
fn batch_steps(windows: &[&[Sample]]) -> VecDeque<Array2<f64>> {
    let t = windows.first().map(|w| w.len()).unwrap_or(0);
    (0..t)
        .map(|k| {
            Array2::from_shape_fn((windows.len(), CHANNELS), |(r, c)| windows[r][k][c])
        })
        .collect()
}

/// Trained intent estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentModel {
    pub version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub standardization: Standardization,
    pub weights: Weights,
}

impl RecurrentModel {
    pub fn new(config: ModelConfig, standardization: Standardization, seed: u64) -> Result<Self> {
        config.validate()?;
        standardization.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(RecurrentModel {
            version: MODEL_VERSION,
            config,
            seed,
            standardization,
            weights: Weights::random(&config, &mut rng),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.standardization.validate()?;
        if !self.weights.config_matches(&self.config) {
            return Err(Error::ModelFormat("weight shapes do not match the config".into()));
        }
        Ok(())
    }

    /// One-step-ahead prediction, standardized units.
    pub fn forward(&self, window: &PredictionWindow) -> Result<Sample> {
        window.require_warm()?;
        Ok(self.weights.run_single(window.samples()))
    }

    /// Iterated predictions over the configured horizon.
    pub fn predict_horizon(&self, window: &PredictionWindow) -> Result<Vec<Sample>> {
        iterated_predict(self, window, self.config.horizon)
    }

    /// Iterated prediction for many windows at once.
    pub fn rollout_batch(&self, windows: &[&[Sample]], horizon: usize) -> Result<Vec<Vec<Sample>>> {
        if horizon < 1 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        for w in windows {
            if w.len() != self.config.window {
                return Err(Error::ColdWindow {
                    filled: w.len(),
                    capacity: self.config.window,
                });
            }
        }
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let steps = self.weights.rollout(batch_steps(windows), horizon);
        Ok((0..windows.len())
            .map(|r| {
                steps
                    .iter()
                    .map(|y| std::array::from_fn(|c| y[[r, c]]))
                    .collect()
            })
            .collect())
    }

    // -- model file -------------------------------------------------------

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<model>", e);
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&self.version.to_le_bytes());
        for d in [
            self.config.layers,
            self.config.hidden,
            self.config.window,
            self.config.horizon,
            CHANNELS,
            self.config.residual as usize,
        ] {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.extend_from_slice(&self.seed.to_le_bytes());
        for v in self.standardization.mean.iter().chain(&self.standardization.std) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(self.weights.parameter_count() as u64).to_le_bytes());
        for t in self.weights.tensors() {
            for v in t {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io("<model>", e))?;
        let mut cur = Cursor { b: &bytes, at: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let layers = cur.u32()? as usize;
        let hidden = cur.u32()? as usize;
        let window = cur.u32()? as usize;
        let horizon = cur.u32()? as usize;
        let channels = cur.u32()? as usize;
        if channels != CHANNELS {
            return Err(Error::ModelFormat(format!("expected {CHANNELS} channels, got {channels}")));
        }
        let residual = match cur.u32()? {
            0 => false,
            1 => true,
            f => return Err(Error::ModelFormat(format!("unknown flags {f}"))),
        };
        let config = ModelConfig {
            layers,
            hidden,
            window,
            horizon,
            residual,
        };
        config
            .validate()
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        if layers > 64 || hidden > 4096 {
            return Err(Error::ModelFormat("implausible dimensions".into()));
        }
        let seed = cur.u64()?;
        let mut standardization = Standardization::default();
        for v in standardization.mean.iter_mut().chain(standardization.std.iter_mut()) {
            *v = cur.f64()?;
        }
        standardization
            .validate()
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        let mut weights = Weights::zeros(&config);
        let count = cur.u64()? as usize;
        if count != weights.parameter_count() {
            return Err(Error::ModelFormat(format!(
                "parameter count {count} does not match dimensions ({})",
                weights.parameter_count()
            )));
        }
        for t in weights.tensors_mut() {
            for v in t {
                *v = cur.f64()?;
            }
        }
        if cur.at != bytes.len() {
            return Err(Error::ModelFormat("trailing bytes".into()));
        }
        let model = RecurrentModel {
            version,
            config,
            seed,
            standardization,
            weights,
        };
        if !model.weights.is_finite() {
            return Err(Error::ModelFormat("non-finite weights".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }

    /// Human-readable dump of the weights.
    pub fn to_json(&self) -> Result<String> {
        let rows = |a: &Array2<f64>| a.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        let export = ModelExport {
            version: self.version,
            config: self.config,
            seed: self.seed,
            standardization: self.standardization,
            input_w: rows(&self.weights.input_w),
            input_b: self.weights.input_b.to_vec(),
            lstm: self
                .weights
                .lstm
                .iter()
                .map(|l| LayerExport {
                    w: rows(&l.w),
                    b: l.b.to_vec(),
                })
                .collect(),
            output_w: rows(&self.weights.output_w),
            output_b: self.weights.output_b.to_vec(),
        };
        Ok(serde_json::to_string_pretty(&export)?)
    }
}

impl Predictor for RecurrentModel {
    fn predict(&self, window: &PredictionWindow) -> Result<Sample> {
        self.forward(window)
    }
}

#[derive(Serialize)]
struct LayerExport {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize)]
struct ModelExport {
    version: u32,
    config: ModelConfig,
    seed: u64,
    standardization: Standardization,
    input_w: Vec<Vec<f64>>,
    input_b: Vec<f64>,
    lstm: Vec<LayerExport>,
    output_w: Vec<Vec<f64>>,
    output_b: Vec<f64>,
}

struct Cursor<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        if end > self.b.len() {
            return Err(Error::ModelFormat("truncated file".into()));
        }
        let s = &self.b[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

// ---------------------------------------------------------------------------
// Corpus

/// One trial's motion, physical units, on a uniform clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionTrial {
    pub name: String,
    pub samples: Vec<Sample>,
}

#[derive(Deserialize)]
struct CsvRow {
    #[allow(dead_code)]
    t: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    wx: f64,
    wy: f64,
    wz: f64,
}

impl MotionTrial {
    /// The follower's sensed twist resampled onto a `rate_hz` clock.
    pub fn from_log(name: impl Into<String>, log: &TrialLog, rate_hz: f64) -> Result<Self> {
        log.validate()?;
        let times = log.times();
        let (t0, t1) = (times[0], *times.last().unwrap());
        let n = ((t1 - t0) * rate_hz + 1e-9).floor() as usize;
        let clock: Vec<f64> = (0..=n).map(|k| t0 + k as f64 / rate_hz).collect();
        let chan = |f: &dyn Fn(&Planar) -> f64| -> Result<Vec<f64>> {
            let v: Vec<f64> = log.steps.iter().map(|s| f(&s.sensed_twist)).collect();
            resample_linear(&times, &v, &clock)
        };
        let vx = chan(&|p| p.x)?;
        let vy = chan(&|p| p.y)?;
        let wz = chan(&|p| p.theta)?;
        Ok(MotionTrial {
            name: name.into(),
            samples: (0..clock.len())
                .map(|k| [vx[k], vy[k], 0.0, 0.0, 0.0, wz[k]])
                .collect(),
        })
    }

    /// CSV with header `t,vx,vy,vz,wx,wy,wz`.
    pub fn read_csv<R: Read>(name: impl Into<String>, r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let expected = ["t", "vx", "vy", "vz", "wx", "wy", "wz"];
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(Error::invalid(format!(
                "corpus CSV header must be {}",
                expected.join(",")
            )));
        }
        let mut samples = Vec::new();
        for row in rdr.deserialize::<CsvRow>() {
            let r = row?;
            let s = [r.vx, r.vy, r.vz, r.wx, r.wy, r.wz];
            ensure_finite(&s, "corpus sample")?;
            samples.push(s);
        }
        Ok(MotionTrial {
            name: name.into(),
            samples,
        })
    }

    pub fn write_csv<W: Write>(&self, w: W, rate_hz: f64) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "vx", "vy", "vz", "wx", "wy", "wz"])?;
        for (k, s) in self.samples.iter().enumerate() {
            let mut rec = vec![(k as f64 / rate_hz).to_string()];
            rec.extend(s.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Standardized trials with a train/validation split by trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    /// Standardized samples.
    pub trials: Vec<MotionTrial>,
    pub standardization: Standardization,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Corpus {
    /// Fits standardization on every trial, then shuffles trials into the
    /// training and validation sets.
    pub fn new(trials: Vec<MotionTrial>, train_fraction: f64, seed: u64) -> Result<Self> {
        if trials.len() < 2 {
            return Err(Error::invalid("corpus needs at least two trials"));
        }
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must be in (0, 1)"));
        }
        let standardization = Standardization::fit(trials.iter().flat_map(|t| t.samples.iter()))?;
        let trials: Vec<MotionTrial> = trials
            .into_iter()
            .map(|t| MotionTrial {
                name: t.name,
                samples: t.samples.iter().map(|s| standardization.apply(s)).collect(),
            })
            .collect();
        let mut idx: Vec<usize> = (0..trials.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = ((trials.len() as f64 * train_fraction).round() as usize).clamp(1, trials.len() - 1);
        let validation = idx.split_off(n_train);
        Ok(Corpus {
            trials,
            standardization,
            train: idx,
            validation,
        })
    }

    /// Every trial in the validation set, standardized with a model's own
    /// statistics.
    pub fn for_evaluation(trials: Vec<MotionTrial>, standardization: Standardization) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::invalid("no trials to evaluate"));
        }
        let trials: Vec<MotionTrial> = trials
            .into_iter()
            .map(|t| MotionTrial {
                name: t.name,
                samples: t.samples.iter().map(|s| standardization.apply(s)).collect(),
            })
            .collect();
        Ok(Corpus {
            validation: (0..trials.len()).collect(),
            trials,
            standardization,
            train: Vec::new(),
        })
    }

    fn sample_count(&self, set: &[usize]) -> usize {
        set.iter().map(|&i| self.trials[i].samples.len()).sum()
    }
}

// ---------------------------------------------------------------------------
// Training

/// Curriculum and optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub grad_clip: f64,
    /// Phase 0 ends once the per-window batch loss stays below this.
    pub loss_threshold: f64,
    pub phase0_max_iterations: usize,
    /// Curriculum phases after phase 0; phase k has k predicted trailing steps.
    pub phases: usize,
    pub iterations_per_phase: usize,
    /// Predicted windows generated at the start of each phase.
    pub pool_size: usize,
    /// Share of each curriculum batch drawn from the predicted pool.
    pub predicted_fraction: f64,
    /// Learning rate at the last curriculum phase as a fraction of
    /// `learning_rate` (cosine decay over the phases; 1 keeps it constant).
    pub final_lr_fraction: f64,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            batch_size: 32,
            learning_rate: 1e-3,
            grad_clip: 5.0,
            loss_threshold: 0.002,
            phase0_max_iterations: 2500,
            phases: 50,
            iterations_per_phase: 60,
            pool_size: 96,
            predicted_fraction: 0.5,
            final_lr_fraction: 0.1,
            seed: 7,
        }
    }
}

impl TrainSchedule {
    /// Learning rate used during `phase` (phase 0 and phase 1 at the full rate).
    pub fn learning_rate_at(&self, phase: usize) -> f64 {
        if self.phases <= 1 || phase <= 1 {
            return self.learning_rate;
        }
        let x = (phase - 1) as f64 / (self.phases - 1) as f64;
        let f = self.final_lr_fraction;
        self.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * x).cos()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.pool_size == 0 {
            return Err(Error::invalid("batch and pool sizes must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.grad_clip > 0.0 && self.loss_threshold > 0.0) {
            return Err(Error::invalid("learning rate, clip and threshold must be positive"));
        }
        if !(0.0..=1.0).contains(&self.predicted_fraction) {
            return Err(Error::invalid("predicted fraction must be in [0, 1]"));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::invalid("final learning-rate fraction must be in (0, 1]"));
        }
        Ok(())
    }
}

/// A batch of windows with one-step-ahead targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingBatch {
    /// `inputs[t]` is `batch × CHANNELS`.
    pub inputs: Vec<Array2<f64>>,
    pub targets: Array2<f64>,
    /// Trailing steps of each window that are model predictions.
    pub predicted_steps: Vec<usize>,
}

impl TrainingBatch {
    fn from_windows(windows: &[(Vec<Sample>, Sample, usize)]) -> Self {
        let refs: Vec<&[Sample]> = windows.iter().map(|w| w.0.as_slice()).collect();
        TrainingBatch {
            inputs: batch_steps(&refs).into(),
            targets: Array2::from_shape_fn((windows.len(), CHANNELS), |(r, c)| windows[r].1[c]),
            predicted_steps: windows.iter().map(|w| w.2).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub iterations: usize,
    /// Mean per-window loss over the phase.
    pub mean_loss: f64,
    pub final_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub phase0_converged: bool,
    pub phases: Vec<PhaseRecord>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(w: &Weights, lr: f64) -> Self {
        let z: Vec<Vec<f64>> = w.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            m: z.clone(),
            v: z,
            t: 0,
            lr,
        }
    }

    fn step(&mut self, w: &mut Weights, g: &Weights, clip: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let grads = g.tensors();
        let norm = grads
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let scale = if norm > clip { clip / norm } else { 1.0 };
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for (k, p) in w.tensors_mut().into_iter().enumerate() {
            let (m, v, gk) = (&mut self.m[k], &mut self.v[k], grads[k]);
            for j in 0..p.len() {
                let gj = gk[j] * scale;
                m[j] = B1 * m[j] + (1.0 - B1) * gj;
                v[j] = B2 * v[j] + (1.0 - B2) * gj * gj;
                p[j] -= self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + EPS);
            }
        }
    }
}

struct Sampler<'a> {
    corpus: &'a Corpus,
    /// (trial, length) for trials long enough to draw from.
    trials: Vec<usize>,
    window: usize,
}

impl<'a> Sampler<'a> {
    fn new(corpus: &'a Corpus, set: &[usize], window: usize, extra: usize) -> Result<Self> {
        let trials: Vec<usize> = set
            .iter()
            .copied()
            .filter(|&i| corpus.trials[i].samples.len() > window + extra)
            .collect();
        if trials.is_empty() {
            return Err(Error::invalid(format!(
                "no trial longer than {} samples",
                window + extra
            )));
        }
        Ok(Sampler {
            corpus,
            trials,
            window,
        })
    }

    /// Start index such that `window + extra + 1` samples are available.
    fn draw(&self, rng: &mut ChaCha8Rng, extra: usize) -> (&'a [Sample], usize) {
        loop {
            let i = self.trials[rng.gen_range(0..self.trials.len())];
            let s = &self.corpus.trials[i].samples;
            if s.len() > self.window + extra {
                let start = rng.gen_range(0..s.len() - self.window - extra);
                return (s, start);
            }
        }
    }

    fn real(&self, rng: &mut ChaCha8Rng) -> (Vec<Sample>, Sample, usize) {
        let (s, a) = self.draw(rng, 0);
        (s[a..a + self.window].to_vec(), s[a + self.window], 0)
    }
}

/// Trains a model on the corpus training set: phase 0 on real windows until
/// the loss threshold, then the appended-prediction curriculum.
pub fn train(
    corpus: &Corpus,
    config: ModelConfig,
    schedule: &TrainSchedule,
) -> Result<(RecurrentModel, TrainingHistory)> {
    config.validate()?;
    schedule.validate()?;
    let mut model = RecurrentModel::new(config, corpus.standardization, schedule.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed.wrapping_add(1));
    let sampler = Sampler::new(corpus, &corpus.train, config.window, 0)?;
    let mut adam = Adam::new(&model.weights, schedule.learning_rate);
    let mut history = TrainingHistory::default();
    let bs = schedule.batch_size as f64;

    let mut step = |model: &mut RecurrentModel, batch: &TrainingBatch, phase: usize, it: usize| -> Result<f64> {
        adam.lr = schedule.learning_rate_at(phase);
        let (loss, g) = model.weights.loss_and_grad(&batch.inputs, &batch.targets)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                phase,
                iteration: it,
                loss,
            });
        }
        adam.step(&mut model.weights, &g, schedule.grad_clip);
        if !model.weights.is_finite() {
            return Err(Error::Diverged {
                phase,
                iteration: it,
                loss,
            });
        }
        Ok(loss / bs)
    };

    // phase 0
    let mut smooth = None::<f64>;
    let mut rec = PhaseRecord::default();
    let mut total = 0.0;
    for it in 0..schedule.phase0_max_iterations {
        let windows: Vec<_> = (0..schedule.batch_size).map(|_| sampler.real(&mut rng)).collect();
        let loss = step(&mut model, &TrainingBatch::from_windows(&windows), 0, it)?;
        total += loss;
        rec.iterations = it + 1;
        rec.final_loss = loss;
        let s = smooth.map_or(loss, |s| 0.9 * s + 0.1 * loss);
        smooth = Some(s);
        if it >= 10 && s < schedule.loss_threshold {
            history.phase0_converged = true;
            break;
        }
    }
    rec.mean_loss = total / rec.iterations.max(1) as f64;
    log::info!(
        "phase 0: {} iterations, loss {:.4} (converged: {})",
        rec.iterations,
        rec.final_loss,
        history.phase0_converged
    );
    if !history.phase0_converged {
        log::warn!("phase 0 stopped at the iteration cap above the loss threshold");
    }
    history.phases.push(rec);

    // curriculum
    let n_pred = ((schedule.batch_size as f64 * schedule.predicted_fraction).round() as usize)
        .min(schedule.batch_size);
    for k in 1..=schedule.phases {
        let pool_sampler = Sampler::new(corpus, &corpus.train, config.window, k)?;
        let pool = predicted_pool(&model, &pool_sampler, &mut rng, k, schedule.pool_size)?;
        let mut rec = PhaseRecord {
            phase: k,
            ..Default::default()
        };
        let mut total = 0.0;
        for it in 0..schedule.iterations_per_phase {
            let mut windows: Vec<_> = (0..n_pred)
                .map(|_| pool[rng.gen_range(0..pool.len())].clone())
                .collect();
            windows.extend((n_pred..schedule.batch_size).map(|_| sampler.real(&mut rng)));
            let loss = step(&mut model, &TrainingBatch::from_windows(&windows), k, it)?;
            total += loss;
            rec.iterations = it + 1;
            rec.final_loss = loss;
        }
        rec.mean_loss = total / rec.iterations.max(1) as f64;
        log::debug!("phase {k}: loss {:.4}", rec.mean_loss);
        history.phases.push(rec);
    }
    Ok((model, history))
}

/// Windows whose last `k` samples are the model's own iterated predictions,
/// each paired with the real sample that follows.
fn predicted_pool(
    model: &RecurrentModel,
    sampler: &Sampler,
    rng: &mut ChaCha8Rng,
    k: usize,
    size: usize,
) -> Result<Vec<(Vec<Sample>, Sample, usize)>> {
    let w = model.config.window;
    let draws: Vec<(&[Sample], usize)> = (0..size).map(|_| sampler.draw(rng, k)).collect();
    let windows: Vec<&[Sample]> = draws.iter().map(|(s, a)| &s[*a..*a + w]).collect();
    let preds = model.rollout_batch(&windows, k)?;
    Ok(draws
        .iter()
        .zip(preds)
        .map(|((s, a), p)| {
            let mut win = s[a + k..a + w].to_vec();
            win.extend_from_slice(&p);
            (win, s[a + w + k], k)
        })
        .collect())
}

/// Multi-step accuracy of a model on one corpus split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutScore {
    pub windows: usize,
    /// RMSE of the model's iterated predictions, standardized units.
    pub model_rmse: f64,
    /// RMSE of repeating the last observed sample.
    pub persistence_rmse: f64,
    /// Largest |prediction| over all channels and steps.
    pub max_abs_prediction: f64,
    /// Per-channel model and persistence RMSE.
    pub channel_rmse: [(f64, f64); CHANNELS],
}

/// Scores `horizon`-step rollouts from windows taken every `stride` samples
/// of the validation trials.
pub fn evaluate_rollouts(
    model: &RecurrentModel,
    corpus: &Corpus,
    horizon: usize,
    stride: usize,
) -> Result<RolloutScore> {
    if stride == 0 || horizon == 0 {
        return Err(Error::invalid("stride and horizon must be positive"));
    }
    let w = model.config.window;
    let mut starts: Vec<(&[Sample], usize)> = Vec::new();
    for &i in &corpus.validation {
        let s = &corpus.trials[i].samples;
        if s.len() < w + horizon {
            continue;
        }
        let mut a = 0;
        while a + w + horizon <= s.len() {
            starts.push((s, a));
            a += stride;
        }
    }
    if starts.is_empty() {
        return Err(Error::invalid("no validation window long enough"));
    }
    let (mut se_model, mut se_persist, mut max_abs, mut n) = (0.0, 0.0, 0.0f64, 0usize);
    let mut per = [(0.0, 0.0); CHANNELS];
    for chunk in starts.chunks(64) {
        let windows: Vec<&[Sample]> = chunk.iter().map(|(s, a)| &s[*a..*a + w]).collect();
        let preds = model.rollout_batch(&windows, horizon)?;
        for ((s, a), p) in chunk.iter().zip(preds) {
            let last = s[a + w - 1];
            for (h, ph) in p.iter().enumerate() {
                let truth = s[a + w + h];
                for c in 0..CHANNELS {
                    let (em, ep) = ((ph[c] - truth[c]).powi(2), (last[c] - truth[c]).powi(2));
                    se_model += em;
                    se_persist += ep;
                    per[c].0 += em;
                    per[c].1 += ep;
                    max_abs = max_abs.max(ph[c].abs());
                    n += 1;
                }
            }
        }
    }
    Ok(RolloutScore {
        windows: starts.len(),
        model_rmse: (se_model / n as f64).sqrt(),
        persistence_rmse: (se_persist / n as f64).sqrt(),
        max_abs_prediction: max_abs,
        channel_rmse: per.map(|(a, b)| {
            let m = (n / CHANNELS) as f64;
            ((a / m).sqrt(), (b / m).sqrt())
        }),
    })
}

/// Samples available in the training split.
pub fn training_samples(corpus: &Corpus) -> usize {
    corpus.sample_count(&corpus.train)
}
