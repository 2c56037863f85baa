//! Small convolutional mask predictor: a stack of strided convolutions with
//! ReLU (optionally max pooling), a fully connected layer with `s^2` outputs
//! and an element-wise sigmoid. Trained with the logistic loss summed over
//! the positive and negative pixels of a trimap target.

mod checkpoint;
mod layers;
mod train;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datasetgen::{Label, LabelCounts, Trimap};
use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, ProbMap, RasterU8};
use layers::{ConvPlan, FcPlan, PoolPlan};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use train::{dihedral, train, Augment, LossReport, TrainConfig};

/// Probabilities are clamped to `[EPS, 1 - EPS]` inside the loss.
pub const LOSS_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    /// Convolution with `kernel / 2` zero padding, followed by ReLU.
    Conv { out_channels: usize, kernel: usize, stride: usize },
    MaxPool { size: usize },
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv { out_channels, kernel, stride } => write!(f, "conv:{out_channels}:{kernel}:{stride}"),
            LayerSpec::MaxPool { size } => write!(f, "pool:{size}"),
        }
    }
}

/// Ordered layer list, written as whitespace-separated `conv:<out>:<k>:<stride>`
/// and `pool:<size>` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Architecture(pub Vec<LayerSpec>);

impl Default for Architecture {
    fn default() -> Self {
        Architecture(
            [8, 16, 32]
                .into_iter()
                .map(|c| LayerSpec::Conv { out_channels: c, kernel: 3, stride: 2 })
                .collect(),
        )
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |tok: &str| Error::invalid("learner.arch", format!("bad layer {tok:?}"));
        let layers = s
            .split_whitespace()
            .map(|tok| {
                let parts: Vec<&str> = tok.split(':').collect();
                let nums: Vec<usize> = parts[1..].iter().map(|p| p.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad(tok))?;
                match (parts[0], nums.as_slice()) {
                    ("conv", &[out_channels, kernel, stride]) if out_channels > 0 && kernel % 2 == 1 && stride > 0 => {
                        Ok(LayerSpec::Conv { out_channels, kernel, stride })
                    }
                    ("pool", &[size]) if size > 0 => Ok(LayerSpec::MaxPool { size }),
                    _ => Err(bad(tok)),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Architecture(layers))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Plan {
    Conv(ConvPlan),
    Pool(PoolPlan),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    plans: Vec<Plan>,
    fc: FcPlan,
    param_count: usize,
}

impl Layout {
    fn new(arch: &Architecture, w: usize, in_channels: usize, s: usize) -> Result<Layout> {
        if w == 0 || in_channels == 0 || s == 0 {
            return Err(Error::invalid("learner", "input side, channels and output side must be >= 1"));
        }
        let (mut c, mut h, mut wd) = (in_channels, w, w);
        let mut off = 0;
        let mut plans = Vec::new();
        for layer in &arch.0 {
            match *layer {
                LayerSpec::Conv { out_channels, kernel, stride } => {
                    let pad = kernel / 2;
                    if h + 2 * pad < kernel || wd + 2 * pad < kernel {
                        return Err(Error::invalid("learner.arch", format!("{layer} does not fit a {wd}x{h} input")));
                    }
                    let p = ConvPlan {
                        in_c: c,
                        in_h: h,
                        in_w: wd,
                        out_c: out_channels,
                        out_h: (h + 2 * pad - kernel) / stride + 1,
                        out_w: (wd + 2 * pad - kernel) / stride + 1,
                        k: kernel,
                        stride,
                        pad,
                        w_off: off,
                        b_off: off + out_channels * c * kernel * kernel,
                    };
                    off = p.b_off + out_channels;
                    (c, h, wd) = (p.out_c, p.out_h, p.out_w);
                    plans.push(Plan::Conv(p));
                }
                LayerSpec::MaxPool { size } => {
                    if h < size || wd < size {
                        return Err(Error::invalid("learner.arch", format!("{layer} does not fit a {wd}x{h} input")));
                    }
                    let p = PoolPlan { c, in_h: h, in_w: wd, out_h: h / size, out_w: wd / size, size };
                    (h, wd) = (p.out_h, p.out_w);
                    plans.push(Plan::Pool(p));
                }
            }
        }
        let n_in = c * h * wd;
        let n_out = s * s;
        let fc = FcPlan { n_in, n_out, w_off: off, b_off: off + n_in * n_out };
        Ok(Layout { plans, fc, param_count: fc.b_off + n_out })
    }
}

/// Network description plus its flat parameter vector (per layer: weights in
/// `[out][in][ky][kx]` order, then biases).
#[derive(Debug, Clone, PartialEq)]
pub struct SegNet {
    arch: Architecture,
    w: usize,
    in_channels: usize,
    s: usize,
    seed: u64,
    layout: Layout,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass.
struct Trace {
    /// Input of every layer followed by the flattened input of the FC layer.
    acts: Vec<Vec<f64>>,
    cols: Vec<Vec<f64>>,
    argmax: Vec<Vec<usize>>,
    logits: Vec<f64>,
}

impl SegNet {
    /// Seeded uniform fan-in initialization: conv weights in
    /// `±sqrt(6 / fan_in)`, FC weights in `±sqrt(3 / fan_in)`, zero biases.
    pub fn new(arch: Architecture, w: usize, in_channels: usize, s: usize, seed: u64) -> Result<SegNet> {
        let layout = Layout::new(&arch, w, in_channels, s)?;
        let mut params = vec![0.0; layout.param_count];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for plan in &layout.plans {
            if let Plan::Conv(p) = plan {
                let bound = (6.0 / p.patch_len() as f64).sqrt();
                for v in &mut params[p.w_off..p.b_off] {
                    *v = rng.gen_range(-bound..=bound);
                }
            }
        }
        let fc = layout.fc;
        let bound = (3.0 / fc.n_in as f64).sqrt();
        for v in &mut params[fc.w_off..fc.b_off] {
            *v = rng.gen_range(-bound..=bound);
        }
        Ok(SegNet { arch, w, in_channels, s, seed, layout, params })
    }

    pub fn with_params(arch: Architecture, w: usize, in_channels: usize, s: usize, seed: u64, params: Vec<f64>) -> Result<SegNet> {
        let layout = Layout::new(&arch, w, in_channels, s)?;
        if params.len() != layout.param_count {
            return Err(Error::DimensionMismatch(format!(
                "architecture needs {} parameters, got {}",
                layout.param_count,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("parameters", "non-finite value"));
        }
        Ok(SegNet { arch, w, in_channels, s, seed, layout, params })
    }

    /// Sets the final layer's weights and biases to zero, so every output is 0.5.
    pub fn zero_output_layer(&mut self) {
        let fc = self.layout.fc;
        self.params[fc.w_off..].fill(0.0);
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_side(&self) -> usize {
        self.w
    }

    pub fn input_channels(&self) -> usize {
        self.in_channels
    }

    pub fn output_side(&self) -> usize {
        self.s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn input_vector(&self, image: &RasterU8) -> Result<Vec<f64>> {
        if image.width() != self.w || image.height() != self.w || image.channels() != self.in_channels {
            return Err(Error::DimensionMismatch(format!(
                "net expects {w}x{w}x{c}, got {}x{}x{}",
                image.width(),
                image.height(),
                image.channels(),
                w = self.w,
                c = self.in_channels
            )));
        }
        let (n, c) = (self.w * self.w, self.in_channels);
        let data = image.data();
        let mut x = vec![0.0; c * n];
        for i in 0..n {
            for ch in 0..c {
                x[ch * n + i] = data[i * c + ch] as f64 / 255.0 - 0.5;
            }
        }
        Ok(x)
    }

    fn trace(&self, image: &RasterU8) -> Result<Trace> {
        let mut acts = vec![self.input_vector(image)?];
        let mut cols = Vec::new();
        let mut argmax = Vec::new();
        for plan in &self.layout.plans {
            let input = acts.last().expect("input is always present");
            let next = match plan {
                Plan::Conv(p) => {
                    let mut col = Vec::new();
                    let out = layers::conv_forward(p, &self.params, input, &mut col);
                    cols.push(col);
                    out
                }
                Plan::Pool(p) => {
                    let mut idx = Vec::new();
                    let out = layers::pool_forward(p, input, &mut idx);
                    argmax.push(idx);
                    out
                }
            };
            acts.push(next);
        }
        let logits = layers::fc_forward(&self.layout.fc, &self.params, acts.last().expect("non-empty"));
        Ok(Trace { acts, cols, argmax, logits })
    }

    /// Foreground probability per output cell, `s x s`.
    pub fn forward(&self, image: &RasterU8) -> Result<ProbMap> {
        let t = self.trace(image)?;
        ProbMap::new(self.s, self.s, t.logits.iter().map(|&z| sigmoid(z)).collect())
    }

    /// Adds the gradient of the summed masked loss of every sample in the
    /// batch to `grad`; returns the per-sample losses and the label counts.
    pub fn accumulate_gradients(&self, batch: &[(&RasterU8, &Trimap)], grad: &mut [f64]) -> Result<(Vec<f64>, LabelCounts)> {
        if grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch("gradient buffer size".into()));
        }
        let mut traces = Vec::with_capacity(batch.len());
        let mut dzs = Vec::with_capacity(batch.len());
        let mut losses = Vec::with_capacity(batch.len());
        let mut counts = LabelCounts::default();
        for &(image, target) in batch {
            let t = self.trace(image)?;
            let pred: Vec<f64> = t.logits.iter().map(|&z| sigmoid(z)).collect();
            let (loss, c) = loss_terms(&pred, target, self.s)?;
            counts.positive += c.positive;
            counts.negative += c.negative;
            counts.dont_care += c.dont_care;
            losses.push(loss);
            dzs.push(logit_gradient(&pred, target));
            traces.push(t);
        }
        let xs: Vec<&[f64]> = traces.iter().map(|t| t.acts.last().expect("non-empty").as_slice()).collect();
        let dxs = layers::fc_backward_batch(&self.layout.fc, &self.params, &xs, &dzs, grad);
        for (t, mut d) in traces.iter().zip(dxs) {
            let mut conv_i = t.cols.len();
            let mut pool_i = t.argmax.len();
            for (li, plan) in self.layout.plans.iter().enumerate().rev() {
                match plan {
                    Plan::Conv(p) => {
                        conv_i -= 1;
                        match layers::conv_backward(p, &self.params, &t.cols[conv_i], &t.acts[li + 1], &d, grad, li > 0) {
                            Some(next) => d = next,
                            None => break,
                        }
                    }
                    Plan::Pool(p) => {
                        pool_i -= 1;
                        d = layers::pool_backward(p, &t.argmax[pool_i], &d);
                    }
                }
            }
        }
        Ok((losses, counts))
    }

    /// Which conv units are active and which inputs win each max-pool window.
    /// The loss is smooth in the parameters as long as this stays fixed.
    fn activation_pattern(&self, t: &Trace) -> Vec<usize> {
        let mut out = Vec::new();
        for a in &t.acts[1..] {
            out.extend(a.iter().map(|&v| (v > 0.0) as usize));
        }
        for idx in &t.argmax {
            out.extend_from_slice(idx);
        }
        out
    }

    /// Loss and its exact gradient for one sample.
    pub fn backward(&self, image: &RasterU8, target: &Trimap) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let (losses, _) = self.accumulate_gradients(&[(image, target)], &mut grad)?;
        Ok((losses[0], grad))
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn loss_terms(pred: &[f64], target: &Trimap, s: usize) -> Result<(f64, LabelCounts)> {
    if target.width() != s || target.height() != s {
        return Err(Error::DimensionMismatch(format!(
            "target {}x{} vs prediction {s}x{s}",
            target.width(),
            target.height()
        )));
    }
    let mut loss = 0.0;
    for (&p, &l) in pred.iter().zip(target.labels()) {
        let p = p.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
        match l {
            Label::Positive => loss -= p.ln(),
            Label::Negative => loss -= (1.0 - p).ln(),
            Label::DontCare => {}
        }
    }
    Ok((loss, target.counts()))
}

/// d loss / d logit: `p - y` on labelled cells, zero on don't-care cells and
/// where the clamp is active.
fn logit_gradient(pred: &[f64], target: &Trimap) -> Vec<f64> {
    pred.iter()
        .zip(target.labels())
        .map(|(&p, &l)| {
            let y = match l {
                Label::Positive => 1.0,
                Label::Negative => 0.0,
                Label::DontCare => return 0.0,
            };
            if !(LOSS_EPSILON..=1.0 - LOSS_EPSILON).contains(&p) {
                0.0
            } else {
                p - y
            }
        })
        .collect()
}

/// Sum over labelled cells of `-[y ln p + (1 - y) ln(1 - p)]`, with `p`
/// clamped to `[1e-7, 1 - 1e-7]`; don't-care cells are ignored.
pub fn masked_loss(pred: &ProbMap, target: &Trimap) -> Result<(f64, LabelCounts)> {
    if pred.width() != pred.height() {
        return Err(Error::DimensionMismatch("prediction must be square".into()));
    }
    loss_terms(pred.data(), target, pred.width())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Parameters whose `±h` probe crossed a ReLU or max-pool kink; central
    /// differences say nothing there and they are not compared.
    pub kinked: usize,
    pub failures: usize,
    pub worst_relative_error: f64,
}

/// Compares the analytic gradient with central differences of step `h` on
/// every parameter. A parameter fails when the difference exceeds `abs_floor`
/// and the relative error is at least `rel_tol`.
pub fn gradient_check(net: &SegNet, image: &RasterU8, target: &Trimap, h: f64, rel_tol: f64, abs_floor: f64) -> Result<GradCheckReport> {
    let (_, analytic) = net.backward(image, target)?;
    let base = net.activation_pattern(&net.trace(image)?);
    let mut probe = net.clone();
    let mut report = GradCheckReport::default();
    let eval = |probe: &SegNet| -> Result<(f64, bool)> {
        let t = probe.trace(image)?;
        let pred: Vec<f64> = t.logits.iter().map(|&z| sigmoid(z)).collect();
        let (loss, _) = loss_terms(&pred, target, probe.s)?;
        Ok((loss, probe.activation_pattern(&t) == base))
    };
    for i in 0..net.param_count() {
        let orig = net.params[i];
        probe.params[i] = orig + h;
        let (up, same_up) = eval(&probe)?;
        probe.params[i] = orig - h;
        let (down, same_down) = eval(&probe)?;
        probe.params[i] = orig;
        if !(same_up && same_down) {
            report.kinked += 1;
            continue;
        }
        report.checked += 1;
        let numeric = (up - down) / (2.0 * h);
        let diff = (numeric - analytic[i]).abs();
        if diff > abs_floor {
            let rel = diff / numeric.abs().max(analytic[i].abs());
            report.worst_relative_error = report.worst_relative_error.max(rel);
            if rel >= rel_tol {
                report.failures += 1;
            }
        }
    }
    Ok(report)
}

/// Forward pass thresholded strictly above `threshold`.
pub fn infer_mask(net: &SegNet, image: &RasterU8, threshold: f64) -> Result<BinaryMask> {
    Ok(net.forward(image)?.binarize(threshold))
}
