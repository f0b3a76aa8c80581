// SPDX-License-Identifier: Apache-2.0

//! Beam-decoding networks.
//!
//! Two architectures share one layout: an input embedding of width `2F`, a
//! rectified hidden layer of width `T`, and a linear output layer.
//!
//! * RFF input: `r = [cos(2 pi B z); sin(2 pi B z)]` with a trainable
//!   frequency matrix `B` (`F x d`) drawn from `N(0, sigma^2)`.
//! * Dense input (MLP baseline): a rectified fully connected layer `d -> 2F`,
//!   which gives both networks nearly the same parameter count.
//!
//! The classification head turns `N_b` logits into beam probabilities and is
//! trained with cross-entropy in bits. The regression head reads `2 N_a`
//! outputs as the real and imaginary parts of a precoder, normalizes it, and
//! is trained to maximize its normalized correlation with the downlink
//! channel. Gradients are derived by hand for this fixed family.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{seed, Error, Result, C64};

/// Lower clamp on the true-class probability inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputKind {
    Rff,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Fully connected layer; `weights` is `n_out x n_in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    fn init<R: Rng>(n_in: usize, n_out: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let mut draw = || (2.0 * rng.random::<f64>() - 1.0) * bound;
        let weights = (0..n_in * n_out).map(|_| draw()).collect();
        let biases = (0..n_out).map(|_| draw()).collect();
        Self { n_in, n_out, weights, biases, activation }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.n_in).zip(&self.biases).map(|(row, b)| {
            b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
        }));
    }
}

/// Random Fourier feature embedding; `freq` is `n_freq x dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RffLayer {
    pub n_freq: usize,
    pub dim: usize,
    pub freq: Vec<f64>,
    pub sigma: f64,
}

impl RffLayer {
    pub fn new(n_freq: usize, dim: usize, freq: Vec<f64>, sigma: f64) -> Result<Self> {
        if freq.len() != n_freq * dim {
            return Err(Error::DimensionMismatch { expected: n_freq * dim, got: freq.len() });
        }
        Ok(Self { n_freq, dim, freq, sigma })
    }

    fn phases(&self, z: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.freq.chunks_exact(self.dim).map(|row| 2.0 * PI * row.iter().zip(z).map(|(b, x)| b * x).sum::<f64>()));
    }

    /// `[cos(2 pi B z); sin(2 pi B z)]`.
    pub fn forward(&self, z: &[f64]) -> Vec<f64> {
        let mut theta = Vec::new();
        self.phases(z, &mut theta);
        theta.iter().map(|t| t.cos()).chain(theta.iter().map(|t| t.sin())).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputLayer {
    Rff(RffLayer),
    Dense(DenseLayer),
}

/// Fixed affine normalization `(z - shift) / scale` applied before the
/// input layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InputScaling {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaling {
    pub fn identity(dim: usize) -> Self {
        Self { shift: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Per-dimension standardization fitted on `inputs`.
    pub fn fit(inputs: &[Vec<f64>]) -> Self {
        let dim = inputs.first().map_or(0, Vec::len);
        let n = inputs.len().max(1) as f64;
        let shift: Vec<f64> = (0..dim).map(|k| inputs.iter().map(|z| z[k]).sum::<f64>() / n).collect();
        let scale = (0..dim)
            .map(|k| {
                let var = inputs.iter().map(|z| (z[k] - shift[k]).powi(2)).sum::<f64>() / n;
                if var > 0.0 { var.sqrt() } else { 1.0 }
            })
            .collect();
        Self { shift, scale }
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.shift).zip(&self.scale).map(|((x, s), c)| (x - s) / c).collect()
    }
}

/// Layer sizes of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkDims {
    /// Pseudo-location dimension `d`.
    pub input_dim: usize,
    /// Number of Fourier frequencies `F`; the input embedding has width `2F`.
    pub n_freq: usize,
    /// Hidden width `T`.
    pub hidden: usize,
    /// `N_b` beams for classification, `N_a` antennas for regression.
    pub n_out: usize,
}

impl NetworkDims {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_freq == 0 || self.hidden == 0 || self.n_out == 0 {
            return Err(Error::InvalidConfig("network dimensions must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input: InputLayer,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
    pub head: HeadKind,
    pub scaling: InputScaling,
}

/// Build a network with seeded initial parameters.
pub fn init_network(kind: InputKind, head: HeadKind, dims: NetworkDims, sigma: f64, seed: u64) -> Result<Network> {
    dims.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig("sigma must be positive".into()));
    }
    let mut rng = seed::rng(seed);
    let width = 2 * dims.n_freq;
    let input = match kind {
        InputKind::Rff => {
            let normal = Normal::new(0.0, sigma).map_err(|_| Error::InvalidConfig("sigma".into()))?;
            let freq = (0..dims.n_freq * dims.input_dim).map(|_| normal.sample(&mut rng)).collect();
            InputLayer::Rff(RffLayer { n_freq: dims.n_freq, dim: dims.input_dim, freq, sigma })
        }
        InputKind::Dense => InputLayer::Dense(DenseLayer::init(dims.input_dim, width, Activation::Relu, &mut rng)),
    };
    let hidden = DenseLayer::init(width, dims.hidden, Activation::Relu, &mut rng);
    let n_out = match head {
        HeadKind::Classification => dims.n_out,
        HeadKind::Regression => 2 * dims.n_out,
    };
    let output = DenseLayer::init(dims.hidden, n_out, Activation::Identity, &mut rng);
    Ok(Network { input, hidden, output, head, scaling: InputScaling::identity(dims.input_dim) })
}

/// Training target of one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Index of the best codebook beam.
    Beam(usize),
    /// Downlink channel at the central subcarrier.
    Channel(Vec<C64>),
}

/// Network output.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Probabilities(Vec<f64>),
    Precoder(Vec<C64>),
}

/// Gradients in the order of [`Network::param_blocks`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub blocks: Vec<Vec<f64>>,
}

struct Cache {
    x: Vec<f64>,
    pre_input: Vec<f64>,
    r: Vec<f64>,
    pre_hidden: Vec<f64>,
    h: Vec<f64>,
    out: Vec<f64>,
}

fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits[index] - lse
}

/// Split `2 N_a` reals into a complex vector.
fn as_complex(out: &[f64]) -> Vec<C64> {
    let n = out.len() / 2;
    (0..n).map(|k| C64::new(out[k], out[n + k])).collect()
}

impl Network {
    pub fn input_kind(&self) -> InputKind {
        match self.input {
            InputLayer::Rff(_) => InputKind::Rff,
            InputLayer::Dense(_) => InputKind::Dense,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.scaling.shift.len()
    }

    pub fn dims(&self) -> NetworkDims {
        let n_freq = self.hidden.n_in / 2;
        let n_out = match self.head {
            HeadKind::Classification => self.output.n_out,
            HeadKind::Regression => self.output.n_out / 2,
        };
        NetworkDims { input_dim: self.input_dim(), n_freq, hidden: self.hidden.n_out, n_out }
    }

    pub fn with_scaling(mut self, scaling: InputScaling) -> Self {
        self.scaling = scaling;
        self
    }

    /// Trainable parameter blocks: input weights (or `B`), input biases
    /// (dense input only), hidden weights, hidden biases, output weights,
    /// output biases.
    pub fn param_blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = Vec::with_capacity(6);
        match &self.input {
            InputLayer::Rff(l) => blocks.push(&l.freq),
            InputLayer::Dense(l) => {
                blocks.push(&l.weights);
                blocks.push(&l.biases);
            }
        }
        blocks.extend([&self.hidden.weights[..], &self.hidden.biases, &self.output.weights, &self.output.biases]);
        blocks
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks: Vec<&mut [f64]> = Vec::with_capacity(6);
        match &mut self.input {
            InputLayer::Rff(l) => blocks.push(&mut l.freq),
            InputLayer::Dense(l) => {
                blocks.push(&mut l.weights);
                blocks.push(&mut l.biases);
            }
        }
        blocks.push(&mut self.hidden.weights);
        blocks.push(&mut self.hidden.biases);
        blocks.push(&mut self.output.weights);
        blocks.push(&mut self.output.biases);
        blocks
    }

    pub fn parameter_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.param_blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    fn pass(&self, z: &[f64]) -> Cache {
        let x = self.scaling.apply(z);
        let mut pre_input = Vec::new();
        let r = match &self.input {
            InputLayer::Rff(l) => {
                l.phases(&x, &mut pre_input);
                pre_input.iter().map(|t| t.cos()).chain(pre_input.iter().map(|t| t.sin())).collect()
            }
            InputLayer::Dense(l) => {
                l.affine(&x, &mut pre_input);
                relu(&pre_input)
            }
        };
        let mut pre_hidden = Vec::new();
        self.hidden.affine(&r, &mut pre_hidden);
        let h = relu(&pre_hidden);
        let mut out = Vec::new();
        self.output.affine(&h, &mut out);
        Cache { x, pre_input, r, pre_hidden, h, out }
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: z.len() });
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(())
    }

    /// Beam probabilities or unit-norm precoder, depending on the head.
    pub fn forward(&self, z: &[f64]) -> Result<Output> {
        self.check_input(z)?;
        let out = self.pass(z).out;
        match self.head {
            HeadKind::Classification => Ok(Output::Probabilities(softmax(&out))),
            HeadKind::Regression => {
                let w = as_complex(&out);
                let n = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if !(n > 0.0 && n.is_finite()) {
                    return Err(Error::ZeroNorm("regression output"));
                }
                Ok(Output::Precoder(w.into_iter().map(|x| x / n).collect()))
            }
        }
    }

    /// Logits of the classification head (raw outputs for regression).
    pub fn raw_output(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        Ok(self.pass(z).out)
    }

    /// Loss of one sample and its gradient with respect to the raw outputs.
    fn output_loss(&self, out: &[f64], target: &Target) -> Result<(f64, Vec<f64>)> {
        match (self.head, target) {
            (HeadKind::Classification, Target::Beam(t)) => {
                if *t >= out.len() {
                    return Err(Error::IndexOutOfRange { index: *t, len: out.len() });
                }
                let log_p = log_softmax_at(out, *t);
                if log_p < PROB_FLOOR.ln() {
                    // clamped: the loss is locally constant
                    return Ok((-PROB_FLOOR.ln() / LN_2, vec![0.0; out.len()]));
                }
                let mut grad = softmax(out);
                grad[*t] -= 1.0;
                grad.iter_mut().for_each(|g| *g /= LN_2);
                Ok((-log_p / LN_2, grad))
            }
            (HeadKind::Regression, Target::Channel(u)) => {
                let n_a = out.len() / 2;
                if u.len() != n_a {
                    return Err(Error::DimensionMismatch { expected: n_a, got: u.len() });
                }
                let g_energy: f64 = u.iter().map(|x| x.norm_sqr()).sum();
                if !(g_energy > 0.0) {
                    return Err(Error::ZeroNorm("downlink channel"));
                }
                let a = as_complex(out);
                let n2: f64 = a.iter().map(|x| x.norm_sqr()).sum();
                if !(n2 > 0.0) {
                    return Err(Error::ZeroNorm("regression output"));
                }
                let c = a.iter().zip(u).fold(C64::new(0.0, 0.0), |s, (ak, uk)| s + ak.conj() * uk);
                let c2 = c.norm_sqr();
                let eta = c2 / (n2 * g_energy);
                // d(-eta)/d(re a_k), d(-eta)/d(im a_k), by the quotient rule
                let mut grad = vec![0.0; out.len()];
                for k in 0..n_a {
                    let t = c.conj() * u[k];
                    let d_re = (2.0 * t.re * n2 - c2 * 2.0 * a[k].re) / (n2 * n2 * g_energy);
                    let d_im = (2.0 * t.im * n2 - c2 * 2.0 * a[k].im) / (n2 * n2 * g_energy);
                    grad[k] = -d_re;
                    grad[n_a + k] = -d_im;
                }
                Ok((-eta, grad))
            }
            _ => Err(Error::InvalidConfig("target kind does not match the network head".into())),
        }
    }

    /// Mean loss over a batch.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Target]) -> Result<f64> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), got: targets.len() });
        }
        let mut total = 0.0;
        for (z, t) in inputs.iter().zip(targets) {
            self.check_input(z)?;
            total += self.output_loss(&self.pass(z).out, t)?.0;
        }
        Ok(total / inputs.len() as f64)
    }

    /// Mean batch loss and its exact gradient with respect to every
    /// parameter block.
    pub fn backward(&self, inputs: &[Vec<f64>], targets: &[Target]) -> Result<(f64, Gradients)> {
        let idx: Vec<usize> = (0..inputs.len()).collect();
        self.backward_indexed(inputs, targets, &idx)
    }

    fn backward_indexed(&self, inputs: &[Vec<f64>], targets: &[Target], batch: &[usize]) -> Result<(f64, Gradients)> {
        if batch.is_empty() || inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), got: targets.len() });
        }
        let mut blocks: Vec<Vec<f64>> = self.param_blocks().iter().map(|b| vec![0.0; b.len()]).collect();
        let dense_input = matches!(self.input, InputLayer::Dense(_));
        let off = if dense_input { 2 } else { 1 };
        let mut total = 0.0;
        let mut d_hidden = vec![0.0; self.hidden.n_out];
        let mut d_r = vec![0.0; self.hidden.n_in];
        for &i in batch {
            let z = &inputs[i];
            if z.len() != self.input_dim() {
                return Err(Error::DimensionMismatch { expected: self.input_dim(), got: z.len() });
            }
            let cache = self.pass(z);
            let (loss, d_out) = self.output_loss(&cache.out, &targets[i])?;
            total += loss;

            // output layer
            let nh = self.output.n_in;
            for (o, g) in d_out.iter().enumerate() {
                let row = &mut blocks[off + 2][o * nh..(o + 1) * nh];
                row.iter_mut().zip(&cache.h).for_each(|(w, h)| *w += g * h);
                blocks[off + 3][o] += g;
            }
            d_hidden.iter_mut().for_each(|v| *v = 0.0);
            for (o, g) in d_out.iter().enumerate() {
                let row = &self.output.weights[o * nh..(o + 1) * nh];
                d_hidden.iter_mut().zip(row).for_each(|(d, w)| *d += g * w);
            }
            d_hidden.iter_mut().zip(&cache.pre_hidden).for_each(|(d, a)| {
                if *a <= 0.0 {
                    *d = 0.0
                }
            });

            // hidden layer
            let nr = self.hidden.n_in;
            d_r.iter_mut().for_each(|v| *v = 0.0);
            for (o, g) in d_hidden.iter().enumerate() {
                if *g == 0.0 {
                    continue;
                }
                let row = &mut blocks[off][o * nr..(o + 1) * nr];
                row.iter_mut().zip(&cache.r).for_each(|(w, r)| *w += g * r);
                blocks[off + 1][o] += g;
                let wrow = &self.hidden.weights[o * nr..(o + 1) * nr];
                d_r.iter_mut().zip(wrow).for_each(|(d, w)| *d += g * w);
            }

            // input layer
            match &self.input {
                InputLayer::Rff(l) => {
                    let f = l.n_freq;
                    for k in 0..f {
                        let theta = cache.pre_input[k];
                        let d_theta = -d_r[k] * theta.sin() + d_r[f + k] * theta.cos();
                        let row = &mut blocks[0][k * l.dim..(k + 1) * l.dim];
                        row.iter_mut().zip(&cache.x).for_each(|(b, x)| *b += d_theta * 2.0 * PI * x);
                    }
                }
                InputLayer::Dense(l) => {
                    for o in 0..l.n_out {
                        if cache.pre_input[o] <= 0.0 {
                            continue;
                        }
                        let g = d_r[o];
                        let row = &mut blocks[0][o * l.n_in..(o + 1) * l.n_in];
                        row.iter_mut().zip(&cache.x).for_each(|(w, x)| *w += g * x);
                        blocks[1][o] += g;
                    }
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for b in &mut blocks {
            b.iter_mut().for_each(|g| *g *= scale);
        }
        if !total.is_finite() || !blocks.iter().all(|b| b.iter().all(|g| g.is_finite())) {
            return Err(Error::NonFinite("gradients"));
        }
        Ok((total * scale, Gradients { blocks }))
    }
}

/// `-log2(max(p[true_index], 1e-12))`.
pub fn cross_entropy(probabilities: &[f64], true_index: usize) -> Result<f64> {
    let p = *probabilities.get(true_index).ok_or(Error::IndexOutOfRange { index: true_index, len: probabilities.len() })?;
    Ok(-p.max(PROB_FLOOR).log2())
}

/// Negated normalized correlation `-|w^H g|^2 / ||g||^2`.
pub fn correlation_loss(precoder: &[C64], channel: &[C64]) -> Result<f64> {
    Ok(-crate::codebook::precoder_correlation(precoder, channel)?)
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 32, epochs: 100, learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("invalid Adam hyperparameters".into()));
        }
        Ok(())
    }
}

/// Adaptive moment estimation over parameter blocks.
#[derive(Debug, Clone)]
pub struct Adam {
    config: TrainConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    pub fn new(net: &Network, config: TrainConfig) -> Self {
        let zeros: Vec<Vec<f64>> = net.param_blocks().iter().map(|b| vec![0.0; b.len()]).collect();
        Self { config, m: zeros.clone(), v: zeros, step: 0 }
    }

    pub fn update(&mut self, net: &mut Network, grads: &Gradients) {
        self.step += 1;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(self.step);
        let bias2 = 1.0 - c.beta2.powi(self.step);
        for (((p, g), m), v) in net.param_blocks_mut().into_iter().zip(&grads.blocks).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
                *pi -= c.learning_rate * (*mi / bias1) / ((*vi / bias2).sqrt() + c.epsilon);
            }
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub network: Network,
    /// Mean training loss of each epoch.
    pub history: Vec<f64>,
}

/// Mini-batch training with a seeded shuffle every epoch.
///
/// Stops with [`Error::Diverged`] as soon as an epoch loss is not finite;
/// the error carries the history up to that point.
pub fn train(mut net: Network, inputs: &[Vec<f64>], targets: &[Target], config: &TrainConfig) -> Result<Trained> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: inputs.len(), got: targets.len() });
    }
    let mut rng = seed::rng(config.seed);
    let mut adam = Adam::new(&net, *config);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, grads) = match net.backward_indexed(inputs, targets, batch) {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => {
                    history.push(f64::NAN);
                    return Err(Error::Diverged { epoch, history });
                }
                Err(e) => return Err(e),
            };
            total += loss * batch.len() as f64;
            adam.update(&mut net, &grads);
        }
        let mean = total / inputs.len() as f64;
        history.push(mean);
        if !mean.is_finite() || !net.is_finite() {
            return Err(Error::Diverged { epoch, history });
        }
    }
    Ok(Trained { network: net, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: InputKind, head: HeadKind) -> Network {
        init_network(kind, head, NetworkDims { input_dim: 2, n_freq: 3, hidden: 4, n_out: 5 }, 1.0, 7).unwrap()
    }

    #[test]
    fn rff_hand_cases() {
        let l = RffLayer::new(1, 1, vec![0.5], 1.0).unwrap();
        let r = l.forward(&[1.0]);
        assert!((r[0] + 1.0).abs() < 1e-15 && r[1].abs() < 1e-15);
        let l = RffLayer::new(3, 2, vec![0.1, -2.0, 3.0, 0.4, 1.0, 1.0], 1.0).unwrap();
        let r = l.forward(&[0.0, 0.0]);
        assert_eq!(r, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(l.forward(&[0.37, -1.9]).iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn forward_contracts() {
        let net = tiny(InputKind::Rff, HeadKind::Classification);
        match net.forward(&[0.3, -0.2]).unwrap() {
            Output::Probabilities(p) => {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(p.iter().all(|&x| x > 0.0));
            }
            _ => panic!(),
        }
        let net = tiny(InputKind::Dense, HeadKind::Regression);
        match net.forward(&[0.3, -0.2]).unwrap() {
            Output::Precoder(w) => {
                assert_eq!(w.len(), 5);
                assert!((w.iter().map(|x| x.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-9);
            }
            _ => panic!(),
        }
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn zero_output_layer_gives_uniform_probabilities() {
        let mut net = tiny(InputKind::Rff, HeadKind::Classification);
        net.output.weights.iter_mut().for_each(|w| *w = 0.0);
        net.output.biases.iter_mut().for_each(|w| *w = 0.0);
        let Output::Probabilities(p) = net.forward(&[1.0, 2.0]).unwrap() else { panic!() };
        assert!(p.iter().all(|x| (x - 0.2).abs() < 1e-15));
    }

    #[test]
    fn non_finite_parameters_rejected() {
        let mut net = tiny(InputKind::Rff, HeadKind::Classification);
        net.hidden.biases[0] = f64::NAN;
        assert_eq!(net.forward(&[0.0, 0.0]).unwrap_err(), Error::NonFinite("network parameters"));
    }

    #[test]
    fn cross_entropy_values() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1).unwrap(), 0.0);
        let uniform = vec![1.0 / 256.0; 256];
        assert!((cross_entropy(&uniform, 3).unwrap() - 8.0).abs() < 1e-12);
        assert!((cross_entropy(&[0.25, 0.75], 0).unwrap() - 2.0).abs() < 1e-15);
        assert!((cross_entropy(&[0.0, 1.0], 0).unwrap() - 1e12f64.log2()).abs() < 1e-9);
        assert!(cross_entropy(&[1.0], 1).is_err());
    }

    #[test]
    fn correlation_loss_values() {
        let w = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert!((correlation_loss(&w, &[C64::new(0.0, 2.0), C64::new(0.0, 0.0)]).unwrap() + 1.0).abs() < 1e-12);
        assert!(correlation_loss(&w, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap().abs() < 1e-15);
        let s = 3.0 / 2f64.sqrt();
        assert!((correlation_loss(&w, &[C64::new(0.0, s), C64::new(0.0, s)]).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn default_dims_and_parameter_parity() {
        let dims = NetworkDims { input_dim: 2, n_freq: 200, hidden: 64, n_out: 256 };
        let rff = init_network(InputKind::Rff, HeadKind::Classification, dims, 1.0, 1).unwrap();
        let mlp = init_network(InputKind::Dense, HeadKind::Classification, dims, 1.0, 1).unwrap();
        let (a, b) = (rff.parameter_count() as f64, mlp.parameter_count() as f64);
        // 200*2 + (400*64 + 64) + (64*256 + 256) vs 400*2 + 400 + the same
        assert_eq!(a, 42_704.0);
        assert_eq!(b, 43_504.0);
        assert!((b - a).abs() / a < 0.02);
    }

    #[test]
    fn frequency_variance_matches_sigma() {
        let sigma = 2.5;
        let dims = NetworkDims { input_dim: 2, n_freq: 10_000, hidden: 1, n_out: 1 };
        let net = init_network(InputKind::Rff, HeadKind::Classification, dims, sigma, 3).unwrap();
        let InputLayer::Rff(l) = &net.input else { panic!() };
        let n = l.freq.len() as f64;
        let mean = l.freq.iter().sum::<f64>() / n;
        let var = l.freq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.1);
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(tiny(InputKind::Rff, HeadKind::Regression), tiny(InputKind::Rff, HeadKind::Regression));
    }

    #[test]
    fn mismatched_target_kind_rejected() {
        let net = tiny(InputKind::Rff, HeadKind::Classification);
        let z = vec![vec![0.1, 0.2]];
        assert!(net.backward(&z, &[Target::Channel(vec![C64::new(1.0, 0.0); 5])]).is_err());
        assert!(net.backward(&z, &[Target::Beam(5)]).is_err());
    }
}
