//! Fully connected tanh network mapping `(r, sigma, t_go)` to the command `u`.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, NormStats};
use crate::math::{cholesky_solve, sqrt, tanh};
use crate::{Error, Result};

pub const DEFAULT_LAYERS: [usize; 4] = [3, 20, 20, 1];

/// Weights are stored row-major per layer (`out x in`), followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub norm: NormStats,
}

/// Forward evaluation with a flag for inputs outside the training extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub u: f64,
    pub extrapolated: bool,
}

impl MlpModel {
    /// Default architecture with weights uniform in `+- sqrt(6 / (fan_in + fan_out))`.
    pub fn init(seed: u64, norm: NormStats) -> Self {
        Self::with_sizes(&DEFAULT_LAYERS, seed, norm).expect("default layer sizes are valid")
    }

    pub fn with_sizes(sizes: &[usize], seed: u64, norm: NormStats) -> Result<Self> {
        if sizes.len() < 2 || sizes[0] != 3 || *sizes.last().unwrap() != 1 || sizes.contains(&0) {
            return Err(Error::InvalidParameter("layer sizes must run from 3 inputs to 1 output"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let limit = sqrt(6.0 / (w[0] + w[1]) as f64);
            weights.push((0..w[0] * w[1]).map(|_| limit * (2.0 * unit(&mut rng) - 1.0)).collect());
            biases.push(vec![0.0; w[1]]);
        }
        Ok(Self { sizes: sizes.to_vec(), weights, biases, norm })
    }

    /// All weights and hidden biases zero; the output is `output_bias` (normalized) everywhere.
    pub fn zeroed(norm: NormStats, output_bias: f64) -> Self {
        let mut m = Self::init(0, norm);
        m.weights.iter_mut().flatten().for_each(|w| *w = 0.0);
        m.biases.iter_mut().flatten().for_each(|b| *b = 0.0);
        *m.biases.last_mut().unwrap().last_mut().unwrap() = output_bias;
        m
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sizes.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(Error::InvalidParameter("layer count mismatch"));
        }
        for (l, w) in self.sizes.windows(2).enumerate() {
            if self.weights[l].len() != w[0] * w[1] || self.biases[l].len() != w[1] {
                return Err(Error::InvalidParameter("layer dimension mismatch"));
            }
        }
        if self.sizes[0] != 3 || self.sizes[n - 1] != 1 {
            return Err(Error::InvalidParameter("network must map 3 inputs to 1 output"));
        }
        if self.weights.iter().chain(&self.biases).flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter"));
        }
        Ok(())
    }

    /// Network output for an already normalized input.
    pub fn forward_normalized(&self, x: [f64; 3]) -> f64 {
        let width = self.sizes.iter().copied().max().unwrap_or(1);
        let mut a = vec![0.0; width];
        let mut b = vec![0.0; width];
        a[..3].copy_from_slice(&x);
        let last = self.weights.len() - 1;
        for (l, (w, bias)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut z = bias[o];
                for i in 0..n_in {
                    z += row[i] * a[i];
                }
                b[o] = if l == last { z } else { tanh(z) };
            }
            core::mem::swap(&mut a, &mut b);
        }
        a[0]
    }

    /// Command in physical normalized units for `(r, sigma, t_go)`.
    pub fn forward(&self, input: [f64; 3]) -> f64 {
        self.norm.u.denormalize(self.forward_normalized(self.norm.normalize_input(input)))
    }

    pub fn evaluate(&self, input: [f64; 3]) -> Evaluation {
        Evaluation { u: self.forward(input), extrapolated: !self.norm.inputs_contain(input) }
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w);
            p.extend_from_slice(b);
        }
        p
    }

    fn set_flat_params(&mut self, p: &[f64]) {
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&p[k..k + nw]);
            b.copy_from_slice(&p[k + nw..k + nw + nb]);
            k += nw + nb;
        }
    }

    /// Squared error `(y - target)^2` at a normalized sample; gradients are added into `grad`.
    pub fn accumulate_gradient(&self, x: [f64; 3], target: f64, grad: &mut [f64], ws: &mut Workspace) -> f64 {
        let layers = self.weights.len();
        ws.acts[0][..3].copy_from_slice(&x);
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let (a, out) = (&prev[l], &mut next[0]);
            let w = &self.weights[l];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut z = self.biases[l][o];
                for i in 0..n_in {
                    z += row[i] * a[i];
                }
                out[o] = if l + 1 == layers { z } else { tanh(z) };
            }
        }
        let err = ws.acts[layers][0] - target;
        ws.delta[layers][0] = 2.0 * err;
        let mut offset = grad.len();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= n_in * n_out + n_out;
            let (gw, gb) = grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let (dprev, dnext) = ws.delta.split_at_mut(l + 1);
            let d = &dnext[0];
            let a = &ws.acts[l];
            for o in 0..n_out {
                gb[o] += d[o];
                for i in 0..n_in {
                    gw[o * n_in + i] += d[o] * a[i];
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                for i in 0..n_in {
                    let mut s = 0.0;
                    for o in 0..n_out {
                        s += w[o * n_in + i] * d[o];
                    }
                    dprev[l][i] = s * (1.0 - a[i] * a[i]);
                }
            }
        }
        err * err
    }

    /// Fills the workspace activations up to the last hidden layer.
    fn hidden_features(&self, x: [f64; 3], ws: &mut Workspace) {
        let layers = self.weights.len();
        ws.acts[0][..3].copy_from_slice(&x);
        for l in 0..layers - 1 {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let w = &self.weights[l];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut z = self.biases[l][o];
                for i in 0..n_in {
                    z += row[i] * prev[l][i];
                }
                next[0][o] = tanh(z);
            }
        }
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            acts: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Mean squared error in normalized units over `indices` of the dataset.
    pub fn mse(&self, ds: &Dataset, indices: &[usize]) -> f64 {
        if indices.is_empty() {
            return 0.0;
        }
        let mut acc = 0.0;
        for &i in indices {
            let s = &ds.samples[i];
            let e = self.forward_normalized(ds.norm.normalize_input(s.input())) - ds.norm.u.normalize(s.u);
            acc += e * e;
        }
        acc / indices.len() as f64
    }
}

/// Scratch buffers for backpropagation.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Compares backpropagated gradients of the squared error at a normalized
/// sample with extrapolated central differences. Returns `max |g_bp - g_fd| / max(|g_bp|, |g_fd|, 1e-4)`.
pub fn gradient_check(m: &MlpModel, x: [f64; 3], target: f64) -> f64 {
    let n = m.parameter_count();
    let mut grad = vec![0.0; n];
    let mut ws = m.workspace();
    m.accumulate_gradient(x, target, &mut grad, &mut ws);
    let base = m.flat_params();
    let mut probe = m.clone();
    let loss = |p: &MlpModel| {
        let e = p.forward_normalized(x) - target;
        e * e
    };
    let mut worst: f64 = 0.0;
    let mut params = base.clone();
    let mut central = |k: usize, h: f64| {
        params[k] = base[k] + h;
        probe.set_flat_params(&params);
        let up = loss(&probe);
        params[k] = base[k] - h;
        probe.set_flat_params(&params);
        let down = loss(&probe);
        params[k] = base[k];
        (up - down) / (2.0 * h)
    };
    for k in 0..n {
        // Richardson extrapolation of two central differences
        // trained weights make the loss noisy at the 1e-14 level, so the step stays coarse;
        // extrapolation keeps the truncation error near h^4
        let h = 1e-3 * base[k].abs().max(1.0);
        let fd = (4.0 * central(k, 0.5 * h) - central(k, h)) / 3.0;
        worst = worst.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-4));
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShuffleRule {
    /// Fresh permutation of the training split every epoch.
    EveryEpoch,
    /// Fixed order, the one drawn at the split.
    Once,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative step-size decay applied after every epoch.
    pub lr_decay: f64,
    pub min_learning_rate: f64,
    /// The step size is also halved after this many epochs without validation improvement.
    pub plateau_patience: usize,
    pub validation_fraction: f64,
    /// Early stop after this many epochs without validation improvement.
    pub patience: usize,
    pub shuffle: ShuffleRule,
    /// Finish with a least-squares fit of the output layer on the trained hidden
    /// features, kept only if it lowers the validation loss.
    pub refit_output: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            epochs: 40,
            batch_size: 64,
            learning_rate: 3e-3,
            lr_decay: 0.95,
            min_learning_rate: 1e-7,
            plateau_patience: 10,
            validation_fraction: 0.1,
            patience: 50,
            shuffle: ShuffleRule::EveryEpoch,
            refit_output: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return Err(Error::InvalidParameter("validation fraction must lie in (0, 0.5]"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidParameter("learning rate must be positive, decay in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean of the mini-batch losses seen during each epoch.
    pub train_mse: Vec<f64>,
    pub validation_mse: Vec<f64>,
    pub best_epoch: usize,
    /// Training-split MSE of the returned (best-validation) parameters.
    pub final_train_mse: f64,
    /// RMSE on the validation split, normalized output units.
    pub held_out_rmse: f64,
    pub train_samples: usize,
    pub validation_samples: usize,
    /// Filled in by callers that have a clock; not serialized, so reports stay reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

// keeps the split independent of the shuffling stream
const SPLIT_STREAM: u64 = 0x5eed_0001;

/// Deterministic split of `0..n` into (train, validation).
pub fn split_indices(n: usize, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_STREAM);
    shuffle(&mut idx, &mut rng);
    let n_val = ((n as f64 * validation_fraction) as usize).clamp(1, n.saturating_sub(1).max(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

fn shuffle(v: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
}

/// Mini-batch Adam on the normalized squared error, keeping the parameters
/// with the best validation loss.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if ds.samples.len() < 10 {
        return Err(Error::InvalidParameter("dataset too small to split"));
    }
    let mut model = MlpModel::init(cfg.seed, ds.norm);
    let (mut train_idx, val_idx) = split_indices(ds.samples.len(), cfg.validation_fraction, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    // inputs and targets normalized once
    let xs: Vec<[f64; 3]> = ds.samples.iter().map(|s| ds.norm.normalize_input(s.input())).collect();
    let ys: Vec<f64> = ds.samples.iter().map(|s| ds.norm.u.normalize(s.u)).collect();

    let n = model.parameter_count();
    let mut params = model.flat_params();
    let (mut m1, mut m2) = (vec![0.0; n], vec![0.0; n]);
    let mut grad = vec![0.0; n];
    let mut ws = model.workspace();
    let (beta1, beta2, adam_eps) = (0.9, 0.999, 1e-8);
    let (mut pow1, mut pow2) = (1.0, 1.0);

    let val_mse = |m: &MlpModel| {
        let mut acc = 0.0;
        for &i in &val_idx {
            let e = m.forward_normalized(xs[i]) - ys[i];
            acc += e * e;
        }
        acc / val_idx.len() as f64
    };

    let mut report = TrainReport {
        train_mse: Vec::new(),
        validation_mse: Vec::new(),
        best_epoch: 0,
        final_train_mse: 0.0,
        held_out_rmse: 0.0,
        train_samples: train_idx.len(),
        validation_samples: val_idx.len(),
        wall_time_s: 0.0,
    };
    let mut best = (val_mse(&model), params.clone());
    let mut stall = 0;
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        if cfg.shuffle == ShuffleRule::EveryEpoch {
            shuffle(&mut train_idx, &mut rng);
        }
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for &i in batch {
                loss += model.accumulate_gradient(xs[i], ys[i], &mut grad, &mut ws);
            }
            let scale = 1.0 / batch.len() as f64;
            epoch_loss += loss;
            pow1 *= beta1;
            pow2 *= beta2;
            let step = lr * sqrt(1.0 - pow2) / (1.0 - pow1);
            for k in 0..n {
                let g = grad[k] * scale;
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * g;
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * g * g;
                params[k] -= step * m1[k] / (sqrt(m2[k]) + adam_eps);
            }
            model.set_flat_params(&params);
        }
        let train_loss = epoch_loss / train_idx.len() as f64;
        let v = val_mse(&model);
        if !train_loss.is_finite() || !v.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.train_mse.push(train_loss);
        report.validation_mse.push(v);
        if v < best.0 {
            best = (v, params.clone());
            report.best_epoch = epoch;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
            if cfg.plateau_patience > 0 && stall % cfg.plateau_patience == 0 {
                lr *= 0.5;
            }
        }
        lr = (lr * cfg.lr_decay).max(cfg.min_learning_rate);
    }
    model.set_flat_params(&best.1);
    let mut best_val = best.0;
    if cfg.refit_output {
        let mut refit = model.clone();
        if refit_output_layer(&mut refit, &xs, &ys, &train_idx) {
            let v = val_mse(&refit);
            if v < best_val {
                model = refit;
                best_val = v;
            }
        }
    }
    report.held_out_rmse = sqrt(best_val);
    let mut train_sorted = train_idx;
    train_sorted.sort_unstable();
    report.final_train_mse = model.mse(ds, &train_sorted);
    Ok((model, report))
}

/// Replaces the output layer by the ridge-stabilized least-squares fit on the
/// last hidden layer's activations. Returns false when the system is singular.
fn refit_output_layer(model: &mut MlpModel, xs: &[[f64; 3]], ys: &[f64], idx: &[usize]) -> bool {
    let layers = model.weights.len();
    let width = model.sizes[layers - 1];
    let n = width + 1;
    let mut ata = vec![0.0; n * n];
    let mut atb = vec![0.0; n];
    let mut ws = model.workspace();
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    let mut feat = vec![0.0; n];
    for &i in &sorted {
        model.hidden_features(xs[i], &mut ws);
        feat[..width].copy_from_slice(&ws.acts[layers - 1]);
        feat[width] = 1.0;
        for a in 0..n {
            atb[a] += feat[a] * ys[i];
            for b in 0..=a {
                ata[a * n + b] += feat[a] * feat[b];
            }
        }
    }
    let trace: f64 = (0..n).map(|a| ata[a * n + a]).sum();
    for a in 0..n {
        ata[a * n + a] += 1e-12 * trace / n as f64;
        for b in 0..a {
            ata[b * n + a] = ata[a * n + b];
        }
    }
    if cholesky_solve(&mut ata, &mut atb, n).is_none() || atb.iter().any(|v| !v.is_finite()) {
        return false;
    }
    model.weights[layers - 1].copy_from_slice(&atb[..width]);
    model.biases[layers - 1][0] = atb[width];
    true
}
