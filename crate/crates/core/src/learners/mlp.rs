//! Fully connected ReLU regressor trained by SGD with momentum.
//!
//! Inputs and targets are standardized with training-set statistics before
//! they reach the network; predictions are mapped back to target units.
//! Weight decay follows the coupled convention (`grad += wd * param`,
//! biases included), momentum buffers follow `v = μ v + grad`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::logistic::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Cap on epochs.
    pub max_iter: usize,
    /// Stop when the training loss has not improved by `min_improvement`
    /// for this many epochs.
    pub patience: usize,
    pub min_improvement: f64,
    /// Data sets smaller than this are trained full-batch.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 256, 128],
            learning_rate: 1e-4,
            weight_decay: 1e-3,
            momentum: 0.9,
            max_iter: 20_000,
            patience: 500,
            min_improvement: 1e-9,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// out × in.
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpRegressor {
    pub layers: Vec<Dense>,
    pub in_mean: Vec<f64>,
    pub in_scale: Vec<f64>,
    pub out_mean: f64,
    pub out_scale: f64,
}

struct Scratch {
    /// Post-activation outputs per layer, `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl MlpRegressor {
    /// Uniform(±1/√fan_in) initialization for weights and biases.
    pub fn init(sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = || rng.random_range(-bound..bound);
                let wdata = (0..fan_in * fan_out).map(|_| draw()).collect();
                let b = (0..fan_out).map(|_| draw()).collect();
                Dense {
                    w: Matrix::new(fan_out, fan_in, wdata).expect("sized"),
                    b,
                }
            })
            .collect();
        let m = sizes[0];
        Self {
            layers,
            in_mean: vec![0.0; m],
            in_scale: vec![1.0; m],
            out_mean: 0.0,
            out_scale: 1.0,
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.cols()];
        s.extend(self.layers.iter().map(|l| l.w.rows()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.rows() * (l.w.cols() + 1)).sum()
    }

    /// Layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(l.w.as_slice());
            p.extend_from_slice(&l.b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a network with {}",
                p.len(),
                self.n_params()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let (r, c) = (l.w.rows(), l.w.cols());
            l.w = Matrix::new(r, c, p[off..off + r * c].to_vec())?;
            off += r * c;
            l.b.copy_from_slice(&p[off..off + r]);
            off += r;
        }
        Ok(())
    }

    fn scratch(&self) -> Scratch {
        let sizes = self.layer_sizes();
        Scratch {
            acts: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            deltas: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn standardize(&self, s: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (s[j] - self.in_mean[j]) / self.in_scale[j];
        }
    }

    /// Network output in standardized target units; `sc.acts[0]` holds the input.
    fn forward(&self, sc: &mut Scratch) -> f64 {
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let (prev, next) = sc.acts.split_at_mut(li + 1);
            let input = &prev[li];
            let out = &mut next[0];
            for (j, o) in out.iter_mut().enumerate() {
                let z = l.b[j] + dot(l.w.row(j), input);
                *o = if li < last { z.max(0.0) } else { z };
            }
        }
        sc.acts[last + 1][0]
    }

    /// Accumulates d(0.5·err²)/dθ into `grad` for the current forward pass.
    fn backward(&self, sc: &mut Scratch, err: f64, grad: &mut [f64]) {
        let nl = self.layers.len();
        sc.deltas[nl][0] = err;
        let mut offsets = Vec::with_capacity(nl);
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.w.rows() * (l.w.cols() + 1);
        }
        for li in (0..nl).rev() {
            let l = &self.layers[li];
            let (rows, cols) = (l.w.rows(), l.w.cols());
            let base = offsets[li];
            {
                let delta = &sc.deltas[li + 1];
                let input = &sc.acts[li];
                let (gw, gb) = grad[base..base + rows * (cols + 1)].split_at_mut(rows * cols);
                for (j, &dj) in delta.iter().enumerate().take(rows) {
                    if dj == 0.0 {
                        continue;
                    }
                    for (g, &x) in gw[j * cols..(j + 1) * cols].iter_mut().zip(input) {
                        *g += dj * x;
                    }
                    gb[j] += dj;
                }
            }
            if li > 0 {
                let (lower, upper) = sc.deltas.split_at_mut(li + 1);
                let delta = &upper[0];
                let prev = &mut lower[li];
                prev.iter_mut().for_each(|v| *v = 0.0);
                for (j, &dj) in delta.iter().enumerate().take(rows) {
                    if dj == 0.0 {
                        continue;
                    }
                    for (p, &w) in prev.iter_mut().zip(l.w.row(j)) {
                        *p += dj * w;
                    }
                }
                // ReLU derivative on the hidden pre-activation
                for (p, &a) in prev.iter_mut().zip(&sc.acts[li]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
    }

    /// Standardized-space MSE and gradient over `rows` of the standardized
    /// inputs `z` against standardized targets `t`.
    fn batch_loss_grad(&self, z: &Matrix, t: &[f64], rows: &[usize], sc: &mut Scratch, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|v| *v = 0.0);
        let mut sse = 0.0;
        for &i in rows {
            sc.acts[0].copy_from_slice(z.row(i));
            let err = self.forward(sc) - t[i];
            sse += err * err;
            self.backward(sc, err, grad);
        }
        let n = rows.len() as f64;
        // d/dθ mean(err²) = 2/n Σ err·dout/dθ
        grad.iter_mut().for_each(|v| *v *= 2.0 / n);
        sse / n
    }

    /// Training-unit MSE of the network on `(s, g)` and its gradient with
    /// respect to [`params`](Self::params).
    pub fn mse_and_grad(&self, s: &Matrix, g: &[f64]) -> Result<(f64, Vec<f64>)> {
        let z = self.standardize_all(s)?;
        let t: Vec<f64> = g.iter().map(|v| (v - self.out_mean) / self.out_scale).collect();
        let mut sc = self.scratch();
        let mut grad = vec![0.0; self.n_params()];
        let rows: Vec<usize> = (0..s.rows()).collect();
        let loss = self.batch_loss_grad(&z, &t, &rows, &mut sc, &mut grad);
        let k = self.out_scale * self.out_scale;
        grad.iter_mut().for_each(|v| *v *= k);
        Ok((loss * k, grad))
    }

    fn standardize_all(&self, s: &Matrix) -> Result<Matrix> {
        if s.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "regressor expects {} features, got {}",
                self.input_dim(),
                s.cols()
            )));
        }
        let mut z = Matrix::zeros(s.rows(), s.cols());
        for i in 0..s.rows() {
            self.standardize(s.row(i), z.row_mut(i));
        }
        Ok(z)
    }

    pub fn predict(&self, s: &[f64]) -> Result<f64> {
        if s.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "regressor expects {} features, got {}",
                self.input_dim(),
                s.len()
            )));
        }
        let mut sc = self.scratch();
        self.standardize(s, &mut sc.acts[0]);
        Ok(self.out_mean + self.out_scale * self.forward(&mut sc))
    }

    pub fn mse(&self, s: &Matrix, g: &[f64]) -> Result<f64> {
        let mut sse = 0.0;
        for (r, y) in s.iter_rows().zip(g) {
            let e = self.predict(r)? - y;
            sse += e * e;
        }
        Ok(sse / g.len().max(1) as f64)
    }
}

fn mean_and_scale(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let sd = (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

pub fn fit_mlp_regressor(s: &Matrix, g: &[f64], cfg: &MlpConfig) -> Result<MlpRegressor> {
    let (p, m) = (s.rows(), s.cols());
    if p == 0 || m == 0 {
        return Err(Error::Empty("regression data"));
    }
    if g.len() != p {
        return Err(Error::DimensionMismatch(format!("{p} feature rows but {} targets", g.len())));
    }
    if !s.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data"));
    }
    if cfg.hidden.contains(&0) || cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("layer and batch sizes must be positive".into()));
    }

    let mut sizes = vec![m];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut net = MlpRegressor::init(&sizes, cfg.seed);
    for j in 0..m {
        let (mu, sd) = mean_and_scale((0..p).map(|i| s.get(i, j)));
        net.in_mean[j] = mu;
        net.in_scale[j] = sd;
    }
    let (mu, sd) = mean_and_scale(g.iter().copied());
    net.out_mean = mu;
    net.out_scale = sd;

    let z = net.standardize_all(s)?;
    let t: Vec<f64> = g.iter().map(|v| (v - mu) / sd).collect();

    let np = net.n_params();
    let mut theta = net.params();
    let mut velocity = vec![0.0; np];
    let mut grad = vec![0.0; np];
    let mut sc = net.scratch();
    let mut order: Vec<usize> = (0..p).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let full_batch = p < cfg.batch_size;

    let mut best = f64::INFINITY;
    let mut last_improvement = 0;
    for epoch in 0..cfg.max_iter {
        if !full_batch {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(if full_batch { p } else { cfg.batch_size }) {
            let loss = net.batch_loss_grad(&z, &t, chunk, &mut sc, &mut grad);
            epoch_loss += loss * chunk.len() as f64;
            for i in 0..np {
                let gi = grad[i] + cfg.weight_decay * theta[i];
                velocity[i] = cfg.momentum * velocity[i] + gi;
                theta[i] -= cfg.learning_rate * velocity[i];
            }
            net.set_params(&theta)?;
        }
        epoch_loss /= p as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFinite("MLP training loss"));
        }
        if epoch_loss < best - cfg.min_improvement {
            best = epoch_loss;
            last_improvement = epoch;
        } else if epoch - last_improvement >= cfg.patience {
            break;
        }
    }
    Ok(net)
}
