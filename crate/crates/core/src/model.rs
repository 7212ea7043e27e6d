//! Linear discriminator `σ(Wx + b)` trained by mini-batch SGD on soft labels.
//!
//! # Checkpoint format
//!
//! Little-endian binary:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `CCEM` |
//! | 4 | format version, `u32` (currently 1) |
//! | 8 | K, `u64` |
//! | 8 | N, `u64` |
//! | 8·K·N | weights, `f64`, row-major (row k holds class k) |
//! | 8·K | bias, `f64` |

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{rng, stream};
use crate::simplex::{softmax_into, LabelMatrix};

const MAGIC: &[u8; 4] = b"CCEM";
const VERSION: u32 = 1;

/// Per-point classification loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLoss {
    /// `−ln σᵀy`.
    Collision,
    /// `−Σ_k y_k ln σ_k`.
    Shannon,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    weights: Array2<f64>,
    bias: Array1<f64>,
}

/// Gradient with the shapes of a [`LinearModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

fn check_finite<'a>(values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for (index, &value) in values.enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
    }
    Ok(())
}

impl LinearModel {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weight rows but {} bias entries",
                weights.nrows(),
                bias.len()
            )));
        }
        if weights.nrows() == 0 {
            return Err(Error::Empty);
        }
        check_finite(weights.iter())?;
        check_finite(bias.iter())?;
        Ok(LinearModel {
            weights: weights.as_standard_layout().into_owned(),
            bias,
        })
    }

    pub fn zeros(k: usize, n: usize) -> Self {
        LinearModel {
            weights: Array2::zeros((k, n)),
            bias: Array1::zeros(k),
        }
    }

    /// Weights uniform on `[−1/√N, 1/√N]`, zero bias.
    pub fn init(k: usize, n: usize, seed: u64) -> Self {
        let mut r = rng(seed, stream::MODEL_INIT);
        let bound = 1.0 / (n.max(1) as f64).sqrt();
        let weights = Array2::from_shape_fn((k, n), |_| r.gen_range(-bound..=bound));
        LinearModel {
            weights,
            bias: Array1::zeros(k),
        }
    }

    pub fn k(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    fn check_features(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.n() {
            return Err(Error::ShapeMismatch(format!(
                "features have {} columns, model expects {}",
                x.ncols(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `X Wᵀ + b`, one row per point.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_features(x)?;
        let z = x.dot(&self.weights.t()) + &self.bias;
        // Degenerate shapes can come back column-major.
        Ok(if z.is_standard_layout() {
            z
        } else {
            z.as_standard_layout().into_owned()
        })
    }

    /// Row-wise softmax of [`logits`](Self::logits).
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<LabelMatrix> {
        let mut z = self.logits(x)?;
        let k = self.k();
        let mut out = vec![0.0; k];
        for mut row in z.rows_mut() {
            let slice = row.as_slice_mut().expect("standard layout");
            softmax_into(slice, &mut out)?;
            slice.copy_from_slice(&out);
        }
        Ok(LabelMatrix::from_array_unchecked(z))
    }

    /// Hard predictions `argmax_k σ_k` per row.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self.forward(x)?.argmax_rows())
    }

    pub fn apply(&mut self, grad: &ParamGrad, learning_rate: f64) {
        self.weights.scaled_add(-learning_rate, &grad.weights);
        self.bias.scaled_add(-learning_rate, &grad.bias);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * (self.weights.len() + self.bias.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.k() as u64).to_le_bytes());
        out.extend_from_slice(&(self.n() as u64).to_le_bytes());
        for v in self.weights.iter().chain(self.bias.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 24 || &bytes[..4] != MAGIC {
            return Err(bad("missing CCEM header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let k = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let n = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
        let count = k
            .checked_mul(n)
            .and_then(|kn| kn.checked_add(k))
            .ok_or_else(|| bad("shape overflows"))?;
        if bytes.len() != 24 + 8 * count {
            return Err(Error::Checkpoint(format!(
                "expected {} bytes for K={k}, N={n}, found {}",
                24 + 8 * count,
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let weights =
            Array2::from_shape_vec((k, n), values[..k * n].to_vec()).expect("checked length");
        let bias = Array1::from(values[k * n..].to_vec());
        LinearModel::new(weights, bias)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        LinearModel::from_bytes(&fs::read(path)?)
    }
}

/// Gradient of the per-point loss with respect to the logits, written to
/// `out`.
///
/// For [`ClassLoss::Collision`] this is `σ_j (1 − y_j / σᵀy)`, evaluated as
/// `σ_j Σ_k σ_k (y_k − y_j) / σᵀy` so that a uniform `y` yields exactly zero.
pub fn logit_grad(loss: ClassLoss, sigma: &[f64], y: &[f64], out: &mut [f64]) {
    match loss {
        ClassLoss::Collision => {
            let st: f64 = sigma.iter().zip(y).fold(0.0, |acc, (a, b)| acc + a * b);
            for (j, o) in out.iter_mut().enumerate() {
                let yj = y[j];
                let num = sigma
                    .iter()
                    .zip(y)
                    .fold(0.0, |acc, (&s, &yk)| acc + s * (yk - yj));
                *o = sigma[j] * num / st;
            }
        }
        ClassLoss::Shannon => {
            for ((o, &s), &yk) in out.iter_mut().zip(sigma).zip(y) {
                *o = s - yk;
            }
        }
    }
}

fn point_loss(loss: ClassLoss, sigma: &[f64], y: &[f64]) -> f64 {
    match loss {
        ClassLoss::Collision => crate::measures::collision_cross_entropy(y, sigma),
        ClassLoss::Shannon => crate::measures::shannon_cross_entropy(y, sigma),
    }
}

fn check_labels(x: ArrayView2<'_, f64>, y: &LabelMatrix, model: &LinearModel) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows but {} label rows",
            x.nrows(),
            y.nrows()
        )));
    }
    if y.ncols() != model.k() {
        return Err(Error::ShapeMismatch(format!(
            "labels have {} classes, model {}",
            y.ncols(),
            model.k()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(())
}

/// `mean_i loss(y_i, σ_i) + (wd/2)‖W‖²`.
pub fn batch_loss(
    model: &LinearModel,
    x: ArrayView2<'_, f64>,
    y: &LabelMatrix,
    loss: ClassLoss,
    weight_decay: f64,
) -> Result<f64> {
    check_labels(x, y, model)?;
    let sigma = model.forward(x)?;
    let data: f64 = sigma
        .rows()
        .zip(y.rows())
        .fold(0.0, |acc, (s, t)| acc + point_loss(loss, s, t));
    let decay = 0.5 * weight_decay * model.weights.iter().fold(0.0, |acc, w| acc + w * w);
    Ok(data / x.nrows() as f64 + decay)
}

/// Gradient of [`batch_loss`] with respect to weights and bias.
pub fn grad_params(
    model: &LinearModel,
    x: ArrayView2<'_, f64>,
    y: &LabelMatrix,
    loss: ClassLoss,
    weight_decay: f64,
) -> Result<ParamGrad> {
    check_labels(x, y, model)?;
    let sigma = model.forward(x)?;
    let (m, k) = (x.nrows(), model.k());
    let mut g = Array2::zeros((m, k));
    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
        logit_grad(
            loss,
            sigma.row(i),
            y.row(i),
            row.as_slice_mut().expect("standard layout"),
        );
    }
    let inv_m = 1.0 / m as f64;
    let mut weights = g.t().dot(&x) * inv_m;
    if weight_decay != 0.0 {
        weights.scaled_add(weight_decay, &model.weights);
    }
    let bias = g.sum_axis(Axis(0)) * inv_m;
    Ok(ParamGrad { weights, bias })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: ClassLoss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            weight_decay: 0.01,
            batch_size: 250,
            epochs: 10,
            seed: 0,
            loss: ClassLoss::Collision,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParams(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::InvalidParams(format!(
                "weight decay must be finite and >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParams("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Full-data [`batch_loss`] after each epoch.
    pub epoch_loss: Vec<f64>,
}

/// One SGD update on a batch; returns the batch loss before the update.
pub fn sgd_step(
    model: &mut LinearModel,
    x: ArrayView2<'_, f64>,
    y: &LabelMatrix,
    cfg: &TrainConfig,
) -> Result<f64> {
    let before = batch_loss(model, x, y, cfg.loss, cfg.weight_decay)?;
    let grad = grad_params(model, x, y, cfg.loss, cfg.weight_decay)?;
    model.apply(&grad, cfg.learning_rate);
    Ok(before)
}

/// Batch index lists for one epoch, shuffled with the run seed.
pub fn epoch_batches(m: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..m).collect();
    let mut r = rng(
        seed.wrapping_add(epoch as u64)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
        stream::SHUFFLE,
    );
    order.shuffle(&mut r);
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// Rows of a label matrix selected by `idx`.
pub fn select_labels(y: &LabelMatrix, idx: &[usize]) -> LabelMatrix {
    LabelMatrix::from_array_unchecked(y.as_array().select(Axis(0), idx))
}

/// Trains on fixed soft labels `y` for `cfg.epochs` epochs of
/// `⌈M / batch_size⌉` steps each.
pub fn sgd_train(
    model: &LinearModel,
    x: ArrayView2<'_, f64>,
    y: &LabelMatrix,
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainLog)> {
    cfg.validate()?;
    check_labels(x, y, model)?;
    model.check_features(x)?;
    let mut model = model.clone();
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        for idx in epoch_batches(x.nrows(), cfg.batch_size, cfg.seed, epoch) {
            let xb = x.select(Axis(0), &idx);
            let yb = select_labels(y, &idx);
            let grad = grad_params(&model, xb.view(), &yb, cfg.loss, cfg.weight_decay)?;
            model.apply(&grad, cfg.learning_rate);
        }
        log.epoch_loss
            .push(batch_loss(&model, x, y, cfg.loss, cfg.weight_decay)?);
    }
    Ok((model, log))
}
