//! Projected gradient descent over the label matrix.
//!
//! Each iteration moves every row against the gradient of its own share of
//! the loss, `M · ∂L/∂y_i`, and projects back onto the simplex:
//! `y_i ← P_Δ(y_i − η M ∂L/∂y_i)`. Scaling by `M` makes the step size
//! independent of the batch size.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::loss::{check_shapes, loss, Fairness, LossVariant};
use crate::report::{SolverReport, SolverStatus};
use crate::simplex::{project_simplex_into, LabelMatrix};

/// Number of consecutive iterations above the best objective so far that
/// marks a run as diverged.
pub const DIVERGENCE_PATIENCE: usize = 10;

/// Floor applied to `ȳ_k` inside the fairness gradient during optimization.
const YBAR_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct PgdConfig {
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the largest entry change of an iteration is at most this.
    pub rel_tol: f64,
    pub variant: LossVariant,
    pub fairness: Fairness,
    pub parallel: bool,
}

impl PgdConfig {
    pub fn new(variant: LossVariant, fairness: Fairness, step_size: f64) -> Self {
        PgdConfig {
            step_size,
            max_iters: 2000,
            rel_tol: 1e-8,
            variant,
            fairness,
            parallel: false,
        }
    }
}

/// Per-class fairness gradient `M · ∂(λ·KL)/∂y_i^k`, shared by all rows.
fn fairness_direction(variant: LossVariant, fairness: &Fairness, ybar: &[f64]) -> Vec<f64> {
    let lambda = fairness.lambda;
    ybar.iter()
        .zip(fairness.prior.iter())
        .map(|(&b, &u)| {
            let b = b.max(YBAR_FLOOR);
            match variant {
                LossVariant::Cce | LossVariant::ShannonKl => {
                    if lambda == 0.0 {
                        0.0
                    } else {
                        lambda * ((b / u).ln() + 1.0)
                    }
                }
                LossVariant::CcePlus => {
                    if u == 0.0 {
                        0.0
                    } else {
                        -lambda * u / b
                    }
                }
            }
        })
        .collect()
}

/// Writes `M · ∂L/∂y_i` for row `i` into `out`.
#[inline]
fn row_direction(variant: LossVariant, y: &[f64], sigma: &[f64], fair: &[f64], out: &mut [f64]) {
    match variant {
        LossVariant::Cce | LossVariant::CcePlus => {
            let s = y.iter().zip(sigma).fold(0.0, |acc, (a, b)| acc + a * b);
            for ((o, &sk), &fk) in out.iter_mut().zip(sigma).zip(fair) {
                *o = -sk / s + fk;
            }
        }
        LossVariant::ShannonKl => {
            for ((o, &sk), &fk) in out.iter_mut().zip(sigma).zip(fair) {
                *o = -sk.ln() + fk;
            }
        }
    }
}

/// Gradient of the selected batch loss with respect to every `y_i^k`.
///
/// `L_CCE+` is undefined where `ȳ_k = 0 < u_k`; such points are rejected.
pub fn grad_y(
    y: &LabelMatrix,
    predictions: &LabelMatrix,
    variant: LossVariant,
    fairness: &Fairness,
) -> Result<Array2<f64>> {
    check_shapes(y, predictions, fairness)?;
    let ybar = y.mean_row();
    if variant == LossVariant::CcePlus && fairness.lambda > 0.0 {
        if let Some(class) = (0..ybar.len()).find(|&k| ybar[k] == 0.0 && fairness.prior[k] > 0.0) {
            return Err(Error::BoundaryPoint { class });
        }
    }
    let fair = fairness_direction(variant, fairness, &ybar);
    let (m, k) = (y.nrows(), y.ncols());
    let mut out = Array2::zeros((m, k));
    let inv_m = 1.0 / m as f64;
    for (i, row) in out
        .as_slice_mut()
        .expect("standard layout")
        .chunks_exact_mut(k)
        .enumerate()
    {
        row_direction(variant, y.row(i), predictions.row(i), &fair, row);
        row.iter_mut().for_each(|g| *g *= inv_m);
    }
    Ok(out)
}

/// Runs projected gradient descent from `warm_start`.
///
/// Stops when the largest entry change of an iteration is at most `rel_tol`
/// ([`SolverStatus::Converged`]), after `max_iters` iterations, or when the
/// objective has stayed above its running minimum for
/// [`DIVERGENCE_PATIENCE`] consecutive iterations ([`SolverStatus::Diverged`];
/// the last iterate is returned).
pub fn pgd_optimize(
    predictions: &LabelMatrix,
    warm_start: &LabelMatrix,
    cfg: &PgdConfig,
) -> Result<(LabelMatrix, SolverReport)> {
    check_shapes(warm_start, predictions, &cfg.fairness)?;
    if !(cfg.step_size > 0.0) || !cfg.step_size.is_finite() {
        return Err(Error::InvalidParams(format!(
            "step size must be positive, got {}",
            cfg.step_size
        )));
    }
    let start = Instant::now();
    let (m, k) = (warm_start.nrows(), warm_start.ncols());
    let eta = cfg.step_size;

    let mut y = warm_start.clone();
    let mut next = Array2::zeros((m, k));
    let mut history = vec![loss(cfg.variant, &y, predictions, &cfg.fairness)?];
    let mut status = SolverStatus::MaxIterations;
    let mut last_step = f64::INFINITY;
    let mut increases = 0;
    let mut best = history[0];
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let ybar = y.mean_row();
        let fair = fairness_direction(cfg.variant, &cfg.fairness, &ybar);
        let flat = next.as_slice_mut().expect("standard layout");
        let step_row = |i: usize, row: &mut [f64], bufs: &mut (Vec<f64>, Vec<f64>)| -> f64 {
            let (grad, scratch) = bufs;
            let yi = y.row(i);
            row_direction(cfg.variant, yi, predictions.row(i), &fair, grad);
            grad.iter_mut()
                .zip(yi)
                .for_each(|(g, &v)| *g = v - eta * *g);
            project_simplex_into(grad, row, scratch).expect("finite gradient step");
            row.iter()
                .zip(yi)
                .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs()))
        };
        let init = || (vec![0.0; k], Vec::with_capacity(k));
        last_step = if cfg.parallel {
            flat.par_chunks_mut(k)
                .enumerate()
                .map_init(init, |bufs, (i, row)| step_row(i, row, bufs))
                .reduce(|| 0.0, f64::max)
        } else {
            let mut bufs = init();
            flat.chunks_exact_mut(k)
                .enumerate()
                .fold(0.0, |acc: f64, (i, row)| {
                    acc.max(step_row(i, row, &mut bufs))
                })
        };
        iterations += 1;
        let candidate = LabelMatrix::from_array_unchecked(next);
        next = std::mem::replace(&mut y, candidate).into_array();
        let obj = loss(cfg.variant, &y, predictions, &cfg.fairness)?;
        history.push(obj);

        if last_step <= cfg.rel_tol {
            status = SolverStatus::Converged;
            break;
        }
        if obj.is_nan() || obj > best + 1e-12 * best.abs().max(1.0) {
            increases += 1;
            if increases >= DIVERGENCE_PATIENCE {
                status = SolverStatus::Diverged;
                break;
            }
        } else {
            increases = 0;
            best = best.min(obj);
        }
    }

    let report = SolverReport {
        iterations,
        wall_seconds: start.elapsed().as_secs_f64(),
        objective: *history.last().expect("non-empty history"),
        status,
        history,
        mean_inner_iterations: 0.0,
        last_step,
    };
    Ok((y, report))
}
