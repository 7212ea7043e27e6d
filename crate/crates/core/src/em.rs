//! EM optimization of pseudo-labels under `L_CCE+`.
//!
//! The fairness part `−λ Σ_k u_k ln ȳ_k` is bounded with Jensen's inequality
//! through normalized supports `S^k ∈ Δ^M`. The E-step makes the bound tight,
//! `S_i^k = y_i^k / Σ_j y_j^k`; the M-step minimizes the bound separately for
//! every point:
//!
//! ```text
//! min_{y_i ∈ Δ^K}  −ln σ_iᵀy_i − λM Σ_k u_k S_i^k ln y_i^k
//! ```
//!
//! (the mean over points contributes the factor M), which is the problem
//! solved by [`crate::mstep`].

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::loss::{check_shapes, loss_cce_plus, mean_collision_ce, Fairness};
use crate::measures::shannon_entropy;
use crate::mstep::{solve_scaled_into, MStepOptions};
use crate::report::{SolverReport, SolverStatus};
use crate::simplex::{LabelMatrix, SupportMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub fairness: Fairness,
    pub max_iters: usize,
    /// Stop once the largest entry change of a sweep is at most this.
    pub rel_tol: f64,
    pub mstep: MStepOptions,
    /// Solve M-steps on the rayon pool. Results do not depend on this flag.
    pub parallel: bool,
}

impl EmConfig {
    pub fn new(k: usize) -> Self {
        EmConfig {
            fairness: Fairness::uniform(k, 100.0),
            max_iters: 100,
            rel_tol: 1e-6,
            mstep: MStepOptions::default(),
            parallel: false,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.fairness.lambda = lambda;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.fairness.lambda > 0.0) {
            return Err(Error::InvalidParams(format!(
                "EM needs lambda > 0, got {}",
                self.fairness.lambda
            )));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "rel_tol must be non-negative, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Column sums `Σ_j y_j^k`, accumulated in row order.
fn column_sums(y: &LabelMatrix) -> Vec<f64> {
    let mut sums = vec![0.0; y.ncols()];
    for r in y.rows() {
        sums.iter_mut().zip(r).for_each(|(s, &v)| *s += v);
    }
    sums
}

/// `S_i^k = y_i^k / Σ_j y_j^k`; a column with zero total is filled with
/// `1/M` and flagged dead.
pub fn e_step(y: &LabelMatrix) -> SupportMatrix {
    let (m, k) = (y.nrows(), y.ncols());
    let sums = column_sums(y);
    let dead: Vec<bool> = sums.iter().map(|&s| s == 0.0).collect();
    let mut data = Array2::zeros((m, k));
    for (i, r) in y.rows().enumerate() {
        for c in 0..k {
            data[[i, c]] = if dead[c] {
                1.0 / m as f64
            } else {
                r[c] / sums[c]
            };
        }
    }
    SupportMatrix::from_parts_unchecked(data, dead)
}

/// Value of the Jensen upper bound together with the constant `λ H(u)` that
/// separates it from `L_CCE+` when `S` is the E-step of `Y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JensenBound {
    pub value: f64,
    pub dropped_constant: f64,
}

impl JensenBound {
    /// `value − dropped_constant`, directly comparable with `L_CCE+`.
    pub fn aligned(&self) -> f64 {
        self.value - self.dropped_constant
    }
}

/// `mean_i H₂(y_i, σ_i) − λ Σ_k u_k Σ_i S_i^k ln(y_i^k / (S_i^k M))`, with
/// `0 · ln(·/0) = 0`.
pub fn jensen_bound(
    y: &LabelMatrix,
    support: &SupportMatrix,
    predictions: &LabelMatrix,
    fairness: &Fairness,
) -> Result<JensenBound> {
    check_shapes(y, predictions, fairness)?;
    if support.nrows() != y.nrows() || support.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "support is {}x{}, labels {}x{}",
            support.nrows(),
            support.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let m = y.nrows() as f64;
    let mut fair = 0.0;
    for (i, r) in y.rows().enumerate() {
        let s = support.row(i);
        for k in 0..y.ncols() {
            if s[k] > 0.0 {
                fair += fairness.prior[k] * s[k] * (r[k] / (s[k] * m)).ln();
            }
        }
    }
    let lambda = fairness.lambda;
    Ok(JensenBound {
        value: mean_collision_ce(y, predictions) - lambda * fair,
        dropped_constant: lambda * shannon_entropy(&fairness.prior),
    })
}

/// One E-step followed by M-steps for every row, written to `out`.
/// Returns the summed Newton iteration count.
fn sweep(
    y: &LabelMatrix,
    predictions: &LabelMatrix,
    cfg: &EmConfig,
    out: &mut Array2<f64>,
) -> Result<usize> {
    let k = y.ncols();
    let sums = column_sums(y);
    let lambda = cfg.fairness.lambda;
    let prior = cfg.fairness.prior.as_slice();
    // λ M u_k S_i^k = λ M u_k y_i^k / Σ_j y_j^k; a dead column contributes λ u_k.
    let m = y.nrows() as f64;
    let scale: Vec<f64> = (0..k)
        .map(|c| {
            if sums[c] == 0.0 {
                lambda * prior[c]
            } else {
                lambda * m * prior[c] / sums[c]
            }
        })
        .collect();
    let dead: Vec<bool> = sums.iter().map(|&s| s == 0.0).collect();

    let solve_row = |i: usize, row_out: &mut [f64], w: &mut Vec<f64>| -> Result<usize> {
        let yi = y.row(i);
        w.clear();
        w.extend((0..k).map(|c| if dead[c] { scale[c] } else { scale[c] * yi[c] }));
        let (_, stats) = solve_scaled_into(predictions.row(i), w, &cfg.mstep, row_out)?;
        Ok(stats.iters)
    };

    let flat = out.as_slice_mut().expect("standard layout");
    if cfg.parallel {
        flat.par_chunks_mut(k)
            .enumerate()
            .map_init(|| Vec::with_capacity(k), |w, (i, row)| solve_row(i, row, w))
            .try_reduce(|| 0, |a, b| Ok(a + b))
    } else {
        let mut w = Vec::with_capacity(k);
        let mut total = 0;
        for (i, row) in flat.chunks_exact_mut(k).enumerate() {
            total += solve_row(i, row, &mut w)?;
        }
        Ok(total)
    }
}

/// Runs one EM iteration (E-step and all M-steps) from `y`.
pub fn em_sweep(y: &LabelMatrix, predictions: &LabelMatrix, cfg: &EmConfig) -> Result<LabelMatrix> {
    cfg.validate()?;
    check_shapes(y, predictions, &cfg.fairness)?;
    let mut out = Array2::zeros((y.nrows(), y.ncols()));
    sweep(y, predictions, cfg, &mut out)?;
    Ok(LabelMatrix::from_array_unchecked(out))
}

/// Alternates E- and M-steps from `warm_start` until the largest entry change
/// of a sweep is at most `rel_tol`, or `max_iters` sweeps have run.
///
/// The report's objective is `L_CCE+` of the returned labels; `history` holds
/// `L_CCE+` before the first sweep and after each one.
pub fn em_optimize(
    predictions: &LabelMatrix,
    warm_start: &LabelMatrix,
    cfg: &EmConfig,
) -> Result<(LabelMatrix, SolverReport)> {
    cfg.validate()?;
    check_shapes(warm_start, predictions, &cfg.fairness)?;
    let start = Instant::now();
    let (m, k) = (warm_start.nrows(), warm_start.ncols());

    let mut y = warm_start.clone();
    let mut next = Array2::zeros((m, k));
    let mut history = vec![loss_cce_plus(&y, predictions, &cfg.fairness)?];
    let mut inner = 0usize;
    let mut status = SolverStatus::MaxIterations;
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        inner += sweep(&y, predictions, cfg, &mut next)?;
        iterations += 1;
        let candidate = LabelMatrix::from_array_unchecked(next);
        last_step = candidate.max_abs_diff(&y);
        next = std::mem::replace(&mut y, candidate).into_array();
        history.push(loss_cce_plus(&y, predictions, &cfg.fairness)?);
        if last_step <= cfg.rel_tol {
            status = SolverStatus::Converged;
            break;
        }
    }

    let report = SolverReport {
        iterations,
        wall_seconds: start.elapsed().as_secs_f64(),
        objective: *history.last().expect("non-empty history"),
        status,
        history,
        mean_inner_iterations: if iterations == 0 {
            0.0
        } else {
            inner as f64 / (iterations * m) as f64
        },
        last_step,
    };
    Ok((y, report))
}
