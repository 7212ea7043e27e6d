//! Newton versus reference minimizers on random M-step instances.

use std::time::Instant;

use serde::Serialize;

use super::oracle::{grid_search_2, projected_gradient, OracleSolution, RandomInstance};
use super::{left_endpoint, newton_solve, secular, MStepInstance, MStepOptions};
use crate::error::Result;
use crate::sampling::{rng, stream};

/// Residual target and iteration cap of the projected-gradient oracle.
pub const ORACLE_TOL: f64 = 1e-12;
pub const ORACLE_MAX_ITERS: usize = 200_000;
/// Grid spacing of the exhaustive K = 2 oracle.
pub const GRID_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckConfig {
    pub ks: Vec<usize>,
    pub instances: usize,
    pub seed: u64,
    /// Added to the first oracle coordinate before renormalizing; a nonzero
    /// value makes the check fail by construction.
    pub perturb_oracle: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            ks: vec![2, 5, 20, 200],
            instances: 1000,
            seed: 0,
            perturb_oracle: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub k: usize,
    pub instances: usize,
    /// Largest `g(y_newton) − g(y_oracle)` over instances and oracles.
    pub max_objective_gap: f64,
    /// Largest `‖y_newton − y_oracle‖∞`.
    pub max_y_error: f64,
    pub max_newton_iters: usize,
    /// Largest `|f(x)|` at the returned root.
    pub max_root_residual: f64,
    /// Instances where `f(l) ≥ 0 ≥ f(σ_max)` fails.
    pub bracket_failures: usize,
    pub max_oracle_residual: f64,
    pub grid_oracle: bool,
    pub seconds: f64,
}

impl CheckSummary {
    pub fn passes(&self, gap_tol: f64, err_tol: f64) -> bool {
        self.max_objective_gap <= gap_tol && self.max_y_error <= err_tol
    }
}

fn perturbed(mut o: OracleSolution, delta: f64, inst: &MStepInstance<'_>) -> OracleSolution {
    if delta != 0.0 {
        o.y[0] += delta.abs();
        let s: f64 = o.y.iter().sum();
        o.y.iter_mut().for_each(|v| *v /= s);
        o.objective = inst.objective(&o.y);
    }
    o
}

fn compare(
    summary: &mut CheckSummary,
    inst: &MStepInstance<'_>,
    y: &[f64],
    oracle: &OracleSolution,
) {
    let gap = inst.objective(y) - oracle.objective;
    let err = y
        .iter()
        .zip(&oracle.y)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    summary.max_objective_gap = summary.max_objective_gap.max(gap);
    summary.max_y_error = summary.max_y_error.max(err);
}

/// Runs `cfg.instances` interior instances for every K in `cfg.ks`. K = 2
/// instances are also compared with an exhaustive grid.
pub fn run_check(cfg: &CheckConfig) -> Result<Vec<CheckSummary>> {
    let opts = MStepOptions::default();
    let mut out = Vec::with_capacity(cfg.ks.len());
    for &k in &cfg.ks {
        let start = Instant::now();
        let mut r = rng(cfg.seed.wrapping_add(k as u64), stream::INSTANCES);
        let mut summary = CheckSummary {
            k,
            instances: cfg.instances,
            max_objective_gap: f64::NEG_INFINITY,
            max_y_error: 0.0,
            max_newton_iters: 0,
            max_root_residual: 0.0,
            bracket_failures: 0,
            max_oracle_residual: 0.0,
            grid_oracle: k == 2,
            seconds: 0.0,
        };
        for _ in 0..cfg.instances {
            let owned = RandomInstance::sample(k, &mut r);
            let inst = owned.view();
            let sol = newton_solve(&inst, &opts)?;
            summary.max_newton_iters = summary.max_newton_iters.max(sol.newton_iters);
            summary.max_root_residual = summary.max_root_residual.max(secular(&inst, sol.x).abs());

            let l = left_endpoint(&inst)?;
            let sigma_max = inst.sigma.iter().fold(0.0f64, |m, &s| m.max(s));
            if !(secular(&inst, l) >= 0.0 && secular(&inst, sigma_max) <= 0.0) {
                summary.bracket_failures += 1;
            }

            let oracle = projected_gradient(&inst, ORACLE_TOL, ORACLE_MAX_ITERS);
            summary.max_oracle_residual = summary.max_oracle_residual.max(oracle.residual);
            compare(
                &mut summary,
                &inst,
                &sol.y,
                &perturbed(oracle, cfg.perturb_oracle, &inst),
            );
            if k == 2 {
                let grid = grid_search_2(&inst, GRID_STEP);
                compare(
                    &mut summary,
                    &inst,
                    &sol.y,
                    &perturbed(grid, cfg.perturb_oracle, &inst),
                );
            }
        }
        summary.seconds = start.elapsed().as_secs_f64();
        out.push(summary);
    }
    Ok(out)
}
