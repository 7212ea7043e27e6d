//! Per-point M-step of the EM pseudo-label solver.
//!
//! For one data point the M-step minimizes, over `y ∈ Δ^K`,
//!
//! ```text
//! g(y) = −ln σᵀy − λ Σ_k w_k ln y_k,        w_k = u_k S_k ≥ 0
//! ```
//!
//! When every `w_k > 0` the minimizer is interior and is parameterized by a
//! scalar `x = σᵀy`:
//!
//! ```text
//! y_k(x) = λ w_k / (λ Σw + 1 − σ_k / x),    x ∈ (σ_max / (1 + λ Σw), σ_max]
//! ```
//!
//! `f(x) = Σ_k y_k(x) − 1` is positive, convex and strictly decreasing on that
//! interval, so Newton's method started at the left endpoint of [`left_endpoint`]
//! climbs monotonically to the unique root. Classes with `w_k = 0` are handled
//! by [`degenerate_solve`].

pub mod check;
pub mod oracle;

use crate::error::{Error, Result};
use crate::simplex::{argmax, dot, ProbVec};

/// One M-step problem.
#[derive(Clone, Copy, Debug)]
pub struct MStepInstance<'a> {
    /// Model prediction σ for the point.
    pub sigma: &'a [f64],
    /// `u_k S_k` for each class.
    pub support_weights: &'a [f64],
    /// Fairness weight λ.
    pub lambda: f64,
}

impl<'a> MStepInstance<'a> {
    pub fn new(sigma: &'a [f64], support_weights: &'a [f64], lambda: f64) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::Empty);
        }
        if sigma.len() != support_weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "sigma has {} classes, support weights {}",
                sigma.len(),
                support_weights.len()
            )));
        }
        ProbVec::new(sigma.to_vec())?;
        for (index, &value) in support_weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeEntry { index, value });
            }
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(MStepInstance {
            sigma,
            support_weights,
            lambda,
        })
    }

    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// `g(y)` with the convention `0 · ln 0 = 0` for classes with zero weight.
    pub fn objective(&self, y: &[f64]) -> f64 {
        let mut fairness = 0.0;
        for (&w, &yk) in self.support_weights.iter().zip(y) {
            if w > 0.0 {
                fairness -= w * yk.ln();
            }
        }
        -dot(self.sigma, y).ln() + self.lambda * fairness
    }

    fn scaled_weights(&self) -> Vec<f64> {
        self.support_weights
            .iter()
            .map(|w| self.lambda * w)
            .collect()
    }
}

/// Newton solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MStepOptions {
    /// Stop once `|f(x)| ≤ eps`.
    pub eps: f64,
    /// Iteration cap for the Newton/bisection loop.
    pub max_iters: usize,
    /// Start from `max(l, σ_min)` when `σ_min > σ_max / (1 + λ uᵀS)`.
    pub tighten_interval: bool,
}

impl Default for MStepOptions {
    fn default() -> Self {
        MStepOptions {
            eps: 1e-10,
            max_iters: 200,
            tighten_interval: false,
        }
    }
}

/// Which formula produced an [`MStepSolution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MStepBranch {
    /// All weights positive; Newton on the full interval.
    Interior,
    /// Some weights zero; closed form with the free mass on class `c`.
    ClosedForm,
    /// Some weights zero; zero-weight classes set to 0, Newton on the rest.
    Restricted,
    /// All weights zero; one-hot at `argmax σ`.
    OneHot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MStepSolution {
    pub y: ProbVec,
    /// `σᵀy` at the solution, the root of `f` on the interior branch.
    pub x: f64,
    pub newton_iters: usize,
    /// `|Σ_k y_k(x) − 1|` before the final normalization.
    pub residual: f64,
    pub branch: MStepBranch,
}

/// Statistics of one Newton solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct NewtonStats {
    pub x: f64,
    pub iters: usize,
    pub residual: f64,
}

/// `l = max_k σ_k / (1 + λuᵀS − λu_kS_k)`, the Newton starting point.
pub fn left_endpoint(inst: &MStepInstance<'_>) -> Result<f64> {
    if let Some(k) = inst.support_weights.iter().position(|&w| w == 0.0) {
        return Err(Error::ZeroWeight(k));
    }
    Ok(left_endpoint_scaled(inst.sigma, &inst.scaled_weights()))
}

fn left_endpoint_scaled(sigma: &[f64], w: &[f64]) -> f64 {
    let a = 1.0 + w.iter().sum::<f64>();
    sigma
        .iter()
        .zip(w)
        .fold(f64::NEG_INFINITY, |acc, (&s, &wk)| acc.max(s / (a - wk)))
}

/// `f(x) = Σ_k λw_k x / ((1 + λΣw) x − σ_k) − 1`, whose root on
/// `(l, σ_max]` gives the interior solution.
pub fn secular(inst: &MStepInstance<'_>, x: f64) -> f64 {
    let w = inst.scaled_weights();
    let a = 1.0 + w.iter().sum::<f64>();
    eval_f(inst.sigma, &w, a, x).0
}

/// Evaluates `f(x)` and `f'(x)` for `a = 1 + Σw`.
#[inline]
fn eval_f(sigma: &[f64], w: &[f64], a: f64, x: f64) -> (f64, f64) {
    let mut f = -1.0;
    let mut df = 0.0;
    for (&s, &wk) in sigma.iter().zip(w) {
        let d = a * x - s;
        f += wk * x / d;
        df -= wk * s / (d * d);
    }
    (f, df)
}

/// Newton's method on `f(x) = Σ_k w_k x / ((1 + Σw) x − σ_k) − 1` with
/// weights `w` already multiplied by λ, all strictly positive.
///
/// Iterates stay inside the bracket `[lo, hi]`, `f(lo) ≥ 0 ≥ f(hi)`; a step
/// that would leave it is replaced by bisection. The loop also stops when the
/// bracket has shrunk to a few ulps, since `f` cannot be resolved further in
/// double precision. The solution is written to `out`, normalized to sum 1.
/// `trace`, when given, receives every iterate `x`.
pub(crate) fn newton_core(
    sigma: &[f64],
    w: &[f64],
    opts: &MStepOptions,
    out: &mut [f64],
    mut trace: Option<&mut Vec<f64>>,
) -> Result<NewtonStats> {
    let total: f64 = w.iter().sum();
    let a = 1.0 + total;
    let sigma_max = sigma.iter().fold(0.0f64, |m, &s| m.max(s));
    if sigma_max == 0.0 {
        // No class can collide; only the fairness term remains.
        for (o, &wk) in out.iter_mut().zip(w) {
            *o = wk / total;
        }
        return Ok(NewtonStats {
            x: 0.0,
            iters: 0,
            residual: 0.0,
        });
    }

    let mut x = left_endpoint_scaled(sigma, w);
    if opts.tighten_interval {
        let sigma_min = sigma.iter().fold(f64::INFINITY, |m, &s| m.min(s));
        if sigma_min > sigma_max / a {
            x = x.max(sigma_min);
        }
    }
    let mut lo = x;
    let mut hi = sigma_max;
    let (mut fx, mut dfx) = eval_f(sigma, w, a, x);
    if let Some(t) = trace.as_deref_mut() {
        t.push(x);
    }

    let mut iters = 0;
    loop {
        if fx.abs() <= opts.eps {
            break;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if iters == opts.max_iters {
            return Err(Error::MaxIterationsExceeded {
                iterations: iters,
                residual: fx.abs(),
            });
        }
        let mut next = x - fx / dfx;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == x {
            break;
        }
        x = next;
        (fx, dfx) = eval_f(sigma, w, a, x);
        iters += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(x);
        }
    }

    let mut s = 0.0;
    for ((o, &sk), &wk) in out.iter_mut().zip(sigma).zip(w) {
        *o = wk * x / (a * x - sk);
        s += *o;
    }
    if !s.is_finite() {
        // x sits on the pole of the largest class; its label takes the rest.
        let top = argmax(sigma);
        out[top] = 0.0;
        let rest: f64 = out.iter().sum();
        out[top] = (1.0 - rest).max(0.0);
        s = out.iter().sum();
    }
    out.iter_mut().for_each(|o| *o /= s);
    Ok(NewtonStats {
        x,
        iters,
        residual: fx.abs(),
    })
}

/// Interior M-step; every support weight must be positive.
pub fn newton_solve(inst: &MStepInstance<'_>, opts: &MStepOptions) -> Result<MStepSolution> {
    newton_solve_traced(inst, opts, None)
}

/// [`newton_solve`] that also records every Newton iterate `x` into `trace`.
pub fn newton_solve_traced(
    inst: &MStepInstance<'_>,
    opts: &MStepOptions,
    trace: Option<&mut Vec<f64>>,
) -> Result<MStepSolution> {
    if let Some(k) = inst.support_weights.iter().position(|&w| w == 0.0) {
        return Err(Error::ZeroWeight(k));
    }
    let w = inst.scaled_weights();
    let mut y = vec![0.0; inst.k()];
    let stats = newton_core(inst.sigma, &w, opts, &mut y, trace)?;
    Ok(MStepSolution {
        y: ProbVec::from_vec_unchecked(y),
        x: stats.x,
        newton_iters: stats.iters,
        residual: stats.residual,
        branch: MStepBranch::Interior,
    })
}

/// M-step when some, but not all, support weights are zero.
///
/// With `K_o = {k : w_k = 0}` and `c = argmax_{k∈K_o} σ_k`, the free mass goes
/// to `c` in closed form when `σ_c` exceeds every `σ_k` outside `K_o` and the
/// resulting `y_c` is positive. Otherwise all of `K_o` is set to zero and the
/// remaining classes are solved by Newton's method.
pub fn degenerate_solve(inst: &MStepInstance<'_>, opts: &MStepOptions) -> Result<MStepSolution> {
    let mut y = vec![0.0; inst.k()];
    let (branch, stats) = degenerate_into(inst.sigma, &inst.scaled_weights(), opts, &mut y)?;
    Ok(MStepSolution {
        y: ProbVec::from_vec_unchecked(y),
        x: stats.x,
        newton_iters: stats.iters,
        residual: stats.residual,
        branch,
    })
}

fn degenerate_into(
    sigma: &[f64],
    w: &[f64],
    opts: &MStepOptions,
    out: &mut [f64],
) -> Result<(MStepBranch, NewtonStats)> {
    let zero: Vec<usize> = (0..w.len()).filter(|&k| w[k] == 0.0).collect();
    let live: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 0.0).collect();
    if live.is_empty() {
        return Err(Error::AllWeightsZero);
    }
    if zero.is_empty() {
        return Err(Error::InvalidParams(
            "no zero support weight; use newton_solve".into(),
        ));
    }

    let c = zero.iter().copied().fold(
        zero[0],
        |best, k| if sigma[k] > sigma[best] { k } else { best },
    );
    let sigma_c = sigma[c];
    let total: f64 = live.iter().map(|&k| w[k]).sum();
    let a = 1.0 + total;

    if live.iter().all(|&k| sigma_c > sigma[k]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut assigned = 0.0;
        for &k in &live {
            out[k] = w[k] / (a * (1.0 - sigma[k] / sigma_c));
            assigned += out[k];
        }
        let y_c = 1.0 - assigned;
        if y_c > 0.0 {
            out[c] = y_c;
            let x = sigma_c / a;
            return Ok((
                MStepBranch::ClosedForm,
                NewtonStats {
                    x,
                    iters: 0,
                    residual: 0.0,
                },
            ));
        }
    }

    let sigma_live: Vec<f64> = live.iter().map(|&k| sigma[k]).collect();
    let w_live: Vec<f64> = live.iter().map(|&k| w[k]).collect();
    let mut y_live = vec![0.0; live.len()];
    let stats = newton_core(&sigma_live, &w_live, opts, &mut y_live, None)?;
    out.iter_mut().for_each(|o| *o = 0.0);
    for (&k, &v) in live.iter().zip(&y_live) {
        out[k] = v;
    }
    Ok((MStepBranch::Restricted, stats))
}

/// Solves any M-step instance, dispatching on the zero pattern of the
/// support weights.
pub fn solve(inst: &MStepInstance<'_>, opts: &MStepOptions) -> Result<MStepSolution> {
    let mut y = vec![0.0; inst.k()];
    let (branch, stats) = solve_scaled_into(inst.sigma, &inst.scaled_weights(), opts, &mut y)?;
    Ok(MStepSolution {
        y: ProbVec::from_vec_unchecked(y),
        x: stats.x,
        newton_iters: stats.iters,
        residual: stats.residual,
        branch,
    })
}

/// Allocation-free dispatcher used by the EM loop; `w` already includes λ.
pub(crate) fn solve_scaled_into(
    sigma: &[f64],
    w: &[f64],
    opts: &MStepOptions,
    out: &mut [f64],
) -> Result<(MStepBranch, NewtonStats)> {
    let zeros = w.iter().filter(|&&v| v == 0.0).count();
    if zeros == 0 {
        let stats = newton_core(sigma, w, opts, out, None)?;
        Ok((MStepBranch::Interior, stats))
    } else if zeros == w.len() {
        out.iter_mut().for_each(|o| *o = 0.0);
        let top = argmax(sigma);
        out[top] = 1.0;
        Ok((
            MStepBranch::OneHot,
            NewtonStats {
                x: sigma[top],
                iters: 0,
                residual: 0.0,
            },
        ))
    } else {
        degenerate_into(sigma, w, opts, out)
    }
}
