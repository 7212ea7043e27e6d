//! Reference minimizers for the M-step objective that do not use the
//! Newton parameterization: projected gradient descent on the simplex and
//! exhaustive grids for K = 2 and K = 3.

use rand::Rng;

use super::MStepInstance;
use crate::sampling::random_simplex;
use crate::simplex::{dot, project_simplex_into};

/// Owned data for one random M-step problem.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomInstance {
    pub sigma: Vec<f64>,
    pub support_weights: Vec<f64>,
    pub lambda: f64,
}

impl RandomInstance {
    /// σ from the flat Dirichlet, `u` uniform, `S_k ~ U(0.01, 1)` and
    /// `λ` log-uniform on `[0.1, 100]`.
    pub fn sample<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let sigma = random_simplex(k, rng).into_vec();
        let u = 1.0 / k as f64;
        let support_weights = (0..k).map(|_| u * rng.gen_range(0.01..1.0)).collect();
        let lambda = 10f64.powf(rng.gen_range(-1.0..2.0));
        RandomInstance {
            sigma,
            support_weights,
            lambda,
        }
    }

    /// Same as [`sample`](Self::sample) but with a random non-empty proper
    /// subset of the weights set to exactly zero.
    pub fn sample_degenerate<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        assert!(k >= 2);
        let mut inst = Self::sample(k, rng);
        loop {
            let mask: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.5)).collect();
            let zeros = mask.iter().filter(|&&z| z).count();
            if zeros > 0 && zeros < k {
                for (w, z) in inst.support_weights.iter_mut().zip(mask) {
                    if z {
                        *w = 0.0;
                    }
                }
                return inst;
            }
        }
    }

    pub fn view(&self) -> MStepInstance<'_> {
        MStepInstance::new(&self.sigma, &self.support_weights, self.lambda)
            .expect("valid random instance")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    /// `‖P(y − ∇g) − y‖∞` at the returned point (0 for grids).
    pub residual: f64,
    pub iterations: usize,
}

fn gradient(inst: &MStepInstance<'_>, y: &[f64], out: &mut [f64]) {
    let sy = dot(inst.sigma, y);
    for (k, o) in out.iter_mut().enumerate() {
        let w = inst.support_weights[k];
        let barrier = if w > 0.0 { inst.lambda * w / y[k] } else { 0.0 };
        *o = -inst.sigma[k] / sy - barrier;
    }
}

fn projected_residual(
    y: &[f64],
    g: &[f64],
    buf: &mut [f64],
    proj: &mut [f64],
    scratch: &mut Vec<f64>,
) -> f64 {
    for ((b, &yk), &gk) in buf.iter_mut().zip(y).zip(g) {
        *b = yk - gk;
    }
    project_simplex_into(buf, proj, scratch).expect("finite gradient");
    proj.iter()
        .zip(y)
        .fold(0.0, |m: f64, (p, q)| m.max((p - q).abs()))
}

/// Spectral projected gradient with Armijo backtracking from the uniform
/// distribution, followed by damped primal Newton steps on the face of the
/// simplex it lands on. Stops when the projected-gradient residual reaches
/// `tol`, no further decrease is representable, or `max_iters` first-order
/// iterations have run.
///
/// First-order steps alone stall around residual 1e-4 on K = 200 barrier
/// problems; the Newton phase solves the equality-constrained KKT system
/// `(D + ssᵀ) d + ν1 = −∇g`, `1ᵀd = 0` with `D = diag(λ w_k / y_k²)` and
/// `s = σ / σᵀy`, which needs no knowledge of the scalar parameterization.
pub fn projected_gradient(inst: &MStepInstance<'_>, tol: f64, max_iters: usize) -> OracleSolution {
    let k = inst.k();
    let mut ws = Workspace::new(k);
    let mut y = vec![1.0 / k as f64; k];
    let mut obj = inst.objective(&y);
    gradient(inst, &y, &mut ws.g);
    let mut residual = ws.residual(&y);
    let mut iterations = 0;

    let switch = tol.max(1e-3);
    let mut step = 1.0;
    while residual > switch && iterations < max_iters.min(1_000) {
        match spg_step(inst, &mut y, &mut obj, &mut step, &mut ws) {
            Some(()) => {
                iterations += 1;
                residual = ws.residual(&y);
            }
            None => break,
        }
    }

    let mut newton_steps = 0;
    let mut best = (residual, y.clone(), obj);
    let mut stalled = 0;
    while best.0 > tol && newton_steps < max_iters.min(200) && stalled < 10 {
        if newton_step(inst, &mut y, &mut obj, &mut ws).is_none() {
            break;
        }
        newton_steps += 1;
        gradient(inst, &y, &mut ws.g);
        residual = ws.residual(&y);
        if residual < best.0 {
            best = (residual, y.clone(), obj);
            stalled = 0;
        } else {
            stalled += 1;
        }
    }
    let (residual, y, objective) = best;

    OracleSolution {
        y,
        objective,
        residual,
        iterations: iterations + newton_steps,
    }
}

struct Workspace {
    g: Vec<f64>,
    g_new: Vec<f64>,
    buf: Vec<f64>,
    proj: Vec<f64>,
    trial: Vec<f64>,
    dir: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(k: usize) -> Self {
        Workspace {
            g: vec![0.0; k],
            g_new: vec![0.0; k],
            buf: vec![0.0; k],
            proj: vec![0.0; k],
            trial: vec![0.0; k],
            dir: vec![0.0; k],
            scratch: Vec::with_capacity(k),
        }
    }

    fn residual(&mut self, y: &[f64]) -> f64 {
        projected_residual(y, &self.g, &mut self.buf, &mut self.proj, &mut self.scratch)
    }
}

fn spg_step(
    inst: &MStepInstance<'_>,
    y: &mut [f64],
    obj: &mut f64,
    step: &mut f64,
    ws: &mut Workspace,
) -> Option<()> {
    let k = y.len();
    for ((b, &yk), &gk) in ws.buf.iter_mut().zip(y.iter()).zip(&ws.g) {
        *b = yk - *step * gk;
    }
    project_simplex_into(&ws.buf, &mut ws.proj, &mut ws.scratch).expect("finite iterate");
    let slope: f64 = ws
        .proj
        .iter()
        .zip(y.iter())
        .zip(&ws.g)
        .map(|((p, q), gk)| (p - q) * gk)
        .sum();
    if slope >= 0.0 {
        return None;
    }
    let candidate = armijo(inst, y, &ws.proj, *obj, slope, &mut ws.trial)?;

    gradient(inst, &ws.trial, &mut ws.g_new);
    let mut ss = 0.0;
    let mut sy = 0.0;
    for (i, &yi) in y.iter().enumerate().take(k) {
        let s = ws.trial[i] - yi;
        let d = ws.g_new[i] - ws.g[i];
        ss += s * s;
        sy += s * d;
    }
    if ss == 0.0 {
        return None;
    }
    *step = if sy > 0.0 {
        (ss / sy).clamp(1e-12, 1e12)
    } else {
        1.0
    };
    y.copy_from_slice(&ws.trial);
    ws.g.copy_from_slice(&ws.g_new);
    *obj = candidate;
    Some(())
}

/// Backtracks along `target − y` until the Armijo condition holds; leaves
/// the accepted point in `trial`.
fn armijo(
    inst: &MStepInstance<'_>,
    y: &[f64],
    target: &[f64],
    obj: f64,
    slope: f64,
    trial: &mut [f64],
) -> Option<f64> {
    let mut t = 1.0;
    while t >= 1e-30 {
        for ((tr, &p), &q) in trial.iter_mut().zip(target).zip(y) {
            *tr = q + t * (p - q);
        }
        let candidate = inst.objective(trial);
        if candidate.is_finite() && candidate <= obj + 1e-4 * t * slope {
            return Some(candidate);
        }
        t *= 0.5;
    }
    None
}

fn newton_step(
    inst: &MStepInstance<'_>,
    y: &mut [f64],
    obj: &mut f64,
    ws: &mut Workspace,
) -> Option<()> {
    let face: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0.0).collect();
    if face.iter().any(|&i| inst.support_weights[i] == 0.0) {
        return None;
    }
    let sy = dot(inst.sigma, y);
    // H⁻¹v = D⁻¹v − D⁻¹s (sᵀD⁻¹v) / (1 + sᵀD⁻¹s)
    let dinv = |i: usize| y[i] * y[i] / (inst.lambda * inst.support_weights[i]);
    let s = |i: usize| inst.sigma[i] / sy;
    let mut s_dinv_s = 0.0;
    let mut s_dinv_g = 0.0;
    let mut s_dinv_1 = 0.0;
    for &i in &face {
        s_dinv_s += s(i) * dinv(i) * s(i);
        s_dinv_g += s(i) * dinv(i) * ws.g[i];
        s_dinv_1 += s(i) * dinv(i);
    }
    let denom = 1.0 + s_dinv_s;
    let mut one_hinv_g = 0.0;
    let mut one_hinv_1 = 0.0;
    for &i in &face {
        one_hinv_g += dinv(i) * ws.g[i] - dinv(i) * s(i) * s_dinv_g / denom;
        one_hinv_1 += dinv(i) - dinv(i) * s(i) * s_dinv_1 / denom;
    }
    let nu = -one_hinv_g / one_hinv_1;
    let s_dinv_r = s_dinv_g + nu * s_dinv_1;
    ws.dir.iter_mut().for_each(|d| *d = 0.0);
    let mut slope = 0.0;
    let mut t_max: f64 = 1.0;
    for &i in &face {
        let r = ws.g[i] + nu;
        let d = -(dinv(i) * r - dinv(i) * s(i) * s_dinv_r / denom);
        ws.dir[i] = d;
        slope += d * ws.g[i];
        if d < 0.0 {
            t_max = t_max.min(-0.99 * y[i] / d);
        }
    }
    if !slope.is_finite() {
        return None;
    }
    for ((b, &yk), &d) in ws.buf.iter_mut().zip(y.iter()).zip(&ws.dir) {
        *b = yk + t_max * d;
    }
    let target = ws.buf.clone();
    let full = inst.objective(&target);
    let size = ws.dir.iter().fold(0.0f64, |m, d| m.max(d.abs())) * t_max;
    // Near the minimizer the predicted decrease is below the rounding of g;
    // short full steps are taken unconditionally and the caller keeps the
    // iterate with the smallest residual.
    let candidate = if full.is_finite() && (size <= 1e-8 || full <= *obj) {
        ws.trial.copy_from_slice(&target);
        full
    } else {
        armijo(inst, y, &target, *obj, t_max * slope, &mut ws.trial)?
    };
    if ws.trial.iter().zip(y.iter()).all(|(a, b)| a == b) {
        return None;
    }
    y.copy_from_slice(&ws.trial);
    *obj = candidate;
    Some(())
}

/// Exhaustive search over `y = (j·h, 1 − j·h)` for K = 2.
pub fn grid_search_2(inst: &MStepInstance<'_>, h: f64) -> OracleSolution {
    assert_eq!(inst.k(), 2, "grid_search_2 needs K = 2");
    let n = (1.0 / h).round() as usize;
    let mut best = OracleSolution {
        y: vec![0.5, 0.5],
        objective: f64::INFINITY,
        residual: 0.0,
        iterations: 0,
    };
    for j in 0..=n {
        let t = j as f64 / n as f64;
        let y = [t, 1.0 - t];
        let g = inst.objective(&y);
        best.iterations += 1;
        if g < best.objective {
            best.objective = g;
            best.y = y.to_vec();
        }
    }
    best
}

/// Exhaustive search over the lattice `{(a, b, c)·h : a + b + c = 1/h}` for K = 3.
pub fn grid_search_3(inst: &MStepInstance<'_>, h: f64) -> OracleSolution {
    assert_eq!(inst.k(), 3, "grid_search_3 needs K = 3");
    let n = (1.0 / h).round() as usize;
    let mut best = OracleSolution {
        y: vec![1.0 / 3.0; 3],
        objective: f64::INFINITY,
        residual: 0.0,
        iterations: 0,
    };
    for a in 0..=n {
        for b in 0..=(n - a) {
            let c = n - a - b;
            let y = [
                a as f64 / n as f64,
                b as f64 / n as f64,
                c as f64 / n as f64,
            ];
            let g = inst.objective(&y);
            best.iterations += 1;
            if g < best.objective {
                best.objective = g;
                best.y = y.to_vec();
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mstep::{degenerate_solve, newton_solve, MStepOptions};

    #[test]
    fn pgd_oracle_matches_newton_on_small_instance() {
        let sigma = [0.1, 0.6, 0.3];
        let w = [0.2, 0.5, 0.3];
        let inst = MStepInstance::new(&sigma, &w, 1.5).unwrap();
        let oracle = projected_gradient(&inst, 1e-12, 100_000);
        let sol = newton_solve(&inst, &MStepOptions::default()).unwrap();
        for (a, b) in oracle.y.iter().zip(sol.y.iter()) {
            assert!((a - b).abs() < 1e-8, "{:?} vs {:?}", oracle.y, sol.y);
        }
    }

    #[test]
    fn degenerate_example_matches_grid() {
        // Closed form gives y_c < 0 here, so the restricted branch applies.
        let sigma = [0.2, 0.3, 0.5];
        let w = [0.5, 0.5, 0.0];
        let inst = MStepInstance::new(&sigma, &w, 1.0).unwrap();
        let sol = degenerate_solve(&inst, &MStepOptions::default()).unwrap();
        assert!((sol.y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let grid = grid_search_3(&inst, 1e-3);
        for (a, b) in grid.y.iter().zip(sol.y.iter()) {
            assert!((a - b).abs() <= 2e-3, "{:?} vs {:?}", grid.y, sol.y);
        }
        assert!(inst.objective(&sol.y) <= grid.objective + 1e-12);
    }

    #[test]
    fn grid_2_is_exhaustive() {
        let inst = MStepInstance::new(&[0.9, 0.1], &[0.25, 0.25], 1.0).unwrap();
        let grid = grid_search_2(&inst, 1e-4);
        assert_eq!(grid.iterations, 10_001);
        assert!((grid.y[0] - 0.8171614253365976).abs() <= 5e-5);
    }
}
