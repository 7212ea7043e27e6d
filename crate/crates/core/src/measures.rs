//! Entropies, cross-entropies and divergences over discrete distributions.
//!
//! Everything is in nats. Inputs are slices so that rows of a
//! [`LabelMatrix`](crate::LabelMatrix) can be passed without copying; callers
//! are expected to pass points of the simplex (see [`ProbVec`](crate::ProbVec)).
//! `+∞` is an ordinary return value: a cross-entropy or divergence against a
//! distribution with missing support is infinite, not an error.
//!
//! | Function | Value |
//! |----------|-------|
//! | [`shannon_entropy`] | `H(p) = −Σ p_k ln p_k` |
//! | [`shannon_cross_entropy`] | `H(p,q) = −Σ p_k ln q_k` |
//! | [`kl_divergence`] | `D(p,q) = Σ p_k ln(p_k/q_k)` |
//! | [`renyi_entropy`] | `H_α(p) = ln(Σ p_k^α)/(1−α)` |
//! | [`renyi_divergence`] | `D_α(p,q) = ln(Σ p_k^α q_k^(1−α))/(α−1)` |
//! | [`collision_entropy`] | `H₂(p) = −ln Σ p_k²` |
//! | [`collision_cross_entropy`] | `H₂(p,q) = −ln Σ p_k q_k` |
//!
//! The Rényi functions reject `α = 1`; use the Shannon functions for that
//! limit.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::simplex::dot;

fn check_order(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidOrder(alpha));
    }
    Ok(())
}

/// `0 · ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .fold(0.0, |acc, &x| acc + x * x.ln())
}

pub fn shannon_cross_entropy(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            total -= a * b.ln();
        }
    }
    total
}

pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            total += a * (a / b).ln();
        }
    }
    // Rounding can leave a tiny negative value when p ≈ q.
    total.max(0.0)
}

pub fn renyi_entropy(p: &[f64], alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    let s = p
        .iter()
        .filter(|&&x| x > 0.0)
        .fold(0.0, |acc, &x| acc + x.powf(alpha));
    Ok((s.ln() / (1.0 - alpha)).max(0.0))
}

/// Terms with `p_k = 0` contribute nothing. For `α > 1` a class with
/// `p_k > 0 = q_k` makes the divergence infinite; for `α < 1` only fully
/// disjoint supports do.
pub fn renyi_divergence(p: &[f64], q: &[f64], alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    assert_eq!(p.len(), q.len());
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            s += a.powf(alpha) * b.powf(1.0 - alpha);
        }
    }
    Ok((s.ln() / (alpha - 1.0)).max(0.0))
}

pub fn collision_entropy(p: &[f64]) -> f64 {
    -dot(p, p).ln()
}

/// `−ln Σ p_k q_k`, the negative log-probability that independent draws from
/// `p` and `q` coincide. Symmetric in its arguments; `+∞` iff the supports
/// are disjoint.
pub fn collision_cross_entropy(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    -dot(p, q).ln()
}

/// Split of the collision cross-entropy into an angular and an entropic part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CceDecomposition {
    /// `−ln cos∠(p, q)`.
    pub angular: f64,
    /// `(H₂(p) + H₂(q)) / 2`.
    pub entropic: f64,
}

impl CceDecomposition {
    pub fn total(&self) -> f64 {
        self.angular + self.entropic
    }
}

pub fn cce_decomposition(p: &[f64], q: &[f64]) -> CceDecomposition {
    assert_eq!(p.len(), q.len());
    let pp = dot(p, p);
    let qq = dot(q, q);
    let cos = (dot(p, q) / (pp.sqrt() * qq.sqrt())).min(1.0);
    CceDecomposition {
        angular: -cos.ln(),
        entropic: 0.5 * (-pp.ln() - qq.ln()),
    }
}

/// Mutual-information loss estimate `mean_i H(σ_i) − H(mean_i σ_i)` over the
/// rows of `predictions`. Negative when predictions are decisive and balanced.
pub fn mi_loss_estimate(predictions: &Array2<f64>) -> Result<f64> {
    let m = predictions.nrows();
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut mean = vec![0.0; predictions.ncols()];
    let mut mean_entropy = 0.0;
    for row in predictions.rows() {
        let row = row.to_vec();
        mean_entropy += shannon_entropy(&row);
        mean.iter_mut().zip(&row).for_each(|(a, &b)| *a += b);
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    Ok(mean_entropy / m as f64 - shannon_entropy(&mean))
}
