//! Batch self-labeling losses over a label matrix `Y` and predictions `σ`.
//!
//! ```text
//! L_CCE    = mean_i H₂(y_i, σ_i) + λ KL(ȳ ‖ u)
//! L_CCE+   = mean_i H₂(y_i, σ_i) + λ KL(u ‖ ȳ)
//! L_ce+kl  = mean_i H(y_i, σ_i)  + λ KL(ȳ ‖ u)
//! ```
//!
//! `ȳ` is the mean row of `Y` over the batch that is passed in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{collision_cross_entropy, kl_divergence, shannon_cross_entropy};
use crate::simplex::{LabelMatrix, ProbVec};

/// Fairness term settings: weight λ and class prior `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct Fairness {
    pub lambda: f64,
    pub prior: ProbVec,
}

impl Fairness {
    pub fn new(lambda: f64, prior: ProbVec) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(Fairness { lambda, prior })
    }

    pub fn uniform(k: usize, lambda: f64) -> Self {
        Fairness {
            lambda,
            prior: ProbVec::uniform(k),
        }
    }

    pub fn k(&self) -> usize {
        self.prior.len()
    }
}

/// Which batch loss to evaluate or optimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// Collision CE with KL(ȳ ‖ u).
    Cce,
    /// Collision CE with KL(u ‖ ȳ).
    CcePlus,
    /// Shannon CE with KL(ȳ ‖ u).
    ShannonKl,
}

pub(crate) fn check_shapes(
    y: &LabelMatrix,
    predictions: &LabelMatrix,
    fairness: &Fairness,
) -> Result<()> {
    if y.nrows() != predictions.nrows() || y.ncols() != predictions.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "labels are {}x{}, predictions {}x{}",
            y.nrows(),
            y.ncols(),
            predictions.nrows(),
            predictions.ncols()
        )));
    }
    if fairness.k() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "prior has {} classes, labels {}",
            fairness.k(),
            y.ncols()
        )));
    }
    Ok(())
}

/// `mean_i H₂(y_i, σ_i)`.
pub fn mean_collision_ce(y: &LabelMatrix, predictions: &LabelMatrix) -> f64 {
    let total = y
        .rows()
        .zip(predictions.rows())
        .fold(0.0, |acc, (a, b)| acc + collision_cross_entropy(a, b));
    total / y.nrows() as f64
}

/// `mean_i H(y_i, σ_i)`.
pub fn mean_shannon_ce(y: &LabelMatrix, predictions: &LabelMatrix) -> f64 {
    let total = y
        .rows()
        .zip(predictions.rows())
        .fold(0.0, |acc, (a, b)| acc + shannon_cross_entropy(a, b));
    total / y.nrows() as f64
}

fn fairness_term(kl: f64, lambda: f64) -> f64 {
    // λ = 0 switches the term off even where KL is infinite.
    if lambda == 0.0 {
        0.0
    } else {
        lambda * kl
    }
}

pub fn loss_cce(y: &LabelMatrix, predictions: &LabelMatrix, fairness: &Fairness) -> Result<f64> {
    check_shapes(y, predictions, fairness)?;
    let ybar = y.mean_row();
    Ok(mean_collision_ce(y, predictions)
        + fairness_term(kl_divergence(&ybar, &fairness.prior), fairness.lambda))
}

pub fn loss_cce_plus(
    y: &LabelMatrix,
    predictions: &LabelMatrix,
    fairness: &Fairness,
) -> Result<f64> {
    check_shapes(y, predictions, fairness)?;
    let ybar = y.mean_row();
    Ok(mean_collision_ce(y, predictions)
        + fairness_term(kl_divergence(&fairness.prior, &ybar), fairness.lambda))
}

pub fn loss_ce_kl(y: &LabelMatrix, predictions: &LabelMatrix, fairness: &Fairness) -> Result<f64> {
    check_shapes(y, predictions, fairness)?;
    let ybar = y.mean_row();
    Ok(mean_shannon_ce(y, predictions)
        + fairness_term(kl_divergence(&ybar, &fairness.prior), fairness.lambda))
}

pub fn loss(
    variant: LossVariant,
    y: &LabelMatrix,
    predictions: &LabelMatrix,
    fairness: &Fairness,
) -> Result<f64> {
    match variant {
        LossVariant::Cce => loss_cce(y, predictions, fairness),
        LossVariant::CcePlus => loss_cce_plus(y, predictions, fairness),
        LossVariant::ShannonKl => loss_ce_kl(y, predictions, fairness),
    }
}
