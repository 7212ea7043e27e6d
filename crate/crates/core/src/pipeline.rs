//! Self-labeled clustering and the noisy-label supervised protocol.
//!
//! [`self_label_train`] alternates, batch by batch, between optimizing soft
//! pseudo-labels `Y` for the current predictions and one SGD step of the
//! linear model towards them. [`robustness_experiment`] trains the same model
//! on corrupted, softened labels under both cross-entropies.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_split, MixtureSpec};
use crate::em::{em_optimize, EmConfig};
use crate::error::{Error, Result};
use crate::loss::LossVariant;
use crate::metrics::{accuracy, clustering_accuracy};
use crate::model::{epoch_batches, sgd_step, sgd_train, ClassLoss, LinearModel, TrainConfig};
use crate::pgd::{pgd_optimize, PgdConfig};
use crate::report::SolverReport;
use crate::sampling::{rng, stream};
use crate::simplex::{argmax, validate, LabelMatrix, ProbVec, Validation, SIMPLEX_TOL};

/// How pseudo-labels are optimized for a batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelSolver {
    /// EM on collision CE with `KL(u ‖ ȳ)`.
    Em,
    /// Projected gradient on collision CE with `KL(ȳ ‖ u)`.
    PgdCce { step_size: f64, max_iters: usize },
    /// Projected gradient on Shannon CE with `KL(ȳ ‖ u)`; the model is then
    /// trained with Shannon CE as well.
    PgdShannonKl { step_size: f64, max_iters: usize },
}

impl LabelSolver {
    pub fn variant(self) -> LossVariant {
        match self {
            LabelSolver::Em => LossVariant::CcePlus,
            LabelSolver::PgdCce { .. } => LossVariant::Cce,
            LabelSolver::PgdShannonKl { .. } => LossVariant::ShannonKl,
        }
    }

    pub fn class_loss(self) -> ClassLoss {
        match self {
            LabelSolver::PgdShannonKl { .. } => ClassLoss::Shannon,
            _ => ClassLoss::Collision,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Fairness weight and prior live in `em.fairness` and are shared by every
    /// solver.
    pub em: EmConfig,
    pub solver: LabelSolver,
    /// `train.loss` is ignored; the solver decides it.
    pub train: TrainConfig,
    /// Re-optimize `Y` inside every batch. When off, `Y` is optimized once per
    /// epoch over the whole training set and held fixed for that epoch.
    pub per_batch_y_update: bool,
}

impl PipelineConfig {
    pub fn new(k: usize, lambda: f64) -> Self {
        PipelineConfig {
            em: EmConfig::new(k).with_lambda(lambda),
            solver: LabelSolver::Em,
            train: TrainConfig::default(),
            per_batch_y_update: true,
        }
    }

    pub fn k(&self) -> usize {
        self.em.fairness.k()
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.solver.class_loss(),
            ..self.train.clone()
        }
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over batches of the label objective after the `Y` solve.
    pub loss: f64,
    /// Hungarian-matched accuracy of `argmax σ`, when labels are known.
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    /// Mean solver iterations per `Y` solve.
    pub em_iters_mean: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Labeled<'a> {
    pub x: ArrayView2<'a, f64>,
    pub labels: &'a [usize],
}

#[derive(Clone, Debug)]
pub struct SelfLabelOutcome {
    pub model: LinearModel,
    /// Pseudo-labels of the last epoch, one row per training point.
    pub labels: LabelMatrix,
    pub log: Vec<EpochRecord>,
    pub warnings: Vec<String>,
}

/// Solves for `Y` given predictions, starting from the predictions.
///
/// With `λ = 0` every variant is minimized by the one-hot label at
/// `argmax σ_i`, which is returned directly.
pub fn solve_labels(
    predictions: &LabelMatrix,
    cfg: &PipelineConfig,
) -> Result<(LabelMatrix, SolverReport)> {
    if cfg.em.fairness.lambda == 0.0 {
        let (m, k) = (predictions.nrows(), predictions.ncols());
        let mut y = Array2::zeros((m, k));
        for (i, row) in predictions.rows().enumerate() {
            y[[i, argmax(row)]] = 1.0;
        }
        let y = LabelMatrix::from_array_unchecked(y);
        let objective = crate::loss::loss(cfg.solver.variant(), &y, predictions, &cfg.em.fairness)?;
        let report = SolverReport {
            iterations: 0,
            wall_seconds: 0.0,
            objective,
            status: crate::report::SolverStatus::Converged,
            history: vec![objective],
            mean_inner_iterations: 0.0,
            last_step: 0.0,
        };
        return Ok((y, report));
    }
    let warm = positive_warm_start(predictions);
    match cfg.solver {
        LabelSolver::Em => em_optimize(predictions, &warm, &cfg.em),
        LabelSolver::PgdCce {
            step_size,
            max_iters,
        }
        | LabelSolver::PgdShannonKl {
            step_size,
            max_iters,
        } => {
            let pgd = PgdConfig {
                max_iters,
                parallel: cfg.em.parallel,
                ..PgdConfig::new(cfg.solver.variant(), cfg.em.fairness.clone(), step_size)
            };
            pgd_optimize(predictions, &warm, &pgd)
        }
    }
}

/// The predictions themselves, unless softmax underflow produced an exact
/// zero, in which case they are mixed with `10⁻¹²` of the uniform vector.
fn positive_warm_start(predictions: &LabelMatrix) -> LabelMatrix {
    if predictions.as_array().iter().all(|&v| v > 0.0) {
        return predictions.clone();
    }
    let k = predictions.ncols() as f64;
    let eps = 1e-12;
    LabelMatrix::from_array_unchecked(predictions.as_array().mapv(|v| (1.0 - eps) * v + eps / k))
}

fn evaluate(model: &LinearModel, data: Option<Labeled<'_>>) -> Result<Option<f64>> {
    match data {
        None => Ok(None),
        Some(d) => Ok(Some(clustering_accuracy(&model.predict(d.x)?, d.labels)?)),
    }
}

/// Alternating self-labeling from `model`.
///
/// `train_labels` and `test` are used only for the accuracy columns of the
/// log; training never reads them.
pub fn self_label_train(
    x: ArrayView2<'_, f64>,
    train_labels: Option<&[usize]>,
    test: Option<Labeled<'_>>,
    model: LinearModel,
    cfg: &PipelineConfig,
) -> Result<SelfLabelOutcome> {
    let k = cfg.k();
    if k < 2 {
        return Err(Error::InvalidParams(format!(
            "clustering needs K >= 2, got {k}"
        )));
    }
    if model.k() != k {
        return Err(Error::ShapeMismatch(format!(
            "model has {} classes, config {k}",
            model.k()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyBatch);
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            index: i,
            value: *v,
        });
    }
    if let Some(labels) = train_labels {
        if labels.len() != x.nrows() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: labels.len(),
            });
        }
    }
    let train = cfg.train_config();
    train.validate()?;

    let mut warnings = Vec::new();
    if cfg.em.fairness.lambda == 0.0 {
        warnings.push(
            "fairness weight is 0: collapse of all points into one cluster is a valid optimum"
                .to_string(),
        );
    }

    let m = x.nrows();
    let mut model = model;
    let mut full_y = Array2::zeros((m, k));
    let mut log = Vec::with_capacity(train.epochs);
    let train_eval = train_labels.map(|labels| Labeled { x, labels });

    for epoch in 0..train.epochs {
        let start = Instant::now();
        let batches = epoch_batches(m, train.batch_size, train.seed, epoch);
        let mut loss_sum = 0.0;
        let mut iter_sum = 0usize;
        let mut solves = 0usize;

        if cfg.per_batch_y_update {
            for idx in &batches {
                let xb = x.select(Axis(0), idx);
                let sigma = model.forward(xb.view())?;
                let (yb, report) = solve_labels(&sigma, cfg)?;
                loss_sum += report.objective;
                iter_sum += report.iterations;
                solves += 1;
                for (row, &i) in yb.rows().zip(idx) {
                    full_y
                        .row_mut(i)
                        .as_slice_mut()
                        .expect("standard layout")
                        .copy_from_slice(row);
                }
                sgd_step(&mut model, xb.view(), &yb, &train)?;
            }
        } else {
            let sigma = model.forward(x)?;
            let (y, report) = solve_labels(&sigma, cfg)?;
            loss_sum += report.objective;
            iter_sum += report.iterations;
            solves += 1;
            full_y = y.into_array();
            let y_fixed = LabelMatrix::from_array_unchecked(full_y.clone());
            for idx in &batches {
                let xb = x.select(Axis(0), idx);
                let yb = crate::model::select_labels(&y_fixed, idx);
                sgd_step(&mut model, xb.view(), &yb, &train)?;
            }
        }

        log.push(EpochRecord {
            epoch,
            loss: loss_sum / solves as f64,
            train_acc: evaluate(&model, train_eval)?,
            test_acc: evaluate(&model, test)?,
            em_iters_mean: iter_sum as f64 / solves as f64,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(SelfLabelOutcome {
        model,
        labels: LabelMatrix::from_array_unchecked(full_y),
        log,
        warnings,
    })
}

/// `ŷ_i = η·u + (1 − η)·e_{l_i}`.
pub fn soften_labels(hard: &[usize], eta: f64, k: usize) -> Result<LabelMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParams(format!(
            "eta must be in [0, 1], got {eta}"
        )));
    }
    if hard.is_empty() {
        return Err(Error::Empty);
    }
    let mut y = Array2::from_elem((hard.len(), k), eta / k as f64);
    for (i, &l) in hard.iter().enumerate() {
        if l >= k {
            return Err(Error::IndexOutOfRange { index: l, k });
        }
        y[[i, l]] += 1.0 - eta;
    }
    Ok(LabelMatrix::from_array_unchecked(y))
}

/// Replaces the labels of a uniformly chosen `⌊η·M⌋`-subset with labels drawn
/// uniformly from all `K` classes. A replacement may equal the original.
pub fn corrupt_labels(labels: &[usize], eta: f64, k: usize, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParams(format!(
            "eta must be in [0, 1], got {eta}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParams("K must be positive".into()));
    }
    let m = labels.len();
    let count = ((eta * m as f64).floor() as usize).min(m);
    let mut r = rng(seed, stream::CORRUPTION);
    let mut out = labels.to_vec();
    for i in sample(&mut r, m, count).into_vec() {
        out[i] = r.gen_range(0..k);
    }
    Ok(out)
}

/// Row-stochastic `Q` with `Q[l][t] = P(observed = l | true = t)` read along
/// rows: row `l` is the soft label assigned to an observation of class `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    q: Array2<f64>,
}

impl TransitionMatrix {
    pub fn new(q: Array2<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::NonSquare {
                rows: q.nrows(),
                cols: q.ncols(),
            });
        }
        if q.nrows() == 0 {
            return Err(Error::Empty);
        }
        if let Some(v) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParams(format!(
                "transition entries must lie in [0, 1], found {v}"
            )));
        }
        Ok(TransitionMatrix { q })
    }

    pub fn identity(k: usize) -> Self {
        TransitionMatrix { q: Array2::eye(k) }
    }

    /// `1 − ε` on the diagonal, `ε/(K−1)` elsewhere.
    pub fn symmetric(k: usize, eps: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParams(format!(
                "symmetric noise needs K >= 2, got {k}"
            )));
        }
        let off = eps / (k - 1) as f64;
        let q = Array2::from_shape_fn((k, k), |(a, b)| if a == b { 1.0 - eps } else { off });
        TransitionMatrix::new(q)
    }

    pub fn k(&self) -> usize {
        self.q.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.q
    }
}

pub fn soft_label_from_transition(q: &TransitionMatrix, observed: usize) -> Result<ProbVec> {
    if observed >= q.k() {
        return Err(Error::IndexOutOfRange {
            index: observed,
            k: q.k(),
        });
    }
    validate(q.q.row(observed).to_vec(), SIMPLEX_TOL, Validation::Strict).map_err(|e| {
        Error::NotADistribution {
            row: observed,
            source: Box::new(e),
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSpec {
    pub mixture: MixtureSpec,
    pub test_per_class: usize,
    pub etas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub losses: Vec<ClassLoss>,
    /// `train.seed` and `train.loss` are overridden per run.
    pub train: TrainConfig,
}

impl RobustnessSpec {
    /// Five classes in 20 dimensions, 1000/200 points per class, a tenth of
    /// each class drawn with ten times the spread.
    pub fn standard() -> Self {
        RobustnessSpec {
            mixture: MixtureSpec {
                k: 5,
                n: 20,
                per_class: 1000,
                separation: 3.0,
                outlier_fraction: 0.1,
                outlier_scale: 10.0,
            },
            test_per_class: 200,
            etas: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            seeds: (0..5).collect(),
            losses: vec![ClassLoss::Collision, ClassLoss::Shannon],
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub eta: f64,
    /// `cce` or `sce`.
    pub loss: String,
    pub seed: u64,
    pub test_acc: f64,
}

pub fn loss_tag(loss: ClassLoss) -> &'static str {
    match loss {
        ClassLoss::Collision => "cce",
        ClassLoss::Shannon => "sce",
    }
}

/// One row per `(η, loss, seed)`, ordered by η, then loss as listed, then
/// seed as listed. Each seed draws its own train/test split.
pub fn robustness_experiment(spec: &RobustnessSpec) -> Result<Vec<RobustnessRow>> {
    spec.train.validate()?;
    let k = spec.mixture.k;
    let mut runs = Vec::new();
    for (si, &seed) in spec.seeds.iter().enumerate() {
        let (train, test) = make_split(&spec.mixture, spec.test_per_class, seed)?;
        let truth = train.labels.as_ref().expect("mixture is labeled");
        let test_truth = test.labels.as_ref().expect("mixture is labeled");
        for (ei, &eta) in spec.etas.iter().enumerate() {
            let noisy = corrupt_labels(truth, eta, k, seed)?;
            let soft = soften_labels(&noisy, eta, k)?;
            for (li, &loss) in spec.losses.iter().enumerate() {
                let cfg = TrainConfig {
                    seed,
                    loss,
                    ..spec.train.clone()
                };
                let init = LinearModel::init(k, spec.mixture.n, seed);
                let (model, _) = sgd_train(&init, train.x.view(), &soft, &cfg)?;
                let test_acc = accuracy(&model.predict(test.x.view())?, test_truth)?;
                runs.push((
                    (ei, li, si),
                    RobustnessRow {
                        eta,
                        loss: loss_tag(loss).into(),
                        seed,
                        test_acc,
                    },
                ));
            }
        }
    }
    runs.sort_by_key(|(key, _)| *key);
    Ok(runs.into_iter().map(|(_, row)| row).collect())
}
