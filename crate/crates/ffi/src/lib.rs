//! C ABI over `cce_core`.
//!
//! Every fallible function returns a [`CceStatus`] and writes results through
//! out-pointers, which are left untouched on failure. After a failure,
//! [`cce_last_error`] gives a description for the calling thread. Matrices are
//! dense row-major `double` arrays. Models are opaque handles created by
//! [`cce_model_new`] or [`cce_model_load`] and released by [`cce_model_free`].
//! Panics never cross the boundary; they are reported as
//! `CCE_STATUS_PANIC`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cce_core::em::{em_optimize, EmConfig};
use cce_core::measures;
use cce_core::metrics::{ari, clustering_accuracy, nmi};
use cce_core::model::LinearModel;
use cce_core::mstep::{solve, MStepInstance, MStepOptions};
use cce_core::pgd::{pgd_optimize, PgdConfig};
use cce_core::{Error, Fairness, LabelMatrix, LossVariant, ProbVec, SolverReport, SolverStatus};
use ndarray::{Array2, ArrayView2};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CceStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A scalar argument is out of range.
    InvalidArgument = 2,
    /// A vector or matrix row is not a probability distribution.
    InvalidDistribution = 3,
    /// Dimensions of the arguments disagree.
    ShapeMismatch = 4,
    /// An iterative solver hit its iteration cap without converging.
    NoConvergence = 5,
    /// File could not be read or written.
    Io = 6,
    /// File contents are malformed.
    Parse = 7,
    /// Internal panic; the library state is still usable.
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CceSolverStatus {
    Converged = 0,
    MaxIterations = 1,
    Diverged = 2,
}

/// Objective passed to [`cce_pgd_optimize`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CceLossVariant {
    /// Collision CE with `KL(ybar || u)`.
    Cce = 0,
    /// Collision CE with `KL(u || ybar)`.
    CcePlus = 1,
    /// Shannon CE with `KL(ybar || u)`.
    ShannonKl = 2,
}

/// Summary of an EM or projected-gradient run.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CceSolverReport {
    pub iterations: usize,
    pub wall_seconds: f64,
    pub objective: f64,
    /// Largest entry change of the last iteration.
    pub last_step: f64,
    pub status: CceSolverStatus,
}

/// Opaque linear softmax model.
pub struct CceModel(LinearModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: CceStatus,
    message: String,
}

impl Failure {
    fn new(status: CceStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NonFinite { .. }
            | Error::NegativeEntry { .. }
            | Error::SumOutOfTolerance { .. }
            | Error::InvalidRow { .. }
            | Error::NotADistribution { .. } => CceStatus::InvalidDistribution,
            Error::ShapeMismatch(_) | Error::LengthMismatch { .. } | Error::NonSquare { .. } => {
                CceStatus::ShapeMismatch
            }
            Error::Empty
            | Error::InvalidOrder(_)
            | Error::InvalidParams(_)
            | Error::EmptyBatch
            | Error::ZeroWeight(_)
            | Error::AllWeightsZero
            | Error::BoundaryPoint { .. }
            | Error::IndexOutOfRange { .. } => CceStatus::InvalidArgument,
            Error::MaxIterationsExceeded { .. } => CceStatus::NoConvergence,
            Error::Io(_) => CceStatus::Io,
            Error::Parse { .. }
            | Error::RaggedRows { .. }
            | Error::Checkpoint(_)
            | Error::Csv(_)
            | Error::Json(_) => CceStatus::Parse,
        };
        Failure::new(status, e.to_string())
    }
}

fn record(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F>(f: F) -> CceStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CceStatus::Ok,
        Ok(Err(fail)) => {
            record(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            record(&format!("panic: {msg}"));
            CceStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if ptr.is_null() {
        return Err(Failure::new(
            CceStatus::NullPointer,
            format!("{name} is NULL"),
        ));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if ptr.is_null() {
        return Err(Failure::new(
            CceStatus::NullPointer,
            format!("{name} is NULL"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn write<T>(ptr: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if ptr.is_null() {
        return Err(Failure::new(
            CceStatus::NullPointer,
            format!("{name} is NULL"),
        ));
    }
    ptr.write(value);
    Ok(())
}

fn dist(values: &[f64]) -> Result<ProbVec, Failure> {
    Ok(ProbVec::new(values.to_vec())?)
}

fn label_matrix(values: &[f64], m: usize, k: usize) -> Result<LabelMatrix, Failure> {
    let a = Array2::from_shape_vec((m, k), values.to_vec())
        .map_err(|e| Failure::new(CceStatus::ShapeMismatch, e.to_string()))?;
    Ok(LabelMatrix::new(a)?)
}

fn c_report(r: &SolverReport) -> CceSolverReport {
    CceSolverReport {
        iterations: r.iterations,
        wall_seconds: r.wall_seconds,
        objective: r.objective,
        last_step: r.last_step,
        status: match r.status {
            SolverStatus::Converged => CceSolverStatus::Converged,
            SolverStatus::MaxIterations => CceSolverStatus::MaxIterations,
            SolverStatus::Diverged => CceSolverStatus::Diverged,
        },
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<String, Failure> {
    if path.is_null() {
        return Err(Failure::new(CceStatus::NullPointer, "path is NULL"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|e| {
            Failure::new(
                CceStatus::InvalidArgument,
                format!("path is not UTF-8: {e}"),
            )
        })
}

/// Message describing the last failed call on this thread, or NULL if none.
/// The pointer stays valid until the next failed call on the same thread.
#[no_mangle]
pub extern "C" fn cce_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cce_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- measures -------------------------------------------------------------

/// `H(p)`. `p` must be a distribution of length `k`.
///
/// # Safety
/// `p` must point to `k` readable doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn cce_shannon_entropy(p: *const f64, k: usize, out: *mut f64) -> CceStatus {
    guard(|| {
        let p = dist(input(p, k, "p")?)?;
        write(out, measures::shannon_entropy(&p), "out")
    })
}

/// `H₂(p) = −ln Σ p²`.
///
/// # Safety
/// As for [`cce_shannon_entropy`].
#[no_mangle]
pub unsafe extern "C" fn cce_collision_entropy(
    p: *const f64,
    k: usize,
    out: *mut f64,
) -> CceStatus {
    guard(|| {
        let p = dist(input(p, k, "p")?)?;
        write(out, measures::collision_entropy(&p), "out")
    })
}

/// Rényi entropy of order `alpha` (positive, not 1).
///
/// # Safety
/// As for [`cce_shannon_entropy`].
#[no_mangle]
pub unsafe extern "C" fn cce_renyi_entropy(
    p: *const f64,
    k: usize,
    alpha: f64,
    out: *mut f64,
) -> CceStatus {
    guard(|| {
        let p = dist(input(p, k, "p")?)?;
        write(out, measures::renyi_entropy(&p, alpha)?, "out")
    })
}

/// `H(p, q)`; may be `+inf`.
///
/// # Safety
/// `p` and `q` must each point to `k` readable doubles, `out` to one writable
/// double.
#[no_mangle]
pub unsafe extern "C" fn cce_shannon_cross_entropy(
    p: *const f64,
    q: *const f64,
    k: usize,
    out: *mut f64,
) -> CceStatus {
    guard(|| {
        let (p, q) = (dist(input(p, k, "p")?)?, dist(input(q, k, "q")?)?);
        write(out, measures::shannon_cross_entropy(&p, &q), "out")
    })
}

/// `H₂(p, q) = −ln Σ p_k q_k`; may be `+inf`.
///
/// # Safety
/// As for [`cce_shannon_cross_entropy`].
#[no_mangle]
pub unsafe extern "C" fn cce_collision_cross_entropy(
    p: *const f64,
    q: *const f64,
    k: usize,
    out: *mut f64,
) -> CceStatus {
    guard(|| {
        let (p, q) = (dist(input(p, k, "p")?)?, dist(input(q, k, "q")?)?);
        write(out, measures::collision_cross_entropy(&p, &q), "out")
    })
}

/// `KL(p ‖ q)`; may be `+inf`.
///
/// # Safety
/// As for [`cce_shannon_cross_entropy`].
#[no_mangle]
pub unsafe extern "C" fn cce_kl_divergence(
    p: *const f64,
    q: *const f64,
    k: usize,
    out: *mut f64,
) -> CceStatus {
    guard(|| {
        let (p, q) = (dist(input(p, k, "p")?)?, dist(input(q, k, "q")?)?);
        write(out, measures::kl_divergence(&p, &q), "out")
    })
}

/// Rényi divergence of order `alpha`.
///
/// # Safety
/// As for [`cce_shannon_cross_entropy`].
#[no_mangle]
pub unsafe extern "C" fn cce_renyi_divergence(
    p: *const f64,
    q: *const f64,
    k: usize,
    alpha: f64,
    out: *mut f64,
) -> CceStatus {
    guard(|| {
        let (p, q) = (dist(input(p, k, "p")?)?, dist(input(q, k, "q")?)?);
        write(out, measures::renyi_divergence(&p, &q, alpha)?, "out")
    })
}

// ---- solvers --------------------------------------------------------------

/// Solves one M-step: minimizes `−ln σᵀy − λ Σ_k w_k ln y_k` over the simplex.
/// `support_weights` holds `u_k S_k` (non-negative, not all zero).
/// `newton_iters_out` may be NULL.
///
/// # Safety
/// `sigma` and `support_weights` must point to `k` readable doubles, `y_out`
/// to `k` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cce_mstep_solve(
    sigma: *const f64,
    support_weights: *const f64,
    k: usize,
    lambda: f64,
    y_out: *mut f64,
    newton_iters_out: *mut usize,
) -> CceStatus {
    guard(|| {
        let sigma = input(sigma, k, "sigma")?;
        let w = input(support_weights, k, "support_weights")?;
        let out = output(y_out, k, "y_out")?;
        let inst = MStepInstance::new(sigma, w, lambda)?;
        let sol = solve(&inst, &MStepOptions::default())?;
        out.copy_from_slice(&sol.y);
        if !newton_iters_out.is_null() {
            newton_iters_out.write(sol.newton_iters);
        }
        Ok(())
    })
}

/// EM on collision CE with `KL(u ‖ ȳ)`, `u` uniform. `predictions` and
/// `warm_start` are `m × k`; the result is written to `y_out` (`m × k`).
/// `report_out` may be NULL.
///
/// # Safety
/// `predictions`, `warm_start` and `y_out` must each point to `m·k` doubles.
#[no_mangle]
pub unsafe extern "C" fn cce_em_optimize(
    predictions: *const f64,
    warm_start: *const f64,
    m: usize,
    k: usize,
    lambda: f64,
    max_iters: usize,
    rel_tol: f64,
    y_out: *mut f64,
    report_out: *mut CceSolverReport,
) -> CceStatus {
    guard(|| {
        let len = m
            .checked_mul(k)
            .ok_or_else(|| Failure::new(CceStatus::InvalidArgument, "m*k overflows"))?;
        let sigma = label_matrix(input(predictions, len, "predictions")?, m, k)?;
        let warm = label_matrix(input(warm_start, len, "warm_start")?, m, k)?;
        let out = output(y_out, len, "y_out")?;
        let cfg = EmConfig {
            max_iters,
            rel_tol,
            ..EmConfig::new(k).with_lambda(lambda)
        };
        let (y, report) = em_optimize(&sigma, &warm, &cfg)?;
        out.copy_from_slice(y.as_array().as_slice().expect("standard layout"));
        if !report_out.is_null() {
            report_out.write(c_report(&report));
        }
        Ok(())
    })
}

/// Projected gradient on the chosen objective with uniform prior. Arguments
/// as for [`cce_em_optimize`].
///
/// # Safety
/// As for [`cce_em_optimize`].
#[no_mangle]
pub unsafe extern "C" fn cce_pgd_optimize(
    predictions: *const f64,
    warm_start: *const f64,
    m: usize,
    k: usize,
    variant: CceLossVariant,
    lambda: f64,
    step_size: f64,
    max_iters: usize,
    rel_tol: f64,
    y_out: *mut f64,
    report_out: *mut CceSolverReport,
) -> CceStatus {
    guard(|| {
        let len = m
            .checked_mul(k)
            .ok_or_else(|| Failure::new(CceStatus::InvalidArgument, "m*k overflows"))?;
        let sigma = label_matrix(input(predictions, len, "predictions")?, m, k)?;
        let warm = label_matrix(input(warm_start, len, "warm_start")?, m, k)?;
        let out = output(y_out, len, "y_out")?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Failure::new(
                CceStatus::InvalidArgument,
                format!("lambda must be >= 0, got {lambda}"),
            ));
        }
        let variant = match variant {
            CceLossVariant::Cce => LossVariant::Cce,
            CceLossVariant::CcePlus => LossVariant::CcePlus,
            CceLossVariant::ShannonKl => LossVariant::ShannonKl,
        };
        let cfg = PgdConfig {
            max_iters,
            rel_tol,
            ..PgdConfig::new(variant, Fairness::uniform(k, lambda), step_size)
        };
        let (y, report) = pgd_optimize(&sigma, &warm, &cfg)?;
        out.copy_from_slice(y.as_array().as_slice().expect("standard layout"));
        if !report_out.is_null() {
            report_out.write(c_report(&report));
        }
        Ok(())
    })
}

// ---- model ----------------------------------------------------------------

/// New `k`-class model on `n` features with seeded random weights.
///
/// # Safety
/// `out` must point to a writable `CceModel*`.
#[no_mangle]
pub unsafe extern "C" fn cce_model_new(
    k: usize,
    n: usize,
    seed: u64,
    out: *mut *mut CceModel,
) -> CceStatus {
    guard(|| {
        if k == 0 || n == 0 {
            return Err(Failure::new(
                CceStatus::InvalidArgument,
                "k and n must be positive",
            ));
        }
        let handle = Box::into_raw(Box::new(CceModel(LinearModel::init(k, n, seed))));
        write(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Loads a checkpoint written by [`cce_model_save`] or the `cce` tool.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable `CceModel*`.
#[no_mangle]
pub unsafe extern "C" fn cce_model_load(path: *const c_char, out: *mut *mut CceModel) -> CceStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(Failure::new(CceStatus::NullPointer, "out is NULL"));
        }
        let model = LinearModel::load(path)?;
        out.write(Box::into_raw(Box::new(CceModel(model))));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cce_model_save(model: *const CceModel, path: *const c_char) -> CceStatus {
    guard(|| {
        let model = model
            .as_ref()
            .ok_or_else(|| Failure::new(CceStatus::NullPointer, "model is NULL"))?;
        model.0.save(path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cce_model_free(model: *mut CceModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `k_out` and `n_out` writable.
#[no_mangle]
pub unsafe extern "C" fn cce_model_dims(
    model: *const CceModel,
    k_out: *mut usize,
    n_out: *mut usize,
) -> CceStatus {
    guard(|| {
        let model = model
            .as_ref()
            .ok_or_else(|| Failure::new(CceStatus::NullPointer, "model is NULL"))?;
        write(k_out, model.0.k(), "k_out")?;
        write(n_out, model.0.n(), "n_out")
    })
}

unsafe fn features<'a>(
    model: &CceModel,
    x: *const f64,
    m: usize,
    n: usize,
) -> Result<ArrayView2<'a, f64>, Failure> {
    if n != model.0.n() {
        return Err(Failure::new(
            CceStatus::ShapeMismatch,
            format!("model expects {} features, got {n}", model.0.n()),
        ));
    }
    let len = m
        .checked_mul(n)
        .ok_or_else(|| Failure::new(CceStatus::InvalidArgument, "m*n overflows"))?;
    let data = input(x, len, "x")?;
    ArrayView2::from_shape((m, n), data)
        .map_err(|e| Failure::new(CceStatus::ShapeMismatch, e.to_string()))
}

/// Class probabilities for `m` rows of `n` features into `proba_out`
/// (`m × k`).
///
/// # Safety
/// `x` must point to `m·n` doubles and `proba_out` to `m·k` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cce_model_predict_proba(
    model: *const CceModel,
    x: *const f64,
    m: usize,
    n: usize,
    proba_out: *mut f64,
) -> CceStatus {
    guard(|| {
        let model = model
            .as_ref()
            .ok_or_else(|| Failure::new(CceStatus::NullPointer, "model is NULL"))?;
        let x = features(model, x, m, n)?;
        let out = output(proba_out, m * model.0.k(), "proba_out")?;
        let p = model.0.forward(x)?;
        out.copy_from_slice(p.as_array().as_slice().expect("standard layout"));
        Ok(())
    })
}

/// Most probable class per row into `labels_out` (`m` entries).
///
/// # Safety
/// `x` must point to `m·n` doubles and `labels_out` to `m` writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn cce_model_predict(
    model: *const CceModel,
    x: *const f64,
    m: usize,
    n: usize,
    labels_out: *mut usize,
) -> CceStatus {
    guard(|| {
        let model = model
            .as_ref()
            .ok_or_else(|| Failure::new(CceStatus::NullPointer, "model is NULL"))?;
        let x = features(model, x, m, n)?;
        let out = output(labels_out, m, "labels_out")?;
        out.copy_from_slice(&model.0.predict(x)?);
        Ok(())
    })
}

// ---- metrics --------------------------------------------------------------

/// Accuracy after the optimal one-to-one matching of clusters to classes.
///
/// # Safety
/// `pred` and `truth` must point to `m` readable `size_t`; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cce_clustering_accuracy(
    pred: *const usize,
    truth: *const usize,
    m: usize,
    out: *mut f64,
) -> CceStatus {
    guard(|| {
        let v = clustering_accuracy(input(pred, m, "pred")?, input(truth, m, "truth")?)?;
        write(out, v, "out")
    })
}

/// Normalized mutual information. `degenerate_out` (may be NULL) is set to 1
/// when either labeling has a single block.
///
/// # Safety
/// As for [`cce_clustering_accuracy`].
#[no_mangle]
pub unsafe extern "C" fn cce_nmi(
    pred: *const usize,
    truth: *const usize,
    m: usize,
    out: *mut f64,
    degenerate_out: *mut i32,
) -> CceStatus {
    guard(|| {
        let s = nmi(input(pred, m, "pred")?, input(truth, m, "truth")?)?;
        write(out, s.value, "out")?;
        if !degenerate_out.is_null() {
            degenerate_out.write(i32::from(s.degenerate));
        }
        Ok(())
    })
}

/// Adjusted Rand index, with the same conventions as [`cce_nmi`].
///
/// # Safety
/// As for [`cce_clustering_accuracy`].
#[no_mangle]
pub unsafe extern "C" fn cce_ari(
    pred: *const usize,
    truth: *const usize,
    m: usize,
    out: *mut f64,
    degenerate_out: *mut i32,
) -> CceStatus {
    guard(|| {
        let s = ari(input(pred, m, "pred")?, input(truth, m, "truth")?)?;
        write(out, s.value, "out")?;
        if !degenerate_out.is_null() {
            degenerate_out.write(i32::from(s.degenerate));
        }
        Ok(())
    })
}
