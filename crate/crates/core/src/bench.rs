//! EM versus projected gradient on random label problems.
//!
//! For every K a batch of predictions (softmax of `N(0, 1)` logits) and a
//! strictly positive warm start are drawn from the bench stream of the seed.
//! EM and PGD on every step size then minimize the same objective,
//! collision CE with `KL(u ‖ ȳ)`, from that warm start.
//!
//! Timing uses the monotonic clock. Each configuration first runs a short
//! warm-up (at most five iterations, discarded), then `repetitions` full runs;
//! the reported time is the median. Iteration counts and objectives are
//! deterministic and taken from the first full run.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::em::{em_optimize, EmConfig};
use crate::error::{Error, Result};
use crate::loss::{Fairness, LossVariant};
use crate::pgd::{pgd_optimize, PgdConfig, DIVERGENCE_PATIENCE};
use crate::report::{SolverReport, SolverStatus};
use crate::sampling::{random_label_matrix, random_predictions, rng, stream};
use crate::simplex::LabelMatrix;

const WARMUP_ITERS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub ks: Vec<usize>,
    pub m: usize,
    pub lambda: f64,
    pub etas: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub parallel: bool,
    pub em_max_iters: usize,
    pub pgd_max_iters: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            ks: vec![2, 20, 200],
            m: 10_000,
            lambda: 100.0,
            etas: vec![0.001, 0.01, 0.1, 1.0],
            repetitions: 3,
            seed: 0,
            parallel: false,
            em_max_iters: 100,
            pgd_max_iters: 2000,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.ks.is_empty() || self.ks.iter().any(|&k| k < 2) {
            return bad(format!("every K must be at least 2, got {:?}", self.ks));
        }
        if self.m == 0 || self.repetitions == 0 || self.em_max_iters == 0 || self.pgd_max_iters == 0
        {
            return bad("m, repetitions and iteration caps must be positive".into());
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.etas.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return bad(format!("step sizes must be positive, got {:?}", self.etas));
        }
        Ok(())
    }

    /// Convergence and timing definitions, one per line.
    pub fn header(&self) -> Vec<String> {
        vec![
            "objective: mean collision cross-entropy + lambda * KL(u || mean label), u uniform".into(),
            format!(
                "em converged: max entry change of a full sweep <= 1e-6 (cap {} sweeps); a sweep is one E-step plus M independent M-steps and its time includes both",
                self.em_max_iters
            ),
            format!(
                "pgd converged: max entry change of an iteration <= 1e-8 (cap {} iterations); update y_i <- proj(y_i - eta * M * dL/dy_i); diverged: objective above its running minimum for {} consecutive iterations",
                self.pgd_max_iters, DIVERGENCE_PATIENCE
            ),
            format!(
                "m={} lambda={} seed={} repetitions={} parallel={} timing=median of repetitions after a discarded warm-up",
                self.m, self.lambda, self.seed, self.repetitions, self.parallel
            ),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: String,
    pub k: usize,
    pub m: usize,
    pub eta: Option<f64>,
    pub sec_per_iter: f64,
    pub iters: usize,
    pub total_sec: f64,
    pub final_objective: f64,
    pub status: SolverStatus,
    /// PGD objective minus EM objective on the same instance.
    pub gap_to_em: Option<f64>,
    pub parallel: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResults {
    pub spec: BenchSpec,
    pub rows: Vec<BenchRow>,
}

/// Predictions and warm start for one K.
pub fn bench_instance(k: usize, m: usize, seed: u64) -> (LabelMatrix, LabelMatrix) {
    let mut r = rng(seed.wrapping_add(k as u64), stream::BENCH);
    let sigma = LabelMatrix::from_array_unchecked(random_predictions(m, k, 1.0, &mut r));
    let warm = random_label_matrix(m, k, &mut r);
    (sigma, warm)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn timed<F>(repetitions: usize, mut run: F) -> Result<(SolverReport, f64)>
where
    F: FnMut(bool) -> Result<SolverReport>,
{
    run(true)?;
    let first = run(false)?;
    let mut times = vec![first.wall_seconds];
    for _ in 1..repetitions {
        times.push(run(false)?.wall_seconds);
    }
    Ok((first, median(times)))
}

fn row(
    solver: &str,
    k: usize,
    spec: &BenchSpec,
    eta: Option<f64>,
    report: &SolverReport,
    total: f64,
) -> BenchRow {
    BenchRow {
        solver: solver.into(),
        k,
        m: spec.m,
        eta,
        sec_per_iter: if report.iterations == 0 {
            0.0
        } else {
            total / report.iterations as f64
        },
        iters: report.iterations,
        total_sec: total,
        final_objective: report.objective,
        status: report.status,
        gap_to_em: None,
        parallel: spec.parallel,
    }
}

pub fn run_bench(spec: &BenchSpec) -> Result<BenchResults> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &k in &spec.ks {
        let (sigma, warm) = bench_instance(k, spec.m, spec.seed);
        let fairness = Fairness::uniform(k, spec.lambda);

        let em_cfg = EmConfig {
            max_iters: spec.em_max_iters,
            parallel: spec.parallel,
            ..EmConfig::new(k).with_lambda(spec.lambda)
        };
        let (em, em_time) = timed(spec.repetitions, |warmup| {
            let cfg = if warmup {
                EmConfig {
                    max_iters: WARMUP_ITERS.min(spec.em_max_iters),
                    ..em_cfg.clone()
                }
            } else {
                em_cfg.clone()
            };
            em_optimize(&sigma, &warm, &cfg).map(|(_, r)| r)
        })?;
        rows.push(row("em", k, spec, None, &em, em_time));

        for &eta in &spec.etas {
            let cfg = PgdConfig {
                max_iters: spec.pgd_max_iters,
                parallel: spec.parallel,
                ..PgdConfig::new(LossVariant::CcePlus, fairness.clone(), eta)
            };
            let (pgd, pgd_time) = timed(spec.repetitions, |warmup| {
                let cfg = if warmup {
                    PgdConfig {
                        max_iters: WARMUP_ITERS.min(spec.pgd_max_iters),
                        ..cfg.clone()
                    }
                } else {
                    cfg.clone()
                };
                pgd_optimize(&sigma, &warm, &cfg).map(|(_, r)| r)
            })?;
            let mut r = row("pgd", k, spec, Some(eta), &pgd, pgd_time);
            r.gap_to_em = Some(pgd.objective - em.objective);
            rows.push(r);
        }
    }
    Ok(BenchResults {
        spec: spec.clone(),
        rows,
    })
}

impl BenchResults {
    /// EM row and PGD rows for `k`.
    pub fn for_k(&self, k: usize) -> (Option<&BenchRow>, Vec<&BenchRow>) {
        let em = self.rows.iter().find(|r| r.k == k && r.solver == "em");
        let pgd = self
            .rows
            .iter()
            .filter(|r| r.k == k && r.solver == "pgd")
            .collect();
        (em, pgd)
    }

    /// CSV preceded by `#`-prefixed header lines.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        for line in self.spec.header() {
            writeln!(file, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(file);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRow>> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)?;
        Ok(r.deserialize()
            .collect::<std::result::Result<Vec<BenchRow>, _>>()?)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for line in self.spec.header() {
            let _ = writeln!(s, "# {line}");
        }
        let _ = writeln!(
            s,
            "{:<6} {:>5} {:>8} {:>12} {:>7} {:>10} {:>16} {:>12} {:<14}",
            "solver",
            "K",
            "eta",
            "sec/iter",
            "iters",
            "total s",
            "objective",
            "gap to em",
            "status"
        );
        for r in &self.rows {
            let eta = r.eta.map(|e| format!("{e}")).unwrap_or_else(|| "-".into());
            let gap = r
                .gap_to_em
                .map(|g| format!("{g:.3e}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<6} {:>5} {:>8} {:>12.4e} {:>7} {:>10.4} {:>16.10} {:>12} {:<14}",
                r.solver,
                r.k,
                eta,
                r.sec_per_iter,
                r.iters,
                r.total_sec,
                r.final_objective,
                gap,
                format!("{:?}", r.status)
            );
        }
        s
    }
}
