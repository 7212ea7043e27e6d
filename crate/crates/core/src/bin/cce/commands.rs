use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cce_core::bench::{run_bench, BenchSpec};
use cce_core::data::{
    load_features_csv, make_gaussian_mixture, save_label_matrix, save_results, Dataset,
    JsonLinesWriter, MixtureSpec,
};
use cce_core::measures;
use cce_core::model::{ClassLoss, LinearModel, TrainConfig};
use cce_core::mstep::check::{run_check, CheckConfig};
use cce_core::pipeline::{
    robustness_experiment, self_label_train, LabelSolver, PipelineConfig, RobustnessSpec,
};
use cce_core::sampling::stream;
use cce_core::ProbVec;

use crate::args::{
    BenchArgs, Cli, ClusterArgs, Command, ConfigFile, LossArg, MeasuresArgs, MstepCheckArgs,
    RobustnessArgs, SolverArg,
};
use crate::CliError;

const GAP_TOL: f64 = 1e-8;
const Y_TOL: f64 = 1e-4;

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("--config {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| config_err(format!("--config {}: {e}", p.display())))
        }
    }
}

/// Prints `name value`, with `-0` shown as `0`.
fn show(name: &str, value: f64) {
    println!("{name} {}", value + 0.0);
}

pub fn run(cli: Cli) -> CliResult<ExitCode> {
    let file = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Cluster(mut a) => {
            a.fill(&file.cluster);
            cluster(a)
        }
        Command::Robustness(mut a) => {
            a.fill(&file.robustness);
            robustness(a)
        }
        Command::Bench(mut a) => {
            a.fill(&file.bench);
            bench(a)
        }
        Command::MstepCheck(mut a) => {
            a.fill(&file.mstep_check);
            mstep_check(a)
        }
        Command::Measures(a) => measures_cmd(a),
    }
}

fn require_positive(flag: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!(
            "--{flag} must be a positive number, got {v}"
        )))
    }
}

fn require_non_negative(flag: &str, v: f64) -> CliResult<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!(
            "--{flag} must be a non-negative number, got {v}"
        )))
    }
}

fn require_count(flag: &str, v: usize) -> CliResult<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(config_err(format!("--{flag} must be at least 1")))
    }
}

/// `blobs`, or `key=value` pairs applied on top of the blobs preset.
fn parse_synthetic(spec: &str) -> CliResult<MixtureSpec> {
    let mut m = MixtureSpec::blobs(4, 2, 250, 10.0);
    let spec = spec.trim();
    if spec == "blobs" || spec.is_empty() {
        return Ok(m);
    }
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| config_err(format!("--synthetic: expected key=value, got {part:?}")))?;
        let bad = |e: &dyn std::fmt::Display| config_err(format!("--synthetic {key}: {e}"));
        let value = value.trim();
        match key.trim() {
            "k" => m.k = value.parse().map_err(|e| bad(&e))?,
            "n" => m.n = value.parse().map_err(|e| bad(&e))?,
            "per_class" => m.per_class = value.parse().map_err(|e| bad(&e))?,
            "separation" => m.separation = value.parse().map_err(|e| bad(&e))?,
            "outlier_fraction" => m.outlier_fraction = value.parse().map_err(|e| bad(&e))?,
            "outlier_scale" => m.outlier_scale = value.parse().map_err(|e| bad(&e))?,
            other => {
                return Err(config_err(format!(
                    "--synthetic: unknown key {other:?} (expected k, n, per_class, separation, outlier_fraction, outlier_scale)"
                )))
            }
        }
    }
    Ok(m)
}

fn cluster(a: ClusterArgs) -> CliResult<ExitCode> {
    let source = match (&a.features, &a.synthetic) {
        (Some(_), Some(_)) => {
            return Err(config_err(
                "pass exactly one of --features and --synthetic, not both",
            ))
        }
        (None, None) => {
            return Err(config_err(
                "a data source is required: pass --features <csv> or --synthetic <spec>",
            ))
        }
        (Some(path), None) => Source::Features(path.clone()),
        (None, Some(spec)) => Source::Synthetic(parse_synthetic(spec)?),
    };
    let out = a
        .out
        .clone()
        .ok_or_else(|| config_err("--out <dir> is required"))?;
    let lambda = a.lambda.unwrap_or(100.0);
    require_non_negative("lambda", lambda)?;
    let epochs = a.epochs.unwrap_or(50);
    require_count("epochs", epochs)?;
    let lr = a.lr.unwrap_or(0.1);
    require_non_negative("lr", lr)?;
    let weight_decay = a.weight_decay.unwrap_or(0.01);
    require_non_negative("weight-decay", weight_decay)?;
    let batch_size = a.batch_size.unwrap_or(250);
    require_count("batch-size", batch_size)?;
    let pgd_step = a.pgd_step.unwrap_or(0.004);
    require_positive("pgd-step", pgd_step)?;
    let pgd_iters = a.pgd_iters.unwrap_or(1000);
    require_count("pgd-iters", pgd_iters)?;
    let em_iters = a.em_iters.unwrap_or(100);
    require_count("em-iters", em_iters)?;
    let seed = a.seed.unwrap_or(0);
    if matches!(a.k, Some(0 | 1)) {
        return Err(config_err("--k must be at least 2"));
    }

    let data: Dataset = match source {
        Source::Synthetic(spec) => {
            make_gaussian_mixture(&spec, seed, stream::DATA_TRAIN).map_err(CliError::from)?
        }
        Source::Features(path) => load_features_csv(&path).map_err(runtime)?,
    };
    let k = match (a.k, data.k) {
        (Some(k), _) => k,
        (None, Some(k)) => k,
        (None, None) => {
            return Err(config_err(
                "--k is required when the features have no label column (hint: pass --k <number of clusters>)",
            ))
        }
    };
    if k < 2 {
        return Err(config_err(format!("--k must be at least 2, got {k}")));
    }

    let mut cfg = PipelineConfig::new(k, lambda);
    cfg.em.max_iters = em_iters;
    cfg.em.parallel = a.parallel.unwrap_or(false);
    cfg.solver = match a.solver.unwrap_or(SolverArg::Em) {
        SolverArg::Em => LabelSolver::Em,
        SolverArg::PgdCce => LabelSolver::PgdCce {
            step_size: pgd_step,
            max_iters: pgd_iters,
        },
        SolverArg::PgdSce => LabelSolver::PgdShannonKl {
            step_size: pgd_step,
            max_iters: pgd_iters,
        },
    };
    cfg.train = TrainConfig {
        learning_rate: lr,
        weight_decay,
        batch_size,
        epochs,
        seed,
        loss: ClassLoss::Collision,
    };

    let labels = data.labels.as_deref().filter(|l| l.iter().all(|&c| c < k));
    let model = LinearModel::init(k, data.dim(), seed);
    let outcome = self_label_train(data.x.view(), labels, None, model, &cfg)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }

    std::fs::create_dir_all(&out)
        .map_err(|e| runtime(format!("creating {}: {e}", out.display())))?;
    let mut log = JsonLinesWriter::create(out.join("metrics.jsonl"))?;
    for record in &outcome.log {
        log.write(record)?;
    }
    log.finish()?;
    save_label_matrix(out.join("labels.csv"), &outcome.labels)?;
    outcome.model.save(out.join("model.bin"))?;

    if let Some(last) = outcome.log.last() {
        let acc = last
            .train_acc
            .map(|v| format!("{:.4}", v))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "epochs={} loss={:.6} train_acc={} solver_iters_mean={:.1} out={}",
            outcome.log.len(),
            last.loss,
            acc,
            last.em_iters_mean,
            out.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

enum Source {
    Features(PathBuf),
    Synthetic(MixtureSpec),
}

fn robustness(a: RobustnessArgs) -> CliResult<ExitCode> {
    let out = a
        .out
        .clone()
        .ok_or_else(|| config_err("--out <csv> is required"))?;
    let mut spec = RobustnessSpec::standard();
    if let Some(etas) = &a.eta_grid {
        if etas.is_empty() || etas.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(config_err(format!(
                "--eta-grid values must lie in [0, 1], got {etas:?}"
            )));
        }
        spec.etas = etas.clone();
    }
    let seeds = a.seeds.unwrap_or(5);
    require_count("seeds", seeds)?;
    let base = a.seed.unwrap_or(0);
    spec.seeds = (0..seeds as u64).map(|s| base + s).collect();
    spec.losses = match a.loss.unwrap_or(LossArg::Both) {
        LossArg::Both => vec![ClassLoss::Collision, ClassLoss::Shannon],
        LossArg::Cce => vec![ClassLoss::Collision],
        LossArg::Sce => vec![ClassLoss::Shannon],
    };
    if let Some(v) = a.epochs {
        require_count("epochs", v)?;
        spec.train.epochs = v;
    }
    if let Some(v) = a.lr {
        require_non_negative("lr", v)?;
        spec.train.learning_rate = v;
    }
    if let Some(v) = a.weight_decay {
        require_non_negative("weight-decay", v)?;
        spec.train.weight_decay = v;
    }
    if let Some(v) = a.batch_size {
        require_count("batch-size", v)?;
        spec.train.batch_size = v;
    }
    if let Some(v) = a.per_class {
        require_count("per-class", v)?;
        spec.mixture.per_class = v;
    }
    if let Some(v) = a.test_per_class {
        require_count("test-per-class", v)?;
        spec.test_per_class = v;
    }

    let rows = robustness_experiment(&spec)?;
    save_results(&out, &rows)?;
    println!("{:>6} {:>5} {:>10}", "eta", "loss", "mean acc");
    for &eta in &spec.etas {
        for &loss in &spec.losses {
            let tag = cce_core::pipeline::loss_tag(loss);
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| r.eta == eta && r.loss == tag)
                .map(|r| r.test_acc)
                .collect();
            println!(
                "{:>6} {:>5} {:>10.4}",
                eta,
                tag,
                accs.iter().sum::<f64>() / accs.len() as f64
            );
        }
    }
    println!("{} rows written to {}", rows.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn bench(a: BenchArgs) -> CliResult<ExitCode> {
    let d = BenchSpec::default();
    let spec = BenchSpec {
        ks: a.k.clone().unwrap_or(d.ks),
        m: a.m.unwrap_or(d.m),
        lambda: a.lambda.unwrap_or(d.lambda),
        etas: a.eta_grid.clone().unwrap_or(d.etas),
        repetitions: a.repetitions.unwrap_or(d.repetitions),
        seed: a.seed.unwrap_or(d.seed),
        parallel: a.parallel.unwrap_or(d.parallel),
        em_max_iters: a.em_max_iters.unwrap_or(d.em_max_iters),
        pgd_max_iters: a.pgd_max_iters.unwrap_or(d.pgd_max_iters),
    };
    spec.validate()
        .map_err(|e| config_err(format!("bench flags: {e}")))?;
    let results = run_bench(&spec)?;
    print!("{}", results.summary());
    if let Some(out) = &a.out {
        results.write_csv(out)?;
        println!("results written to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn mstep_check(a: MstepCheckArgs) -> CliResult<ExitCode> {
    let d = CheckConfig::default();
    let cfg = CheckConfig {
        ks: a.k.clone().unwrap_or(d.ks),
        instances: a.instances.unwrap_or(d.instances),
        seed: a.seed.unwrap_or(d.seed),
        perturb_oracle: a.perturb_oracle.unwrap_or(0.0),
    };
    require_count("instances", cfg.instances)?;
    if cfg.ks.is_empty() || cfg.ks.iter().any(|&k| k < 2) {
        return Err(config_err(format!(
            "--k values must be at least 2, got {:?}",
            cfg.ks
        )));
    }
    if !cfg.perturb_oracle.is_finite() {
        return Err(config_err("--perturb-oracle must be finite"));
    }
    let rows = run_check(&cfg)?;
    let mut ok = true;
    for r in &rows {
        let pass = r.passes(GAP_TOL, Y_TOL) && r.bracket_failures == 0;
        ok &= pass;
        println!(
            "K={:<4} instances={} max_gap={:.3e} max_y_err={:.3e} newton_iters<={} max|f|={:.3e} bracket_failures={} oracles={} time={:.2}s {}",
            r.k,
            r.instances,
            r.max_objective_gap,
            r.max_y_error,
            r.max_newton_iters,
            r.max_root_residual,
            r.bracket_failures,
            if r.grid_oracle { "pgd+grid" } else { "pgd" },
            r.seconds,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if ok {
        println!("mstep-check: PASS (gap <= {GAP_TOL:e}, y error <= {Y_TOL:e})");
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Runtime(format!(
            "mstep-check: FAIL (gap > {GAP_TOL:e} or y error > {Y_TOL:e} or bracket failure)"
        )))
    }
}

fn measures_cmd(a: MeasuresArgs) -> CliResult<ExitCode> {
    let p = ProbVec::new(a.p.clone()).map_err(|e| config_err(format!("--p: {e}")))?;
    let q = match &a.q {
        Some(q) => {
            let q = ProbVec::new(q.clone()).map_err(|e| config_err(format!("--q: {e}")))?;
            if q.len() != p.len() {
                return Err(config_err(format!(
                    "--p has {} entries but --q has {}",
                    p.len(),
                    q.len()
                )));
            }
            Some(q)
        }
        None => None,
    };
    if let Some(alpha) = a.alpha {
        if alpha <= 0.0 || alpha == 1.0 || !alpha.is_finite() {
            return Err(config_err(format!(
                "--alpha must be positive and different from 1, got {alpha}"
            )));
        }
    }
    show("shannon_entropy", measures::shannon_entropy(&p));
    show("collision_entropy", measures::collision_entropy(&p));
    if let Some(alpha) = a.alpha {
        show("renyi_entropy", measures::renyi_entropy(&p, alpha)?);
    }
    if let Some(q) = &q {
        show(
            "shannon_cross_entropy",
            measures::shannon_cross_entropy(&p, q),
        );
        show("kl_divergence", measures::kl_divergence(&p, q));
        show(
            "collision_cross_entropy",
            measures::collision_cross_entropy(&p, q),
        );
        let d = measures::cce_decomposition(&p, q);
        show("cce_angular", d.angular);
        show("cce_entropic", d.entropic);
        if let Some(alpha) = a.alpha {
            show(
                "renyi_divergence",
                measures::renyi_divergence(&p, q, alpha)?,
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
