use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Collision cross-entropy toolkit.
///
/// Every subcommand reads optional settings from the TOML file given by
/// --config, in a table named after the subcommand (`[cluster]`,
/// `[robustness]`, `[bench]`, `[mstep_check]`) whose keys are the long flag
/// names with `-` replaced by `_`. Flags given on the command line take
/// precedence over the file.
///
/// Exit codes: 0 success, 1 runtime failure, 2 invalid flags or configuration.
#[derive(Debug, Parser)]
#[command(name = "cce", version)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Self-labeled clustering with a linear model.
    #[command(after_help = CLUSTER_OUTPUTS)]
    Cluster(ClusterArgs),
    /// Train on corrupted soft labels under collision and Shannon CE.
    #[command(after_help = ROBUSTNESS_OUTPUTS)]
    Robustness(RobustnessArgs),
    /// Time EM against projected gradient on random label problems.
    #[command(after_help = BENCH_OUTPUTS)]
    Bench(BenchArgs),
    /// Compare the Newton M-step with reference minimizers.
    #[command(name = "mstep-check", after_help = MSTEP_OUTPUTS)]
    MstepCheck(MstepCheckArgs),
    /// Evaluate entropies, cross-entropies and divergences of given vectors.
    #[command(after_help = MEASURES_OUTPUTS)]
    Measures(MeasuresArgs),
}

const CLUSTER_OUTPUTS: &str = "\
Outputs (in --out):
  metrics.jsonl  one JSON object per epoch:
                 {epoch, loss, train_acc, test_acc, em_iters_mean, wall_ms}
                 train_acc is the Hungarian-matched accuracy when labels are known, else null
  labels.csv     pseudo-label matrix of the last epoch, header y0..y{K-1}
  model.bin      linear model checkpoint (magic CCEM, u32 version, u64 K, u64 N,
                 K*N little-endian f64 weights row-major, K f64 biases)";

const ROBUSTNESS_OUTPUTS: &str = "\
Output: CSV with header eta,loss,seed,test_acc; loss is cce or sce and test_acc
is a fraction in [0, 1]. One row per (eta, loss, seed).";

const BENCH_OUTPUTS: &str = "\
Output: summary table on stdout; with --out, a CSV preceded by '#' lines stating
the convergence definitions, with columns
solver,k,m,eta,sec_per_iter,iters,total_sec,final_objective,status,gap_to_em,parallel";

const MSTEP_OUTPUTS: &str = "\
Output: one line per K with the largest objective gap, largest y error, Newton
iteration count, root residual and bracket failures, then PASS or FAIL.
Exit code 1 when any gap exceeds 1e-8 or any y error exceeds 1e-4.";

const MEASURES_OUTPUTS: &str = "\
Output: one 'name value' line per measure, in nats. Measures needing q are
skipped when --q is absent; Renyi measures need --alpha.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    /// EM on collision CE with KL(u || mean label).
    Em,
    /// Projected gradient on collision CE with KL(mean label || u).
    PgdCce,
    /// Projected gradient on Shannon CE with KL(mean label || u).
    PgdSce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossArg {
    Both,
    Cce,
    Sce,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterArgs {
    /// Feature CSV (header f0..f{N-1}, optional final `label` column).
    #[arg(long, value_name = "CSV")]
    pub features: Option<PathBuf>,
    /// Synthetic Gaussian blobs: `blobs` for 4 blobs of 250 points at radius 10
    /// in 2-D, or comma-separated overrides such as `k=5,n=3,per_class=100,separation=8`.
    #[arg(long, value_name = "SPEC")]
    pub synthetic: Option<String>,
    /// Number of clusters (default: from the synthetic spec or the label column).
    #[arg(long)]
    pub k: Option<usize>,
    /// Fairness weight (default: 100).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Epochs (default: 50).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// SGD learning rate (default: 0.1).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight decay (default: 0.01).
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Batch size (default: 250).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Pseudo-label solver (default: em).
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Projected-gradient step size for the pgd solvers (default: 0.004).
    #[arg(long)]
    pub pgd_step: Option<f64>,
    /// Projected-gradient iterations per batch (default: 1000).
    #[arg(long)]
    pub pgd_iters: Option<usize>,
    /// EM sweeps per batch (default: 100).
    #[arg(long)]
    pub em_iters: Option<usize>,
    /// Solve M-steps on all cores; results are identical (default: off).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub parallel: Option<bool>,
    /// Seed for data, initialization and batch order (default: 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessArgs {
    /// Noise levels (default: 0,0.2,0.4,0.6,0.8).
    #[arg(long, value_delimiter = ',')]
    pub eta_grid: Option<Vec<f64>>,
    /// Number of seeds; seed s uses --seed + s (default: 5).
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Losses to train (default: both).
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Base seed (default: 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epochs (default: 10).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// SGD learning rate (default: 0.1).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight decay (default: 0.01).
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Batch size (default: 250).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Training points per class (default: 1000).
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Test points per class (default: 200).
    #[arg(long)]
    pub test_per_class: Option<usize>,
    /// Output CSV path.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchArgs {
    /// Class counts (default: 2,20,200).
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Batch size M (default: 10000).
    #[arg(long)]
    pub m: Option<usize>,
    /// Fairness weight (default: 100).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Projected-gradient step sizes (default: 0.001,0.01,0.1,1).
    #[arg(long, value_delimiter = ',')]
    pub eta_grid: Option<Vec<f64>>,
    /// Timed repetitions per configuration (default: 3).
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// EM sweep cap (default: 100).
    #[arg(long)]
    pub em_max_iters: Option<usize>,
    /// Projected-gradient iteration cap (default: 2000).
    #[arg(long)]
    pub pgd_max_iters: Option<usize>,
    /// Parallel M-steps and gradients (default: off).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub parallel: Option<bool>,
    /// Seed (default: 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Results CSV path.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MstepCheckArgs {
    /// Random instances per K (default: 1000).
    #[arg(long)]
    pub instances: Option<usize>,
    /// Class counts (default: 2,5,20,200); K = 2 adds an exhaustive grid oracle.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Seed (default: 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shift the oracle solution by this amount to test the harness itself (default: 0).
    #[arg(long)]
    pub perturb_oracle: Option<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct MeasuresArgs {
    /// Distribution p, comma-separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub p: Vec<f64>,
    /// Second distribution q, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    /// Order for the Renyi entropy and divergence.
    #[arg(long)]
    pub alpha: Option<f64>,
}

/// `a.field = a.field.or(b.field)` for each listed field.
macro_rules! fill_from {
    ($a:ident, $b:ident; $($f:ident),* $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )*
    };
}

impl ClusterArgs {
    pub fn fill(&mut self, file: &ClusterArgs) {
        fill_from!(self, file; features, synthetic, k, lambda, epochs, lr, weight_decay, batch_size,
            solver, pgd_step, pgd_iters, em_iters, parallel, seed, out);
    }
}

impl RobustnessArgs {
    pub fn fill(&mut self, file: &RobustnessArgs) {
        fill_from!(self, file; eta_grid, seeds, loss, seed, epochs, lr, weight_decay, batch_size,
            per_class, test_per_class, out);
    }
}

impl BenchArgs {
    pub fn fill(&mut self, file: &BenchArgs) {
        fill_from!(self, file; k, m, lambda, eta_grid, repetitions, em_max_iters, pgd_max_iters,
            parallel, seed, out);
    }
}

impl MstepCheckArgs {
    pub fn fill(&mut self, file: &MstepCheckArgs) {
        fill_from!(self, file; instances, k, seed, perturb_oracle);
    }
}

/// Tables of the configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub cluster: ClusterArgs,
    pub robustness: RobustnessArgs,
    pub bench: BenchArgs,
    pub mstep_check: MstepCheckArgs,
}
