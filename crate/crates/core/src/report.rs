use serde::{Deserialize, Serialize};

/// How an iterative solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    /// The stopping rule fired.
    Converged,
    /// The iteration cap was reached first.
    MaxIterations,
    /// The objective increased on too many consecutive iterations.
    Diverged,
}

impl SolverStatus {
    pub fn is_converged(self) -> bool {
        self == SolverStatus::Converged
    }
}

/// Record of one solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub wall_seconds: f64,
    /// Final value of the objective the solver minimizes.
    pub objective: f64,
    pub status: SolverStatus,
    /// Objective after each iteration; `history[0]` is the starting value.
    pub history: Vec<f64>,
    /// Mean Newton iterations per M-step (EM only; zero for PGD).
    pub mean_inner_iterations: f64,
    /// Largest entry change in the last iteration.
    pub last_step: f64,
}

impl SolverReport {
    pub fn seconds_per_iteration(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.wall_seconds / self.iterations as f64
        }
    }
}
