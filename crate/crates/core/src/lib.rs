#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod data;
pub mod em;
pub mod error;
pub mod loss;
pub mod measures;
pub mod metrics;
pub mod model;
pub mod mstep;
pub mod pgd;
pub mod pipeline;
pub mod report;
pub mod sampling;
pub mod simplex;

pub use error::{Error, Result};
pub use loss::{Fairness, LossVariant};
pub use report::{SolverReport, SolverStatus};
pub use simplex::{LabelMatrix, ProbVec, SupportMatrix};
