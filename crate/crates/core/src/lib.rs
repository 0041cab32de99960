//! Matrix-parameter optimizers built around spectral mode-wise relaxed scalar
//! auxiliary variables, with the baselines, test objectives, theorem checks
//! and experiment harness used to evaluate them.

// `!(x > 0.0)` is used on purpose so that NaN fails validation; indexed
// loops read closer to the math in the numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod harness;
pub mod linalg;
pub mod optimizers;
pub mod problems;

pub use diagnostics::{RateEstimate, TrajectoryRecord};
pub use harness::{run_experiment, HarnessError, OptimizerSpec, RunConfig, Summary};
pub use linalg::{LinalgError, Matrix};
pub use optimizers::{
    LossEvaluator, OptimError, Optimizer, ParamBlock, SpecMuon, SpecMuonConfig, SpecMuonMode, StepReport,
};
pub use problems::{Problem, ProblemConstants, ProblemError, ProblemSpec};
