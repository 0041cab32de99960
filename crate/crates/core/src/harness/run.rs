use std::time::Instant;

use serde::Serialize;

use super::{HarnessError, OptimizerSpec};
use crate::diagnostics::TrajectoryRecord;
use crate::linalg::{frobenius_norm, Matrix};
use crate::optimizers::{OptimError, ParamBlock};
use crate::problems::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub threshold: f64,
    pub wall_clock: bool,
    /// Stop as soon as the threshold is reached (grid searches).
    pub stop_at_threshold: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            threshold: 1e-6,
            wall_clock: false,
            stop_at_threshold: false,
        }
    }
}

/// Counts of theorem checks over one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct TheoremTally {
    pub dissipation_checked: usize,
    pub dissipation_failed: usize,
    pub positivity_checked: usize,
    pub positivity_failed: usize,
    pub descent_checked: usize,
    pub descent_failed: usize,
    pub infeasible_xi: usize,
}

impl TheoremTally {
    pub fn from_records(records: &[TrajectoryRecord]) -> Self {
        let mut t = Self::default();
        for r in records {
            if let Some(ok) = r.dissipation_ok {
                t.dissipation_checked += 1;
                t.dissipation_failed += usize::from(!ok);
            }
            if let Some(ok) = r.positivity_ok {
                t.positivity_checked += 1;
                t.positivity_failed += usize::from(!ok);
            }
            if let Some(ok) = r.descent_ok() {
                t.descent_checked += 1;
                t.descent_failed += usize::from(!ok);
            }
            t.infeasible_xi += r.infeasible_xi;
        }
        t
    }

    pub fn merge(&mut self, other: &Self) {
        self.dissipation_checked += other.dissipation_checked;
        self.dissipation_failed += other.dissipation_failed;
        self.positivity_checked += other.positivity_checked;
        self.positivity_failed += other.positivity_failed;
        self.descent_checked += other.descent_checked;
        self.descent_failed += other.descent_failed;
        self.infeasible_xi += other.infeasible_xi;
    }

    pub fn failures(&self) -> usize {
        self.dissipation_failed + self.positivity_failed + self.descent_failed
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: String,
    pub seed: u64,
    pub records: Vec<TrajectoryRecord>,
    pub final_params: Vec<Matrix>,
    /// Loss at the last parameters reached.
    pub final_loss: f64,
    pub initial_loss: f64,
    /// First iterate index meeting the threshold.
    pub iterations_to_threshold: Option<usize>,
    /// Why the run stopped early, if it blew up.
    pub diverged: Option<String>,
    pub tally: TheoremTally,
}

fn reached(loss: f64, f0: f64, f_star: Option<f64>, threshold: f64) -> bool {
    match f_star {
        Some(fs) => loss - fs <= threshold * (f0 - fs),
        None => loss <= threshold * f0,
    }
}

fn values(blocks: &[ParamBlock]) -> Vec<Matrix> {
    blocks.iter().map(|b| b.value.clone()).collect()
}

/// Runs one optimizer from the problem's seeded starting point for at most
/// `iterations` steps.
pub fn run_single(
    problem: &dyn Problem,
    spec: &OptimizerSpec,
    seed: u64,
    iterations: usize,
    opts: &RunOptions,
) -> Result<RunResult, HarnessError> {
    let mut optimizer = spec.build()?;
    let constants = problem.constants();
    let mut blocks: Vec<ParamBlock> = problem
        .param_names()
        .into_iter()
        .zip(problem.init_params(seed))
        .map(|(name, value)| ParamBlock::with_value(name, value))
        .collect();
    let mut records = Vec::with_capacity(iterations);
    let mut f0 = None;
    let mut hit = None;
    let mut diverged = None;
    let mut stopped = false;
    for k in 0..iterations {
        let (loss, grads) = problem.loss_grad(&values(&blocks))?;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            diverged = Some(format!("non-finite loss or gradient at iteration {k}"));
            break;
        }
        let f0v = *f0.get_or_insert(loss);
        if hit.is_none() && reached(loss, f0v, constants.f_star, opts.threshold) {
            hit = Some(k);
            if opts.stop_at_threshold {
                stopped = true;
                break;
            }
        }
        let grad_fro = grads.iter().map(|g| frobenius_norm(g).powi(2)).sum::<f64>().sqrt();
        for (b, g) in blocks.iter_mut().zip(grads) {
            b.grad = g;
        }
        let mut eval = |b: &[ParamBlock]| {
            problem
                .loss(&values(b))
                .map_err(|e| OptimError::Evaluation(e.to_string()))
        };
        let start = opts.wall_clock.then(Instant::now);
        let report = match optimizer.step(&mut blocks, loss, &mut eval) {
            Ok(r) => r,
            Err(e @ (OptimError::InvalidConfig(_) | OptimError::ShapeMismatch { .. })) => return Err(e.into()),
            Err(e) => {
                diverged = Some(format!("iteration {k}: {e}"));
                break;
            }
        };
        let wall_ns = start.map_or(0, |s| s.elapsed().as_nanos() as u64);
        records.push(TrajectoryRecord::from_step(
            k, loss, grad_fro, &report, spec.lr, &constants, wall_ns,
        ));
    }
    let final_params = values(&blocks);
    let final_loss = if diverged.is_some() {
        f64::NAN
    } else {
        problem.loss(&final_params)?
    };
    let initial_loss = match f0 {
        Some(f) => f,
        None => problem.loss(&problem.init_params(seed))?,
    };
    if hit.is_none()
        && !stopped
        && diverged.is_none()
        && reached(final_loss, initial_loss, constants.f_star, opts.threshold)
    {
        hit = Some(records.len());
    }
    let tally = TheoremTally::from_records(&records);
    Ok(RunResult {
        label: spec.label().to_string(),
        seed,
        records,
        final_params,
        final_loss,
        initial_loss,
        iterations_to_threshold: hit,
        diverged,
        tally,
    })
}
