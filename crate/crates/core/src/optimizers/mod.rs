//! The optimizer family: GD, Adam, AdamW, Muon, SAV, RSAV and SpecMuon, all
//! stepping lists of named matrix blocks through one [`Optimizer`] interface.
//!
//! Each algorithm is also exposed as a free function acting on explicit state
//! (`sav_step`, `specmuon_theory_step`, ...) so the update rules can be tested
//! in isolation from the stepping loop.

mod baselines;
mod muon;
mod sav;
mod specmuon;

pub use baselines::{adam_step, adamw_step, gd_step, Adam, AdamConfig, AdamState, Gd};
pub use muon::{muon_direction, muon_step, Muon};
pub use sav::{rsav_step, rsav_xi, sav_step, Rsav, Sav, SavScalarState, ScalarUpdate, XiSolution};
pub use specmuon::{
    specmuon_practical_step, specmuon_theory_step, ModeDiagnostics, ModeState, MomentumBuffer, PredictorPower,
    SpecMuon, SpecMuonConfig, SpecMuonMode,
};

use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0}: non-finite values")]
    NonFinite(String),
    #[error("energy domain: loss {loss} + kappa {kappa} must be positive")]
    EnergyDomain { loss: f64, kappa: f64 },
    #[error("loss {0} is negative; practical mode needs a non-negative loss")]
    NegativeLoss(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("block {name}: value {value:?} and gradient {grad:?} shapes differ")]
    ShapeMismatch {
        name: String,
        value: (usize, usize),
        grad: (usize, usize),
    },
    #[error("loss evaluation failed: {0}")]
    Evaluation(String),
}

/// One named matrix parameter `W` with its current gradient `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, value: Matrix, grad: Matrix) -> Result<Self, OptimError> {
        let block = Self {
            name: name.into(),
            value,
            grad,
        };
        block.validate()?;
        Ok(block)
    }

    /// Block with a zero gradient.
    pub fn with_value(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.value.shape() != self.grad.shape() {
            return Err(OptimError::ShapeMismatch {
                name: self.name.clone(),
                value: self.value.shape(),
                grad: self.grad.shape(),
            });
        }
        if !self.grad.is_finite() {
            return Err(OptimError::NonFinite(format!("gradient of {}", self.name)));
        }
        if !self.value.is_finite() {
            return Err(OptimError::NonFinite(format!("value of {}", self.name)));
        }
        Ok(())
    }

    pub(crate) fn check_value_finite(&self) -> Result<(), OptimError> {
        if self.value.is_finite() {
            Ok(())
        } else {
            Err(OptimError::NonFinite(format!("updated value of {}", self.name)))
        }
    }
}

/// Evaluates the training loss at the blocks' current values.
pub trait LossEvaluator {
    fn loss(&mut self, blocks: &[ParamBlock]) -> Result<f64, OptimError>;
}

impl<F> LossEvaluator for F
where
    F: FnMut(&[ParamBlock]) -> Result<f64, OptimError>,
{
    fn loss(&mut self, blocks: &[ParamBlock]) -> Result<f64, OptimError> {
        self(blocks)
    }
}

/// Evaluator for optimizers that never look at `f(Θ^{k+1})`.
pub struct NoEvaluator;

impl LossEvaluator for NoEvaluator {
    fn loss(&mut self, _: &[ParamBlock]) -> Result<f64, OptimError> {
        Err(OptimError::Evaluation("no loss evaluator supplied".into()))
    }
}

/// Auxiliary-variable bookkeeping of one block for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUpdate {
    pub block: usize,
    pub prev: ModeState,
    pub next: ModeState,
    /// Per-mode dissipation `D_i = ⟨ΔW, Q_i⟩²_F / h_i`; zero for skipped
    /// modes. Empty in practical mode, where no dissipation law applies.
    pub d_terms: Vec<f64>,
    pub r_tilde: Vec<f64>,
    /// Relaxation weights of the modes that were updated.
    pub xi: Vec<f64>,
    pub diagnostics: Vec<ModeDiagnostics>,
    /// Every singular value was below the absolute floor; nothing moved.
    pub stalled: bool,
    /// Number of relaxations whose `ξ` failed the substitution check.
    pub infeasible: usize,
}

/// What an optimizer step did, in the quantities the theorem ledger needs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    /// Per-block mode updates (SpecMuon).
    pub modes: Vec<ModeUpdate>,
    /// Scalar auxiliary update (SAV, RSAV).
    pub scalar: Option<ScalarUpdate>,
    /// Dissipation tolerance ψ of the law this step claims; `None` when the
    /// optimizer claims none.
    pub psi: Option<f64>,
    /// `‖Θ^{k+1} − Θ^k‖_F` over all blocks.
    pub step_fro: f64,
    /// `f(Θ^{k+1})` when the optimizer evaluated it.
    pub loss_after: Option<f64>,
}

impl StepReport {
    /// Modified energy before and after the step (`Σ r_i²` or `r²`).
    pub fn modified_energy(&self) -> Option<(f64, f64)> {
        if let Some(s) = &self.scalar {
            return Some((s.r_prev * s.r_prev, s.r_next * s.r_next));
        }
        if self.modes.is_empty() {
            return None;
        }
        let before = self.modes.iter().map(|m| m.prev.energy()).sum();
        let after = self.modes.iter().map(|m| m.next.energy()).sum();
        Some((before, after))
    }

    pub fn total_dissipation(&self) -> Option<f64> {
        if let Some(s) = &self.scalar {
            return Some(s.dissipation);
        }
        if self.modes.is_empty() || self.modes.iter().all(|m| m.d_terms.is_empty()) {
            return None;
        }
        Some(self.modes.iter().flat_map(|m| m.d_terms.iter()).sum())
    }

    pub fn min_r(&self) -> Option<f64> {
        if let Some(s) = &self.scalar {
            return Some(s.r_next);
        }
        self.modes
            .iter()
            .flat_map(|m| m.next.values().iter().copied())
            .reduce(f64::min)
    }

    pub fn xi_values(&self) -> Vec<f64> {
        if let Some(s) = &self.scalar {
            return s.xi.into_iter().collect();
        }
        self.modes.iter().flat_map(|m| m.xi.iter().copied()).collect()
    }
}

/// Shared stepping interface. `loss` is `f(Θ^k)` at the blocks' current values
/// and gradients; `eval` computes `f` at updated values for the optimizers that
/// relax against the new energy.
pub trait Optimizer {
    fn name(&self) -> &str;

    fn step(
        &mut self,
        blocks: &mut [ParamBlock],
        loss: f64,
        eval: &mut dyn LossEvaluator,
    ) -> Result<StepReport, OptimError>;

    /// Loss evaluations per iteration, counting the gradient evaluation.
    fn evals_per_step(&self) -> usize {
        1
    }
}

pub(crate) fn validate_blocks(blocks: &[ParamBlock]) -> Result<(), OptimError> {
    blocks.iter().try_for_each(ParamBlock::validate)
}

pub(crate) fn snapshot(blocks: &[ParamBlock]) -> Vec<Matrix> {
    blocks.iter().map(|b| b.value.clone()).collect()
}

pub(crate) fn step_norm(before: &[Matrix], blocks: &[ParamBlock]) -> f64 {
    before
        .iter()
        .zip(blocks)
        .map(|(old, b)| {
            old.as_slice()
                .iter()
                .zip(b.value.as_slice())
                .map(|(x, y)| (y - x) * (y - x))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}
