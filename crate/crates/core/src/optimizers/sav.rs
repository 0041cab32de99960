//! Scalar auxiliary variable schemes on the whole parameter set.
//!
//! With `E(Θ) = √(f(Θ) + κ)` and step `h`, the explicit SAV step is
//!
//! ```text
//! r̃  = r / (1 + (h/2) ‖G‖²_F / E²)
//! Θ' = Θ − h (r̃ / E) G
//! ```
//!
//! and the relaxed variant re-anchors `r' = ξ r̃ + (1 − ξ) E(Θ')`, with `ξ` the
//! smallest value in `[0, 1]` for which
//! `(ξ r̃ + (1−ξ) E')² − r̃² − (r̃ − r)² ≤ ψ D`, `D = ‖Θ' − Θ‖²_F / h`.
//! Either way `r'² − r² ≤ −(1 − ψ) D` (plain SAV is the case `ψ = 0`, `ξ = 1`).

use super::{snapshot, step_norm, validate_blocks, LossEvaluator, OptimError, Optimizer, ParamBlock, StepReport};

/// Auxiliary scalar `r` with its energy shift `κ` and dissipation tolerance `ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavScalarState {
    pub r: f64,
    pub kappa: f64,
    pub psi: f64,
}

impl SavScalarState {
    /// Starts at `r = √(loss + κ)`.
    pub fn new(loss: f64, kappa: f64, psi: f64) -> Result<Self, OptimError> {
        if !(kappa > 0.0) || !(0.0..1.0).contains(&psi) {
            return Err(OptimError::InvalidConfig(format!("sav: kappa {kappa}, psi {psi}")));
        }
        Ok(Self {
            r: energy_root(loss, kappa)?,
            kappa,
            psi,
        })
    }
}

/// One scalar auxiliary transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarUpdate {
    pub r_prev: f64,
    pub r_tilde: f64,
    pub r_next: f64,
    /// `D = ‖ΔΘ‖²_F / h`
    pub dissipation: f64,
    /// `None` for plain SAV.
    pub xi: Option<f64>,
    pub feasible: bool,
}

/// Relaxation weight and whether it passed the substitution check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiSolution {
    pub xi: f64,
    pub feasible: bool,
}

pub(crate) fn energy_root(loss: f64, kappa: f64) -> Result<f64, OptimError> {
    let e2 = loss + kappa;
    if !(e2 > 0.0) || !e2.is_finite() {
        return Err(OptimError::EnergyDomain { loss, kappa });
    }
    Ok(e2.sqrt())
}

/// Smallest `ξ ∈ [0, 1]` with
/// `(ξ r̃ + (1−ξ) E)² − r̃² − (r̃ − r_prev)² ≤ ψ D`.
///
/// Written as `a ξ² + b ξ + c ≤ 0` with `a = (r̃ − E)²`, `b = 2E(r̃ − E)` and
/// `c = E² − r̃² − (r̃ − r_prev)² − ψD`. At `ξ = 1` the left side is
/// `−(r̃ − r_prev)² − ψD ≤ 0`, so a solution exists for valid inputs: `ξ = 0`
/// when `c ≤ 0`, otherwise the smaller root, evaluated as
/// `2c / (−b + √(b² − 4ac))` to avoid cancellation when `a` is tiny.
///
/// If the quadratic has no usable root (only possible for invalid inputs or
/// round-off) the result falls back to `ξ = 0` with `feasible = false`.
pub fn rsav_xi(r_tilde: f64, r_prev: f64, e_next: f64, d: f64, psi: f64) -> XiSolution {
    let gap = r_tilde - e_next;
    let a = gap * gap;
    let b = 2.0 * e_next * gap;
    let lag = r_tilde - r_prev;
    let c = e_next * e_next - r_tilde * r_tilde - lag * lag - psi * d;
    if c <= 0.0 {
        return XiSolution {
            xi: 0.0,
            feasible: true,
        };
    }
    let disc = b * b - 4.0 * a * c;
    let denom = -b + disc.max(0.0).sqrt();
    if !(denom > 0.0) {
        return XiSolution {
            xi: 0.0,
            feasible: false,
        };
    }
    let xi = (2.0 * c / denom).clamp(0.0, 1.0);
    let relaxed = xi * r_tilde + (1.0 - xi) * e_next;
    let lhs = relaxed * relaxed - r_tilde * r_tilde - lag * lag;
    let scale = e_next * e_next + r_tilde * r_tilde + r_prev * r_prev;
    XiSolution {
        xi,
        feasible: disc >= 0.0 && lhs <= psi * d + 1e-12 * scale,
    }
}

fn predictor(blocks: &mut [ParamBlock], state: &SavScalarState, loss: f64, h: f64) -> Result<(f64, f64), OptimError> {
    if !(h > 0.0) {
        return Err(OptimError::InvalidConfig(format!("sav: step {h} must be positive")));
    }
    validate_blocks(blocks)?;
    let e = energy_root(loss, state.kappa)?;
    let grad_sq: f64 = blocks
        .iter()
        .map(|b| crate::linalg::frobenius_norm(&b.grad).powi(2))
        .sum();
    let r_tilde = state.r / (1.0 + 0.5 * h * grad_sq / (e * e));
    let coeff = h * r_tilde / e;
    for b in blocks.iter_mut() {
        let g = b.grad.clone();
        b.value.axpy(-coeff, &g)?;
        b.check_value_finite()?;
    }
    Ok((r_tilde, e))
}

/// Plain SAV step; the new auxiliary is the predictor, `r' = r̃`.
pub fn sav_step(
    blocks: &mut [ParamBlock],
    state: &mut SavScalarState,
    loss: f64,
    h: f64,
) -> Result<ScalarUpdate, OptimError> {
    let before = snapshot(blocks);
    let (r_tilde, _) = predictor(blocks, state, loss, h)?;
    let step = step_norm(&before, blocks);
    let update = ScalarUpdate {
        r_prev: state.r,
        r_tilde,
        r_next: r_tilde,
        dissipation: step * step / h,
        xi: None,
        feasible: true,
    };
    state.r = r_tilde;
    Ok(update)
}

/// Relaxed SAV step; evaluates `f(Θ^{k+1})` through `eval`.
pub fn rsav_step(
    blocks: &mut [ParamBlock],
    state: &mut SavScalarState,
    loss: f64,
    eval: &mut dyn LossEvaluator,
    h: f64,
) -> Result<ScalarUpdate, OptimError> {
    let before = snapshot(blocks);
    let (r_tilde, _) = predictor(blocks, state, loss, h)?;
    let step = step_norm(&before, blocks);
    let d = step * step / h;
    let e_next = energy_root(eval.loss(blocks)?, state.kappa)?;
    let sol = rsav_xi(r_tilde, state.r, e_next, d, state.psi);
    let r_next = sol.xi * r_tilde + (1.0 - sol.xi) * e_next;
    let update = ScalarUpdate {
        r_prev: state.r,
        r_tilde,
        r_next,
        dissipation: d,
        xi: Some(sol.xi),
        feasible: sol.feasible,
    };
    state.r = r_next;
    Ok(update)
}

#[derive(Debug, Clone)]
pub struct Sav {
    pub h: f64,
    pub kappa: f64,
    state: Option<SavScalarState>,
}

impl Sav {
    pub fn new(h: f64, kappa: f64) -> Result<Self, OptimError> {
        if !(h > 0.0) || !(kappa > 0.0) {
            return Err(OptimError::InvalidConfig(format!("sav: h {h}, kappa {kappa}")));
        }
        Ok(Self { h, kappa, state: None })
    }

    pub fn state(&self) -> Option<&SavScalarState> {
        self.state.as_ref()
    }
}

impl Optimizer for Sav {
    fn name(&self) -> &str {
        "sav"
    }

    fn step(
        &mut self,
        blocks: &mut [ParamBlock],
        loss: f64,
        _eval: &mut dyn LossEvaluator,
    ) -> Result<StepReport, OptimError> {
        let state = match &mut self.state {
            Some(s) => s,
            None => self.state.insert(SavScalarState::new(loss, self.kappa, 0.0)?),
        };
        let before = snapshot(blocks);
        let update = sav_step(blocks, state, loss, self.h)?;
        Ok(StepReport {
            scalar: Some(update),
            psi: Some(0.0),
            step_fro: step_norm(&before, blocks),
            ..StepReport::default()
        })
    }
}

#[derive(Debug, Clone)]
pub struct Rsav {
    pub h: f64,
    pub kappa: f64,
    pub psi: f64,
    state: Option<SavScalarState>,
}

impl Rsav {
    pub fn new(h: f64, kappa: f64, psi: f64) -> Result<Self, OptimError> {
        if !(h > 0.0) || !(kappa > 0.0) || !(0.0..1.0).contains(&psi) {
            return Err(OptimError::InvalidConfig(format!(
                "rsav: h {h}, kappa {kappa}, psi {psi}"
            )));
        }
        Ok(Self {
            h,
            kappa,
            psi,
            state: None,
        })
    }

    pub fn state(&self) -> Option<&SavScalarState> {
        self.state.as_ref()
    }
}

impl Optimizer for Rsav {
    fn name(&self) -> &str {
        "rsav"
    }

    fn step(
        &mut self,
        blocks: &mut [ParamBlock],
        loss: f64,
        eval: &mut dyn LossEvaluator,
    ) -> Result<StepReport, OptimError> {
        let state = match &mut self.state {
            Some(s) => s,
            None => self.state.insert(SavScalarState::new(loss, self.kappa, self.psi)?),
        };
        let before = snapshot(blocks);
        let mut seen = None;
        let mut recording = |b: &[ParamBlock]| {
            let f = eval.loss(b)?;
            seen = Some(f);
            Ok(f)
        };
        let update = rsav_step(blocks, state, loss, &mut recording, self.h)?;
        Ok(StepReport {
            scalar: Some(update),
            psi: Some(self.psi),
            step_fro: step_norm(&before, blocks),
            loss_after: seen,
            ..StepReport::default()
        })
    }

    fn evals_per_step(&self) -> usize {
        2
    }
}
