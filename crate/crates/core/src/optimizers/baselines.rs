use super::{snapshot, step_norm, validate_blocks, LossEvaluator, OptimError, Optimizer, ParamBlock, StepReport};
use crate::linalg::Matrix;

/// `W ← W − lr · G`
pub fn gd_step(block: &mut ParamBlock, lr: f64) -> Result<(), OptimError> {
    block.validate()?;
    block.value.axpy(-lr, &block.grad)?;
    block.check_value_finite()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient for Adam; decoupled decay for AdamW.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(OptimError::InvalidConfig(format!("adam: {self:?}")))
        }
    }
}

/// First/second moment estimates of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub t: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
        }
    }
}

fn adam_update(
    block: &mut ParamBlock,
    state: &mut AdamState,
    cfg: &AdamConfig,
    decoupled: bool,
) -> Result<(), OptimError> {
    block.validate()?;
    if state.m.shape() != block.value.shape() {
        return Err(OptimError::InvalidConfig(format!(
            "adam state shape {:?} does not match block {}",
            state.m.shape(),
            block.name
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    if decoupled && cfg.weight_decay > 0.0 {
        block.value.scale_mut(1.0 - cfg.lr * cfg.weight_decay);
    }
    let w = block.value.as_mut_slice();
    let g = block.grad.as_slice();
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for i in 0..w.len() {
        let gi = if decoupled {
            g[i]
        } else {
            g[i] + cfg.weight_decay * w[i]
        };
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        w[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    block.check_value_finite()
}

/// Bias-corrected Adam. A non-zero `weight_decay` is applied as an L2 term.
pub fn adam_step(block: &mut ParamBlock, state: &mut AdamState, cfg: &AdamConfig) -> Result<(), OptimError> {
    adam_update(block, state, cfg, false)
}

/// Adam with decoupled weight decay: `W ← (1 − lr·λ) W` before the Adam step.
pub fn adamw_step(block: &mut ParamBlock, state: &mut AdamState, cfg: &AdamConfig) -> Result<(), OptimError> {
    adam_update(block, state, cfg, true)
}

#[derive(Debug, Clone)]
pub struct Gd {
    pub lr: f64,
}

impl Optimizer for Gd {
    fn name(&self) -> &str {
        "gd"
    }

    fn step(
        &mut self,
        blocks: &mut [ParamBlock],
        _loss: f64,
        _eval: &mut dyn LossEvaluator,
    ) -> Result<StepReport, OptimError> {
        validate_blocks(blocks)?;
        let before = snapshot(blocks);
        for b in blocks.iter_mut() {
            gd_step(b, self.lr)?;
        }
        Ok(StepReport {
            step_fro: step_norm(&before, blocks),
            ..StepReport::default()
        })
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    decoupled: bool,
    states: Vec<AdamState>,
}

impl Adam {
    #[allow(clippy::self_named_constructors)]
    pub fn adam(cfg: AdamConfig) -> Result<Self, OptimError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            decoupled: false,
            states: Vec::new(),
        })
    }

    pub fn adamw(cfg: AdamConfig) -> Result<Self, OptimError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            decoupled: true,
            states: Vec::new(),
        })
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &str {
        if self.decoupled {
            "adamw"
        } else {
            "adam"
        }
    }

    fn step(
        &mut self,
        blocks: &mut [ParamBlock],
        _loss: f64,
        _eval: &mut dyn LossEvaluator,
    ) -> Result<StepReport, OptimError> {
        validate_blocks(blocks)?;
        if self.states.is_empty() {
            self.states = blocks
                .iter()
                .map(|b| AdamState::new(b.value.rows(), b.value.cols()))
                .collect();
        }
        let before = snapshot(blocks);
        for (b, s) in blocks.iter_mut().zip(&mut self.states) {
            adam_update(b, s, &self.cfg, self.decoupled)?;
        }
        Ok(StepReport {
            step_fro: step_norm(&before, blocks),
            ..StepReport::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_block(theta: f64, grad: f64) -> ParamBlock {
        ParamBlock::new(
            "theta",
            Matrix::from_vec(1, 1, vec![theta]).unwrap(),
            Matrix::from_vec(1, 1, vec![grad]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn gd_on_half_square() {
        // f(θ) = θ²/2, ∇f = θ.
        let mut b = scalar_block(1.0, 1.0);
        gd_step(&mut b, 0.1).unwrap();
        assert!((b.value.get(0, 0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_sized_for_any_scale() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        };
        for g in [1e-4, 1.0, 1e4] {
            let mut b = scalar_block(0.0, g);
            let mut s = AdamState::new(1, 1);
            adam_step(&mut b, &mut s, &cfg).unwrap();
            let moved = -b.value.get(0, 0);
            assert!((moved - 0.01).abs() < 1e-6, "g = {g}: moved {moved}");
        }
    }

    #[test]
    fn adamw_decays_on_zero_gradient_adam_does_not() {
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.01,
            ..AdamConfig::default()
        };
        let mut a = scalar_block(2.0, 0.0);
        let mut w = scalar_block(2.0, 0.0);
        let mut sa = AdamState::new(1, 1);
        let mut sw = AdamState::new(1, 1);
        let plain = AdamConfig {
            weight_decay: 0.0,
            ..cfg
        };
        adam_step(&mut a, &mut sa, &plain).unwrap();
        adamw_step(&mut w, &mut sw, &cfg).unwrap();
        assert_eq!(a.value.get(0, 0), 2.0);
        assert!((w.value.get(0, 0) - 2.0 * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut b = scalar_block(1.0, 0.0);
        b.grad.set(0, 0, f64::INFINITY);
        assert!(matches!(gd_step(&mut b, 0.1), Err(OptimError::NonFinite(_))));
        let mut s = AdamState::new(1, 1);
        assert!(adam_step(&mut b, &mut s, &AdamConfig::default()).is_err());
    }

    #[test]
    fn invalid_betas_rejected() {
        let cfg = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(Adam::adam(cfg).is_err());
    }
}
