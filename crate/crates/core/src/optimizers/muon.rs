use super::{snapshot, step_norm, validate_blocks, LossEvaluator, OptimError, Optimizer, ParamBlock, StepReport};
use crate::linalg::{frobenius_norm, newton_schulz_orthogonalize, Matrix};

/// Approximate polar factor `U Vᵀ` of `m`: Frobenius-normalize, then run
/// Newton–Schulz. Returns `None` for a zero matrix.
pub fn muon_direction(m: &Matrix, ns_iters: usize) -> Result<Option<Matrix>, OptimError> {
    if !m.is_finite() {
        return Err(OptimError::NonFinite("muon input".into()));
    }
    let norm = frobenius_norm(m);
    if norm == 0.0 {
        return Ok(None);
    }
    let normalized = m.map(|x| x / norm);
    Ok(Some(newton_schulz_orthogonalize(&normalized, ns_iters)?))
}

/// One momentum-free Muon step, `W ← W − lr · polar(G/‖G‖_F)`.
///
/// A zero gradient is a no-op. Returns the applied direction.
pub fn muon_step(block: &mut ParamBlock, lr: f64, ns_iters: usize) -> Result<Option<Matrix>, OptimError> {
    block.validate()?;
    let dir = muon_direction(&block.grad, ns_iters)?;
    if let Some(d) = &dir {
        block.value.axpy(-lr, d)?;
        block.check_value_finite()?;
    }
    Ok(dir)
}

/// Muon with a heavy-ball buffer `B ← μB + G` that is orthogonalized each step.
#[derive(Debug, Clone)]
pub struct Muon {
    pub lr: f64,
    pub momentum: f64,
    pub ns_iters: usize,
    buffers: Vec<Matrix>,
}

impl Muon {
    pub fn new(lr: f64, momentum: f64, ns_iters: usize) -> Result<Self, OptimError> {
        if !(lr > 0.0) || !(0.0..1.0).contains(&momentum) {
            return Err(OptimError::InvalidConfig(format!("muon: lr {lr}, momentum {momentum}")));
        }
        Ok(Self {
            lr,
            momentum,
            ns_iters,
            buffers: Vec::new(),
        })
    }
}

impl Optimizer for Muon {
    fn name(&self) -> &str {
        "muon"
    }

    fn step(
        &mut self,
        blocks: &mut [ParamBlock],
        _loss: f64,
        _eval: &mut dyn LossEvaluator,
    ) -> Result<StepReport, OptimError> {
        validate_blocks(blocks)?;
        if self.buffers.is_empty() {
            self.buffers = blocks
                .iter()
                .map(|b| Matrix::zeros(b.value.rows(), b.value.cols()))
                .collect();
        }
        let before = snapshot(blocks);
        for (b, buf) in blocks.iter_mut().zip(&mut self.buffers) {
            buf.scale_mut(self.momentum);
            buf.axpy(1.0, &b.grad)?;
            if let Some(d) = muon_direction(buf, self.ns_iters)? {
                b.value.axpy(-self.lr, &d)?;
                b.check_value_finite()?;
            }
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
    use crate::linalg::{thin_svd, DEFAULT_NS_ITERS};

    #[test]
    fn scaled_identity_gradient_moves_by_lr() {
        for c in [0.01, 1.0, 250.0] {
            let mut b = ParamBlock::new("w", Matrix::zeros(2, 2), Matrix::identity(2).scale(c)).unwrap();
            let dir = muon_step(&mut b, 0.1, DEFAULT_NS_ITERS).unwrap().unwrap();
            // I/‖I‖_F = I/√2 has σ = 0.707; five iterations bring it within 1e-3 of 1.
            assert!(dir.max_abs_diff(&Matrix::identity(2)).unwrap() < 1e-3);
            assert!((b.value.get(0, 0) + 0.1).abs() < 1e-4);
            assert!(b.value.get(0, 1).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut b = ParamBlock::with_value("w", Matrix::identity(2));
        assert!(muon_step(&mut b, 0.1, 5).unwrap().is_none());
        assert_eq!(b.value, Matrix::identity(2));
    }

    #[test]
    fn rank_one_gradient_gives_rank_one_direction() {
        let u = [1.0 / 3f64.sqrt(); 3];
        let v = [0.6, 0.8, 0.0];
        let g = Matrix::from_fn(3, 3, |i, j| 5.0 * u[i] * v[j]);
        let mut b = ParamBlock::new("w", Matrix::zeros(3, 3), g).unwrap();
        let dir = muon_step(&mut b, 1.0, 5).unwrap().unwrap();
        let f = thin_svd(&dir, 3).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.sigma()[0] - 1.0).abs() < 1e-12);
    }
}
