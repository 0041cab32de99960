use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{gaussian_matrix, Problem, ProblemConstants, ProblemError};
use crate::linalg::Matrix;

/// One-hidden-layer tanh network `ŷ(x) = W₂ tanh(W₁ x)` fitted to
/// `u(x) = −sin(πx)` by mean squared error on fixed collocation points.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMlpRegression {
    hidden: usize,
    points: Vec<f64>,
    targets: Vec<f64>,
}

impl SmallMlpRegression {
    /// `points` evenly spaced collocation points on `[−1, 1]`.
    pub fn new(hidden: usize, points: usize) -> Result<Self, ProblemError> {
        if points < 2 {
            return Err(ProblemError::InvalidSpec(format!(
                "need at least 2 points, got {points}"
            )));
        }
        let xs = (0..points)
            .map(|j| -1.0 + 2.0 * j as f64 / (points - 1) as f64)
            .collect();
        Self::with_points(hidden, xs)
    }

    pub fn with_points(hidden: usize, points: Vec<f64>) -> Result<Self, ProblemError> {
        if hidden == 0 || points.is_empty() {
            return Err(ProblemError::InvalidSpec(format!(
                "mlp needs hidden > 0 and points, got {hidden} and {}",
                points.len()
            )));
        }
        let targets = points.iter().map(|x| -(std::f64::consts::PI * x).sin()).collect();
        Ok(Self {
            hidden,
            points,
            targets,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    fn forward(&self, w1: &Matrix, w2: &Matrix, x: f64, act: &mut [f64]) -> f64 {
        let mut out = 0.0;
        for (h, a) in act.iter_mut().enumerate() {
            *a = (w1.get(h, 0) * x).tanh();
            out += w2.get(0, h) * *a;
        }
        out
    }
}

impl Problem for SmallMlpRegression {
    fn name(&self) -> &str {
        "mlp"
    }

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        vec![(self.hidden, 1), (1, self.hidden)]
    }

    fn param_names(&self) -> Vec<String> {
        vec!["w1".into(), "w2".into()]
    }

    fn loss(&self, params: &[Matrix]) -> Result<f64, ProblemError> {
        self.check_shapes(params)?;
        let mut act = vec![0.0; self.hidden];
        let sse: f64 = self
            .points
            .iter()
            .zip(&self.targets)
            .map(|(&x, &t)| {
                let e = self.forward(&params[0], &params[1], x, &mut act) - t;
                e * e
            })
            .sum();
        Ok(sse / self.points.len() as f64)
    }

    fn loss_grad(&self, params: &[Matrix]) -> Result<(f64, Vec<Matrix>), ProblemError> {
        self.check_shapes(params)?;
        let (w1, w2) = (&params[0], &params[1]);
        let m = self.points.len() as f64;
        let mut act = vec![0.0; self.hidden];
        let mut g1 = Matrix::zeros(self.hidden, 1);
        let mut g2 = Matrix::zeros(1, self.hidden);
        let mut sse = 0.0;
        for (&x, &t) in self.points.iter().zip(&self.targets) {
            let err = self.forward(w1, w2, x, &mut act) - t;
            sse += err * err;
            let e = 2.0 * err / m;
            for (h, &a) in act.iter().enumerate() {
                g2.set(0, h, g2.get(0, h) + e * a);
                g1.set(h, 0, g1.get(h, 0) + e * w2.get(0, h) * (1.0 - a * a) * x);
            }
        }
        Ok((sse / m, vec![g1, g2]))
    }

    fn constants(&self) -> ProblemConstants {
        ProblemConstants::default()
    }

    /// `W₁ ~ N(0, 1)`, `W₂ ~ N(0, 1/H)`.
    fn init_params(&self, seed: u64) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = gaussian_matrix(&mut rng, self.hidden, 1);
        let w2 = gaussian_matrix(&mut rng, 1, self.hidden).scale(1.0 / (self.hidden as f64).sqrt());
        vec![w1, w2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dead_output_layer() {
        let p = SmallMlpRegression::new(4, 16).unwrap();
        let w1 = Matrix::from_fn(4, 1, |i, _| 0.3 * i as f64 - 0.4);
        let (f, g) = p.loss_grad(&[w1.clone(), Matrix::zeros(1, 4)]).unwrap();
        let mean_sq = p.targets().iter().map(|t| t * t).sum::<f64>() / 16.0;
        assert!((f - mean_sq).abs() < 1e-15);
        assert!(g[0].is_zero());
        for h in 0..4 {
            let expected = -2.0
                * p.points()
                    .iter()
                    .zip(p.targets())
                    .map(|(x, t)| t * (w1.get(h, 0) * x).tanh())
                    .sum::<f64>()
                / 16.0;
            assert!((g[1].get(0, h) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn single_unit_single_point_chain_rule() {
        // x = 0.5, target −sin(π/2) = −1, W₁ = 0.3, W₂ = 2.
        let p = SmallMlpRegression::with_points(1, vec![0.5]).unwrap();
        let w1 = Matrix::from_vec(1, 1, vec![0.3]).unwrap();
        let w2 = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let (f, g) = p.loss_grad(&[w1, w2]).unwrap();
        let z = 0.15f64.tanh();
        let err = 2.0 * z + 1.0;
        assert!((f - err * err).abs() < 1e-14);
        assert!((g[1].get(0, 0) - 2.0 * err * z).abs() < 1e-14);
        assert!((g[0].get(0, 0) - 2.0 * err * 2.0 * (1.0 - z * z) * 0.5).abs() < 1e-14);
    }
}
