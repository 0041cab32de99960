use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{gaussian_matrix, Problem, ProblemConstants, ProblemError};
use crate::linalg::Matrix;

/// `f(θ) = ½ Σ λ_i θ_i²` over the entries of one matrix block, in row-major
/// order, so `∇f = λ ⊙ θ`, `L = max λ`, `μ = min λ` and `f* = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumQuadratic {
    rows: usize,
    cols: usize,
    lambda: Vec<f64>,
}

impl SpectrumQuadratic {
    pub fn new(rows: usize, cols: usize, lambda: Vec<f64>) -> Result<Self, ProblemError> {
        if rows * cols == 0 || lambda.len() != rows * cols {
            return Err(ProblemError::InvalidSpec(format!(
                "{} eigenvalues for a {rows}x{cols} block",
                lambda.len()
            )));
        }
        if lambda.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(ProblemError::InvalidSpec("eigenvalues must be positive".into()));
        }
        Ok(Self { rows, cols, lambda })
    }

    /// Eigenvalues log-spaced from `lambda_max` down to `lambda_min`.
    pub fn log_spaced(rows: usize, cols: usize, lambda_min: f64, lambda_max: f64) -> Result<Self, ProblemError> {
        if !(lambda_min > 0.0) || !(lambda_max >= lambda_min) {
            return Err(ProblemError::InvalidSpec(format!(
                "eigenvalue range [{lambda_min}, {lambda_max}]"
            )));
        }
        let d = rows * cols;
        let ratio = lambda_min / lambda_max;
        let lambda = (0..d)
            .map(|i| {
                let t = if d > 1 { i as f64 / (d - 1) as f64 } else { 0.0 };
                lambda_max * ratio.powf(t)
            })
            .collect();
        Self::new(rows, cols, lambda)
    }

    pub fn isotropic(rows: usize, cols: usize, lambda: f64) -> Result<Self, ProblemError> {
        Self::new(rows, cols, vec![lambda; rows * cols])
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }
}

impl Problem for SpectrumQuadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        vec![(self.rows, self.cols)]
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn loss(&self, params: &[Matrix]) -> Result<f64, ProblemError> {
        self.check_shapes(params)?;
        Ok(0.5
            * params[0]
                .as_slice()
                .iter()
                .zip(&self.lambda)
                .map(|(t, l)| l * t * t)
                .sum::<f64>())
    }

    fn loss_grad(&self, params: &[Matrix]) -> Result<(f64, Vec<Matrix>), ProblemError> {
        let f = self.loss(params)?;
        let mut g = params[0].clone();
        for (x, l) in g.as_mut_slice().iter_mut().zip(&self.lambda) {
            *x *= l;
        }
        Ok((f, vec![g]))
    }

    fn constants(&self) -> ProblemConstants {
        let max = self.lambda.iter().copied().fold(f64::MIN, f64::max);
        let min = self.lambda.iter().copied().fold(f64::MAX, f64::min);
        ProblemConstants {
            smoothness: Some(max),
            pl: Some(min),
            f_star: Some(0.0),
        }
    }

    /// Standard normal entries.
    fn init_params(&self, seed: u64) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        vec![gaussian_matrix(&mut rng, self.rows, self.cols)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_norm;

    #[test]
    fn origin_is_minimum() {
        let q = SpectrumQuadratic::log_spaced(2, 3, 0.1, 1.0).unwrap();
        let (f, g) = q.loss_grad(&[Matrix::zeros(2, 3)]).unwrap();
        assert_eq!(f, 0.0);
        assert!(g[0].is_zero());
    }

    #[test]
    fn one_dimensional_hand_value() {
        let q = SpectrumQuadratic::new(1, 1, vec![1.0]).unwrap();
        let (f, g) = q.loss_grad(&[Matrix::from_vec(1, 1, vec![2.0]).unwrap()]).unwrap();
        assert_eq!(f, 2.0);
        assert_eq!(g[0].get(0, 0), 2.0);
    }

    #[test]
    fn isotropic_pl_is_an_identity() {
        let q = SpectrumQuadratic::isotropic(4, 3, 0.7).unwrap();
        let theta = q.init_params(5);
        let (f, g) = q.loss_grad(&theta).unwrap();
        let mu = q.constants().pl.unwrap();
        let lhs = 0.5 * frobenius_norm(&g[0]).powi(2);
        assert!((lhs - mu * f).abs() < 1e-12 * lhs);
    }

    #[test]
    fn spectrum_endpoints() {
        let q = SpectrumQuadratic::log_spaced(10, 5, 1e-2, 1.0).unwrap();
        let c = q.constants();
        assert_eq!(c.smoothness, Some(1.0));
        assert!((c.pl.unwrap() - 1e-2).abs() < 1e-15);
        assert!(q.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }
}
