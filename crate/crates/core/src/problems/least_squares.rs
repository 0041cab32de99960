use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{gaussian_matrix, Problem, ProblemConstants, ProblemError};
use crate::linalg::{frobenius_norm, rank_one_update, thin_svd, Matrix};

/// `f(W) = ½‖W X − Y‖²_F` with `∇f(W) = (W X − Y) Xᵀ`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    x: Matrix,
    y: Matrix,
    constants: ProblemConstants,
    solution: Matrix,
}

impl LeastSquares {
    /// Fixed data. `L` and `μ` are the extreme eigenvalues of `X Xᵀ`; `f*` is
    /// attained by the pseudo-inverse solution.
    pub fn from_data(x: Matrix, y: Matrix) -> Result<Self, ProblemError> {
        if x.cols() != y.cols() {
            return Err(ProblemError::InvalidSpec(format!(
                "X is {:?} but Y is {:?}",
                x.shape(),
                y.shape()
            )));
        }
        let f = thin_svd(&x, x.min_dim())?;
        let sigma = f.sigma();
        let top = sigma.first().copied().unwrap_or(0.0);
        let full_rank = f.rank() == x.rows();
        let mut solution = Matrix::zeros(y.rows(), x.rows());
        for i in 0..f.rank() {
            let yv = y.matmul(&Matrix::column(f.v(i)))?;
            rank_one_update(&mut solution, 1.0 / sigma[i], yv.as_slice(), f.u(i))?;
        }
        let residual = solution.matmul(&x)?.sub(&y)?;
        let f_star = 0.5 * frobenius_norm(&residual).powi(2);
        let constants = ProblemConstants {
            smoothness: Some(top * top),
            pl: Some(if full_rank { sigma[sigma.len() - 1].powi(2) } else { 0.0 }),
            f_star: Some(f_star),
        };
        Ok(Self {
            x,
            y,
            constants,
            solution,
        })
    }

    /// Random instance: `X` has i.i.d. standard normal entries with its singular
    /// values replaced by a log-spaced ladder so that `cond(X Xᵀ) = cond`;
    /// `Y = W* X + noise · N(0, 1)` with standard normal `W*`.
    pub fn generate(
        outputs: usize,
        inputs: usize,
        samples: usize,
        cond: f64,
        noise: f64,
        seed: u64,
    ) -> Result<Self, ProblemError> {
        if outputs == 0 || inputs == 0 || samples < inputs {
            return Err(ProblemError::InvalidSpec(format!(
                "least squares needs samples >= inputs > 0 and outputs > 0, got {outputs}x{inputs} with {samples} samples"
            )));
        }
        if !(cond >= 1.0) || !cond.is_finite() || !(noise >= 0.0) {
            return Err(ProblemError::InvalidSpec(format!("cond {cond}, noise {noise}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = gaussian_matrix(&mut rng, inputs, samples);
        let f = thin_svd(&raw, inputs)?;
        let top = f.sigma()[0];
        let mut x = Matrix::zeros(inputs, samples);
        for i in 0..f.rank() {
            let t = if inputs > 1 {
                i as f64 / (inputs - 1) as f64
            } else {
                0.0
            };
            rank_one_update(&mut x, top * cond.powf(-0.5 * t), f.u(i), f.v(i))?;
        }
        let w_star = gaussian_matrix(&mut rng, outputs, inputs);
        let mut y = w_star.matmul(&x)?;
        y.axpy(noise, &gaussian_matrix(&mut rng, outputs, samples))?;
        Self::from_data(x, y)
    }

    pub fn inputs(&self) -> &Matrix {
        &self.x
    }

    pub fn targets(&self) -> &Matrix {
        &self.y
    }

    /// Minimum-norm minimizer.
    pub fn solution(&self) -> &Matrix {
        &self.solution
    }

    fn residual(&self, params: &[Matrix]) -> Result<Matrix, ProblemError> {
        self.check_shapes(params)?;
        Ok(params[0].matmul(&self.x)?.sub(&self.y)?)
    }
}

impl Problem for LeastSquares {
    fn name(&self) -> &str {
        "least_squares"
    }

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        vec![(self.y.rows(), self.x.rows())]
    }

    fn param_names(&self) -> Vec<String> {
        vec!["w".into()]
    }

    fn loss(&self, params: &[Matrix]) -> Result<f64, ProblemError> {
        Ok(0.5 * frobenius_norm(&self.residual(params)?).powi(2))
    }

    fn loss_grad(&self, params: &[Matrix]) -> Result<(f64, Vec<Matrix>), ProblemError> {
        let r = self.residual(params)?;
        let grad = r.matmul_t(&self.x)?;
        Ok((0.5 * frobenius_norm(&r).powi(2), vec![grad]))
    }

    fn constants(&self) -> ProblemConstants {
        self.constants
    }

    /// Always starts at `W = 0`; the seed only varies the data.
    fn init_params(&self, _seed: u64) -> Vec<Matrix> {
        vec![Matrix::zeros(self.y.rows(), self.x.rows())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_zero_loss_and_gradient() {
        let w = Matrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64 - 1.5);
        let p = LeastSquares::from_data(Matrix::identity(3), w.clone()).unwrap();
        let (f, g) = p.loss_grad(&[w]).unwrap();
        assert_eq!(f, 0.0);
        assert!(g[0].is_zero());
    }

    #[test]
    fn identity_data_with_zero_targets() {
        let w = Matrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 * 0.5);
        let p = LeastSquares::from_data(Matrix::identity(3), Matrix::zeros(2, 3)).unwrap();
        let (f, g) = p.loss_grad(std::slice::from_ref(&w)).unwrap();
        assert!((f - 0.5 * frobenius_norm(&w).powi(2)).abs() < 1e-14);
        assert_eq!(g[0], w);
    }

    #[test]
    fn generated_instance_has_requested_conditioning() {
        let p = LeastSquares::generate(8, 12, 64, 100.0, 0.01, 3).unwrap();
        let c = p.constants();
        let ratio = c.smoothness.unwrap() / c.pl.unwrap();
        assert!((ratio - 100.0).abs() < 1e-8 * 100.0, "{ratio}");
        let (f_sol, g_sol) = p.loss_grad(&[p.solution().clone()]).unwrap();
        assert!((f_sol - c.f_star.unwrap()).abs() < 1e-12);
        assert!(frobenius_norm(&g_sol[0]) < 1e-9);
        let f0 = p.loss(&p.init_params(0)).unwrap();
        assert!(f0 > c.f_star.unwrap());
    }

    #[test]
    fn same_seed_same_instance() {
        let a = LeastSquares::generate(3, 4, 9, 10.0, 0.1, 42).unwrap();
        let b = LeastSquares::generate(3, 4, 9, 10.0, 0.1, 42).unwrap();
        let c = LeastSquares::generate(3, 4, 9, 10.0, 0.1, 43).unwrap();
        assert_eq!(a.targets(), b.targets());
        assert_ne!(a.targets(), c.targets());
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(LeastSquares::generate(2, 5, 4, 10.0, 0.0, 0).is_err());
    }
}
