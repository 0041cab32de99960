//! Benchmark objectives with closed-form gradients and, where available, their
//! smoothness constant `L`, PL constant `μ` and infimum `f*`.
//!
//! Instances are generated from a 64-bit seed with ChaCha8, so a
//! [`ProblemSpec`] plus seed reproduces the same data on every platform.

mod fd;
mod least_squares;
mod mlp;
mod quadratic;

pub use fd::{finite_diff_grad, gradient_gate, GateReport};
pub use least_squares::LeastSquares;
pub use mlp::SmallMlpRegression;
pub use quadratic::SpectrumQuadratic;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{problem}: expected parameter shapes {expected:?}, got {got:?}")]
    Shape {
        problem: String,
        expected: Vec<(usize, usize)>,
        got: Vec<(usize, usize)>,
    },
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
    #[error("gradient check failed for {problem}: relative error {error:e} at point {point}")]
    GradientMismatch { problem: String, point: usize, error: f64 },
}

/// Known analytic constants; `None` when the problem does not provide one.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ProblemConstants {
    /// Gradient Lipschitz constant.
    pub smoothness: Option<f64>,
    /// PL constant: `½‖∇f‖² ≥ μ (f − f*)`.
    pub pl: Option<f64>,
    pub f_star: Option<f64>,
}

pub trait Problem {
    fn name(&self) -> &str;

    fn param_shapes(&self) -> Vec<(usize, usize)>;

    fn loss(&self, params: &[Matrix]) -> Result<f64, ProblemError>;

    fn loss_grad(&self, params: &[Matrix]) -> Result<(f64, Vec<Matrix>), ProblemError>;

    fn constants(&self) -> ProblemConstants;

    /// Starting point for a run with the given seed.
    fn init_params(&self, seed: u64) -> Vec<Matrix>;

    /// Names of the parameter blocks, in `param_shapes` order.
    fn param_names(&self) -> Vec<String> {
        (0..self.param_shapes().len()).map(|i| format!("w{i}")).collect()
    }

    fn check_shapes(&self, params: &[Matrix]) -> Result<(), ProblemError> {
        let expected = self.param_shapes();
        let got: Vec<_> = params.iter().map(Matrix::shape).collect();
        if expected != got {
            return Err(ProblemError::Shape {
                problem: self.name().to_string(),
                expected,
                got,
            });
        }
        Ok(())
    }
}

/// Serializable description of a problem family; `build(seed)` draws the
/// instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    LeastSquares {
        #[serde(default = "defaults::ls_outputs")]
        outputs: usize,
        #[serde(default = "defaults::ls_inputs")]
        inputs: usize,
        #[serde(default = "defaults::ls_samples")]
        samples: usize,
        /// Condition number of `X Xᵀ`.
        #[serde(default = "defaults::ls_cond")]
        cond: f64,
        #[serde(default = "defaults::ls_noise")]
        noise: f64,
    },
    Quadratic {
        #[serde(default = "defaults::q_rows")]
        rows: usize,
        #[serde(default = "defaults::q_cols")]
        cols: usize,
        #[serde(default = "defaults::q_lambda_min")]
        lambda_min: f64,
        #[serde(default = "defaults::q_lambda_max")]
        lambda_max: f64,
        /// All eigenvalues equal to `lambda_max`.
        #[serde(default)]
        isotropic: bool,
    },
    Mlp {
        #[serde(default = "defaults::mlp_hidden")]
        hidden: usize,
        #[serde(default = "defaults::mlp_points")]
        points: usize,
    },
}

mod defaults {
    pub fn ls_outputs() -> usize {
        8
    }
    pub fn ls_inputs() -> usize {
        12
    }
    pub fn ls_samples() -> usize {
        64
    }
    pub fn ls_cond() -> f64 {
        100.0
    }
    pub fn ls_noise() -> f64 {
        0.01
    }
    pub fn q_rows() -> usize {
        10
    }
    pub fn q_cols() -> usize {
        5
    }
    pub fn q_lambda_min() -> f64 {
        1e-2
    }
    pub fn q_lambda_max() -> f64 {
        1.0
    }
    pub fn mlp_hidden() -> usize {
        16
    }
    pub fn mlp_points() -> usize {
        128
    }
}

impl ProblemSpec {
    pub fn default_least_squares() -> Self {
        Self::LeastSquares {
            outputs: defaults::ls_outputs(),
            inputs: defaults::ls_inputs(),
            samples: defaults::ls_samples(),
            cond: defaults::ls_cond(),
            noise: defaults::ls_noise(),
        }
    }

    pub fn default_quadratic(isotropic: bool) -> Self {
        Self::Quadratic {
            rows: defaults::q_rows(),
            cols: defaults::q_cols(),
            lambda_min: defaults::q_lambda_min(),
            lambda_max: defaults::q_lambda_max(),
            isotropic,
        }
    }

    pub fn default_mlp() -> Self {
        Self::Mlp {
            hidden: defaults::mlp_hidden(),
            points: defaults::mlp_points(),
        }
    }

    pub fn build(&self, seed: u64) -> Result<Box<dyn Problem>, ProblemError> {
        Ok(match *self {
            Self::LeastSquares {
                outputs,
                inputs,
                samples,
                cond,
                noise,
            } => Box::new(LeastSquares::generate(outputs, inputs, samples, cond, noise, seed)?),
            Self::Quadratic {
                rows,
                cols,
                lambda_min,
                lambda_max,
                isotropic,
            } => {
                let q = if isotropic {
                    SpectrumQuadratic::isotropic(rows, cols, lambda_max)?
                } else {
                    SpectrumQuadratic::log_spaced(rows, cols, lambda_min, lambda_max)?
                };
                Box::new(q)
            }
            Self::Mlp { hidden, points } => Box::new(SmallMlpRegression::new(hidden, points)?),
        })
    }
}

pub(crate) fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trips_through_toml() {
        for spec in [
            ProblemSpec::default_least_squares(),
            ProblemSpec::default_quadratic(true),
            ProblemSpec::default_mlp(),
        ] {
            let text = toml::to_string(&spec).unwrap();
            let back: ProblemSpec = toml::from_str(&text).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn missing_fields_take_defaults() {
        let spec: ProblemSpec = toml::from_str("kind = \"least_squares\"").unwrap();
        assert_eq!(spec, ProblemSpec::default_least_squares());
        assert!(toml::from_str::<ProblemSpec>("kind = \"least_squares\"\nwidth = 3").is_err());
    }

    #[test]
    fn wrong_shapes_are_rejected() {
        let p = ProblemSpec::default_mlp().build(0).unwrap();
        let err = p.loss(&[Matrix::zeros(2, 2)]).unwrap_err();
        assert!(matches!(err, ProblemError::Shape { .. }));
    }
}
