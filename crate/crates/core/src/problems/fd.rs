use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{gaussian_matrix, Problem, ProblemError};
use crate::linalg::{frobenius_norm, Matrix};

/// Central differences `(f(θ + s e) − f(θ − s e)) / 2s`, one coordinate at a
/// time.
pub fn finite_diff_grad(problem: &dyn Problem, params: &[Matrix], step: f64) -> Result<Vec<Matrix>, ProblemError> {
    if !(step > 0.0) {
        return Err(ProblemError::InvalidSpec(format!("finite-difference step {step}")));
    }
    problem.check_shapes(params)?;
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for b in 0..params.len() {
        let mut g = Matrix::zeros(params[b].rows(), params[b].cols());
        for idx in 0..params[b].as_slice().len() {
            let orig = params[b].as_slice()[idx];
            work[b].as_mut_slice()[idx] = orig + step;
            let plus = problem.loss(&work)?;
            work[b].as_mut_slice()[idx] = orig - step;
            let minus = problem.loss(&work)?;
            work[b].as_mut_slice()[idx] = orig;
            g.as_mut_slice()[idx] = (plus - minus) / (2.0 * step);
        }
        out.push(g);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateReport {
    pub points: usize,
    pub max_rel_error: f64,
}

/// Compares the closed-form gradient with central differences (step `1e-6`)
/// at `points` standard normal parameter draws. The error of a point is the
/// largest per-block `‖g_fd − g‖_F / max(‖g‖_F, ‖g_fd‖_F, 1e-12)`.
pub fn gradient_gate(problem: &dyn Problem, seed: u64, points: usize, tol: f64) -> Result<GateReport, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9a7e_0000_0000_0000);
    let mut worst: f64 = 0.0;
    for point in 0..points {
        let params: Vec<Matrix> = problem
            .param_shapes()
            .iter()
            .map(|&(r, c)| gaussian_matrix(&mut rng, r, c))
            .collect();
        let (_, exact) = problem.loss_grad(&params)?;
        let approx = finite_diff_grad(problem, &params, 1e-6)?;
        for (g, fd) in exact.iter().zip(&approx) {
            let scale = frobenius_norm(g).max(frobenius_norm(fd)).max(1e-12);
            let err = frobenius_norm(&fd.sub(g)?) / scale;
            worst = worst.max(err);
            if !(err <= tol) {
                return Err(ProblemError::GradientMismatch {
                    problem: problem.name().to_string(),
                    point,
                    error: err,
                });
            }
        }
    }
    Ok(GateReport {
        points,
        max_rel_error: worst,
    })
}
