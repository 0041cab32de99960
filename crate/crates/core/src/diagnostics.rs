//! Per-iteration theorem ledger: modified-energy dissipation, positivity of
//! the auxiliaries, the local stepsize condition for descent, and linear-rate
//! estimation under the PL inequality.
//!
//! All residual checks use an absolute slack of [`SLACK`].

use serde::Serialize;
use thiserror::Error;

use crate::optimizers::{ModeState, ScalarUpdate, StepReport};
use crate::problems::ProblemConstants;

/// Absolute slack on energy-law residuals.
pub const SLACK: f64 = 1e-9;

/// Allowed loss increase on steps where the stepsize condition holds.
pub const DESCENT_SLACK: f64 = 1e-12;

/// Fewest points [`estimate_rate`] will fit.
pub const MIN_FIT_POINTS: usize = 20;

/// Gap `f − f*` below which a point is treated as converged.
const GAP_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("fit window has {len} points, need at least {needed}")]
    WindowTooShort { len: usize, needed: usize },
    #[error("problem does not declare {0}")]
    MissingConstant(&'static str),
}

/// One ledger row. Row `iter` describes the step from `Θ^iter` to `Θ^{iter+1}`;
/// `loss`, `grad_fro` and `modified_energy` are taken at `Θ^iter`. Quantities an
/// optimizer does not produce are NaN (or `None`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_fro: f64,
    pub modified_energy: f64,
    /// `M^{k+1} − M^k`
    pub dissipation_lhs: f64,
    /// `−(1 − ψ) Σ D_i`
    pub dissipation_rhs: f64,
    pub step_fro: f64,
    pub min_r: f64,
    pub xi_values: Vec<f64>,
    /// Local stepsize condition over all updated modes; `None` when `L` is
    /// unknown or the optimizer has no modes.
    pub eta_condition_ok: Option<bool>,
    pub wall_ns: u64,
    #[serde(skip)]
    pub loss_after: Option<f64>,
    /// Per-mode and aggregate dissipation law; `None` when none is claimed.
    #[serde(skip)]
    pub dissipation_ok: Option<bool>,
    #[serde(skip)]
    pub positivity_ok: Option<bool>,
    #[serde(skip)]
    pub c0: Option<f64>,
    #[serde(skip)]
    pub tau: Option<f64>,
    /// Relaxations that fell back because no weight passed the check.
    #[serde(skip)]
    pub infeasible_xi: usize,
}

impl TrajectoryRecord {
    pub fn from_step(
        iter: usize,
        loss: f64,
        grad_fro: f64,
        report: &StepReport,
        lr: f64,
        constants: &ProblemConstants,
        wall_ns: u64,
    ) -> Self {
        let energy = report.modified_energy();
        let (lhs, rhs, dissipation_ok) = match (energy, report.psi, report.total_dissipation()) {
            (Some((before, after)), Some(psi), Some(d)) => {
                let ok = match &report.scalar {
                    Some(s) => check_scalar_dissipation(s, psi),
                    None => report
                        .modes
                        .iter()
                        .all(|m| check_mode_dissipation(&m.prev, &m.next, &m.d_terms, psi)),
                };
                (after - before, -(1.0 - psi) * d, Some(ok))
            }
            (Some((before, after)), _, _) => (after - before, f64::NAN, None),
            _ => (f64::NAN, f64::NAN, None),
        };
        let positivity_ok = if report.scalar.is_some() || !report.modes.is_empty() {
            Some(report.min_r().is_none_or(|r| r > 0.0) && report.modes.iter().all(|m| check_positivity(&m.next)))
        } else {
            None
        };
        let alignment = if report.psi.is_some() {
            step_alignment(report, lr, constants.smoothness)
        } else {
            None
        };
        Self {
            iter,
            loss,
            grad_fro,
            modified_energy: energy.map_or(f64::NAN, |e| e.0),
            dissipation_lhs: lhs,
            dissipation_rhs: rhs,
            step_fro: report.step_fro,
            min_r: report.min_r().unwrap_or(f64::NAN),
            xi_values: report.xi_values(),
            eta_condition_ok: if report.psi.is_some() {
                step_eta_condition(report, lr, constants.smoothness)
            } else {
                None
            },
            wall_ns,
            loss_after: report.loss_after,
            dissipation_ok,
            positivity_ok,
            c0: alignment.map(|a| a.0),
            tau: alignment.map(|a| a.1),
            infeasible_xi: report.scalar.map_or(0, |s| usize::from(!s.feasible))
                + report.modes.iter().map(|m| m.infeasible).sum::<usize>(),
        }
    }

    pub fn max_xi(&self) -> f64 {
        self.xi_values.iter().copied().reduce(f64::max).unwrap_or(f64::NAN)
    }

    /// `Some(false)` when the stepsize condition held but the loss went up.
    pub fn descent_ok(&self) -> Option<bool> {
        match (self.eta_condition_ok, self.loss_after) {
            (Some(true), Some(after)) => Some(after - self.loss <= DESCENT_SLACK),
            _ => None,
        }
    }
}

/// Mode-wise and aggregate law
/// `r_i'² − r_i² ≤ −(1 − ψ) D_i` and `Σ r'² − Σ r² ≤ −(1 − ψ) Σ D_i`.
pub fn check_mode_dissipation(prev: &ModeState, next: &ModeState, d_terms: &[f64], psi: f64) -> bool {
    let (p, n) = (prev.values(), next.values());
    if p.len() != n.len() || d_terms.len() != p.len() {
        return false;
    }
    let per_mode = p
        .iter()
        .zip(n)
        .zip(d_terms)
        .all(|((a, b), d)| b * b - a * a <= -(1.0 - psi) * d + SLACK);
    let total_d: f64 = d_terms.iter().sum();
    per_mode && next.energy() - prev.energy() <= -(1.0 - psi) * total_d + SLACK
}

/// `r'² − r² ≤ −(1 − ψ) D` for one scalar auxiliary.
pub fn check_scalar_dissipation(update: &ScalarUpdate, psi: f64) -> bool {
    update.r_next.powi(2) - update.r_prev.powi(2) <= -(1.0 - psi) * update.dissipation + SLACK
}

pub fn check_positivity(modes: &ModeState) -> bool {
    modes.values().iter().all(|r| *r > 0.0)
}

/// Local stepsize condition `η ≤ 2 σ_i E^k / (L r̃_i)`; `None` without `L`.
pub fn check_eta_condition(sigma: f64, e_k: f64, r_tilde: f64, eta: f64, smoothness: Option<f64>) -> Option<bool> {
    let l = smoothness?;
    if eta == 0.0 {
        return Some(true);
    }
    Some(eta * l * r_tilde <= 2.0 * sigma * e_k)
}

fn step_eta_condition(report: &StepReport, lr: f64, smoothness: Option<f64>) -> Option<bool> {
    let mut any = false;
    let mut ok = true;
    for d in report.modes.iter().flat_map(|m| &m.diagnostics) {
        any = true;
        ok &= check_eta_condition(d.sigma, d.e_k, d.r_tilde, lr, smoothness)?;
    }
    any.then_some(ok)
}

/// `c₀ = (Σ r̃_i σ_i)² / (Σ r̃_i² · Σ σ_i²)`, the squared cosine between the
/// predictor vector and the singular spectrum.
pub fn alignment_c0(r_tilde: &[f64], sigma: &[f64]) -> Option<f64> {
    let dot: f64 = r_tilde.iter().zip(sigma).map(|(r, s)| r * s).sum();
    let rr: f64 = r_tilde.iter().map(|r| r * r).sum();
    let ss: f64 = sigma.iter().map(|s| s * s).sum();
    (rr > 0.0 && ss > 0.0).then(|| dot * dot / (rr * ss))
}

/// `(c₀, τ)` for one step, with `τ = η / η*` and
/// `η* = E Σ r̃_i σ_i / (L Σ r̃_i²)` the minimizer of the smoothness upper
/// bound along the step direction.
fn step_alignment(report: &StepReport, lr: f64, smoothness: Option<f64>) -> Option<(f64, f64)> {
    let l = smoothness?;
    let diags: Vec<_> = report.modes.iter().flat_map(|m| &m.diagnostics).collect();
    let e = diags.first()?.e_k;
    let r: Vec<f64> = diags.iter().map(|d| d.r_tilde).collect();
    let s: Vec<f64> = diags.iter().map(|d| d.sigma).collect();
    let c0 = alignment_c0(&r, &s)?;
    let dot: f64 = r.iter().zip(&s).map(|(a, b)| a * b).sum();
    let rr: f64 = r.iter().map(|a| a * a).sum();
    let eta_star = e * dot / (l * rr);
    Some((c0, lr / eta_star))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    /// `exp` of the least-squares slope of `log(f_k − f*)` over the window.
    pub fitted_contraction: f64,
    /// `ρ = 2τ(2−τ) E_lower c₀ μ / L` with the window-minimum `c₀`, the
    /// smallest `τ(2−τ)` and `E_lower = √(f* + κ)`; `None` without per-step
    /// alignment data.
    pub theoretical_rho: Option<f64>,
    pub c0_series: Vec<f64>,
    /// The `τ` attaining the smallest `τ(2−τ)` in the window.
    pub tau: Option<f64>,
    pub window: usize,
}

impl RateEstimate {
    /// `1 − ρ`, the contraction the rate theorem guarantees.
    pub fn bound(&self) -> Option<f64> {
        self.theoretical_rho.map(|rho| 1.0 - rho)
    }

    pub fn bound_holds(&self, tol: f64) -> Option<bool> {
        self.bound().map(|b| self.fitted_contraction <= b + tol)
    }
}

/// Least-squares slope of `log g_k` against `k`, exponentiated.
pub fn fit_contraction(gaps: &[f64]) -> Option<f64> {
    if gaps.len() < 2 || gaps.iter().any(|g| !(*g > 0.0)) {
        return None;
    }
    let n = gaps.len() as f64;
    let mean_k = (n - 1.0) / 2.0;
    let logs: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let mean_y = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in logs.iter().enumerate() {
        let dk = k as f64 - mean_k;
        sxy += dk * (y - mean_y);
        sxx += dk * dk;
    }
    Some((sxy / sxx).exp())
}

/// Fits the decay of `f − f*` over the leading stretch of `traj` where the gap
/// exceeds `1e-14` and, when recorded, `τ ∈ (0, 2]`.
pub fn estimate_rate(
    traj: &[TrajectoryRecord],
    constants: &ProblemConstants,
    kappa: f64,
) -> Result<RateEstimate, DiagnosticsError> {
    let f_star = constants.f_star.ok_or(DiagnosticsError::MissingConstant("f*"))?;
    let window: Vec<&TrajectoryRecord> = traj
        .iter()
        .take_while(|r| r.loss - f_star > GAP_FLOOR && r.tau.is_none_or(|t| t > 0.0 && t <= 2.0))
        .collect();
    if window.len() < MIN_FIT_POINTS {
        return Err(DiagnosticsError::WindowTooShort {
            len: window.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let gaps: Vec<f64> = window.iter().map(|r| r.loss - f_star).collect();
    let fitted = fit_contraction(&gaps).expect("window gaps are positive");
    let c0_series: Vec<f64> = window.iter().filter_map(|r| r.c0).collect();
    let aligned = c0_series.len() == window.len();
    let (theoretical_rho, tau) = if aligned {
        let l = constants.smoothness.ok_or(DiagnosticsError::MissingConstant("L"))?;
        let mu = constants.pl.ok_or(DiagnosticsError::MissingConstant("mu"))?;
        let c0_min = c0_series.iter().copied().fold(f64::INFINITY, f64::min);
        let tau = window
            .iter()
            .filter_map(|r| r.tau)
            .min_by(|a, b| (a * (2.0 - a)).total_cmp(&(b * (2.0 - b))))
            .expect("aligned window has tau");
        let e_lower = (f_star + kappa).sqrt();
        (Some(2.0 * tau * (2.0 - tau) * e_lower * c0_min * mu / l), Some(tau))
    } else {
        (None, None)
    };
    Ok(RateEstimate {
        fitted_contraction: fitted,
        theoretical_rho,
        c0_series,
        tau,
        window: window.len(),
    })
}
