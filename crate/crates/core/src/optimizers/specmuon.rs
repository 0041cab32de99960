//! SpecMuon: relaxed scalar auxiliary variables attached to the leading
//! singular modes of each gradient block.
//!
//! Theory mode works on the raw gradient `G = Σ σ_i Q_i` with `Q_i = u_i v_iᵀ`.
//! Each retained mode gets step `h_i = η/σ_i` and scaled gradient
//! `g_i = σ_i/E`, so the aggregated update is
//! `W ← W − (η/E) Σ r̃_i Q_i` with `r̃_i = r_i / (1 + h_i g_i² / 2)`.
//! After `E^{k+1}` is known each `r_i` is relaxed with its own `ξ_i`.
//!
//! Practical mode follows the reference pseudo-code: normalized gradient,
//! first-power predictor, a smoothing rule for `r`, the untouched spectral
//! tail and heavy-ball momentum.

use serde::{Deserialize, Serialize};

use super::sav::{energy_root, rsav_xi};
use super::{
    snapshot, step_norm, validate_blocks, LossEvaluator, ModeUpdate, OptimError, Optimizer, ParamBlock, StepReport,
};
use crate::linalg::{frobenius_inner, frobenius_norm, rank_one_update, thin_svd, Matrix};

/// Absolute singular value floor below which a mode never receives a step.
const SIGMA_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecMuonMode {
    Theory,
    Practical,
}

/// Exponent of the mode magnitude in the predictor denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorPower {
    One,
    Two,
}

impl PredictorPower {
    pub fn from_exponent(p: u32) -> Result<Self, OptimError> {
        match p {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            _ => Err(OptimError::InvalidConfig(format!("predictor_power {p} must be 1 or 2"))),
        }
    }

    pub fn exponent(self) -> i32 {
        match self {
            Self::One => 1,
            Self::Two => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecMuonConfig {
    pub lr: f64,
    pub momentum: f64,
    /// Number of leading singular modes with their own auxiliary variable.
    pub rtop: usize,
    /// Smoothing weight of the practical `r` update.
    pub sav_eta: f64,
    /// Dissipation tolerance of the theory-mode relaxation.
    pub psi: f64,
    pub kappa: f64,
    pub eps: f64,
    pub mode: SpecMuonMode,
    pub predictor_power: PredictorPower,
}

impl SpecMuonConfig {
    pub fn theory(lr: f64, rtop: usize) -> Self {
        Self {
            lr,
            momentum: 0.0,
            rtop,
            sav_eta: 0.2,
            psi: 0.95,
            kappa: 1.0,
            eps: 1e-8,
            mode: SpecMuonMode::Theory,
            predictor_power: PredictorPower::Two,
        }
    }

    pub fn practical(lr: f64, rtop: usize) -> Self {
        Self {
            momentum: 0.9,
            kappa: 0.0,
            mode: SpecMuonMode::Practical,
            predictor_power: PredictorPower::One,
            ..Self::theory(lr, rtop)
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |msg: String| Err(OptimError::InvalidConfig(format!("specmuon: {msg}")));
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps {} must be positive", self.eps));
        }
        if !(self.sav_eta > 0.0 && self.sav_eta <= 1.0) {
            return bad(format!("sav_eta {} outside (0, 1]", self.sav_eta));
        }
        if !(0.0..1.0).contains(&self.psi) {
            return bad(format!("psi {} outside [0, 1)", self.psi));
        }
        match self.mode {
            SpecMuonMode::Theory if !(self.kappa > 0.0) => {
                bad(format!("theory mode needs kappa > 0, got {}", self.kappa))
            }
            SpecMuonMode::Theory if self.momentum != 0.0 => bad("theory mode has no momentum".into()),
            SpecMuonMode::Practical if !(self.kappa >= 0.0) => bad(format!("kappa {} is negative", self.kappa)),
            _ => Ok(()),
        }
    }
}

/// Auxiliary variables of one block, indexed by descending singular value rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    r: Vec<f64>,
}

impl ModeState {
    pub fn new(rtop: usize, r0: f64) -> Result<Self, OptimError> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(OptimError::InvalidConfig(format!(
                "initial auxiliary {r0} must be positive"
            )));
        }
        Ok(Self { r: vec![r0; rtop] })
    }

    /// Arbitrary finite values; positivity is not checked here.
    pub fn from_values(r: Vec<f64>) -> Result<Self, OptimError> {
        if r.iter().any(|x| !x.is_finite()) {
            return Err(OptimError::NonFinite("auxiliaries".into()));
        }
        Ok(Self { r })
    }

    pub fn values(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `Σ r_i²`
    pub fn energy(&self) -> f64 {
        self.r.iter().map(|x| x * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumBuffer(Matrix);

impl MomentumBuffer {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self(Matrix::zeros(rows, cols))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Per-mode quantities of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDiagnostics {
    pub index: usize,
    pub sigma: f64,
    /// Mode step `h_i` (theory) or `η / (s_j + ε)` (practical).
    pub h: f64,
    pub r_tilde: f64,
    /// Energy root the predictor used.
    pub e_k: f64,
}

/// Output of the predictor half of a theory step for one block.
struct Predicted {
    prev: ModeState,
    r_tilde: Vec<f64>,
    d_terms: Vec<f64>,
    active: Vec<usize>,
    diagnostics: Vec<ModeDiagnostics>,
    stalled: bool,
}

fn check_state(block: &ParamBlock, modes: &ModeState, cfg: &SpecMuonConfig) -> Result<(), OptimError> {
    if modes.len() != cfg.rtop {
        return Err(OptimError::InvalidConfig(format!(
            "block {}: {} auxiliaries for rtop {}",
            block.name,
            modes.len(),
            cfg.rtop
        )));
    }
    Ok(())
}

fn theory_predict(
    block: &mut ParamBlock,
    modes: &ModeState,
    e: f64,
    cfg: &SpecMuonConfig,
) -> Result<Predicted, OptimError> {
    block.validate()?;
    check_state(block, modes, cfg)?;
    let k = cfg.rtop.min(block.grad.min_dim());
    let factors = thin_svd(&block.grad, k)?;
    let sigma = factors.sigma();
    let top = sigma.first().copied().unwrap_or(0.0);
    let mut out = Predicted {
        prev: modes.clone(),
        r_tilde: modes.values().to_vec(),
        d_terms: vec![0.0; cfg.rtop],
        active: Vec::new(),
        diagnostics: Vec::new(),
        stalled: top < SIGMA_FLOOR,
    };
    if out.stalled {
        return Ok(out);
    }
    let floor = SIGMA_FLOOR.max(cfg.eps * top);
    let p = cfg.predictor_power.exponent();
    let mut sum = Matrix::zeros(block.value.rows(), block.value.cols());
    let mut steps = Vec::new();
    for (i, &s) in sigma.iter().enumerate() {
        if s <= floor {
            continue;
        }
        let h = cfg.lr / s;
        let g = s / e;
        let r_tilde = modes.r[i] / (1.0 + 0.5 * h * g.powi(p));
        rank_one_update(&mut sum, r_tilde, factors.u(i), factors.v(i))?;
        out.r_tilde[i] = r_tilde;
        out.active.push(i);
        out.diagnostics.push(ModeDiagnostics {
            index: i,
            sigma: s,
            h,
            r_tilde,
            e_k: e,
        });
        steps.push(h);
    }
    let before = block.value.clone();
    block.value.axpy(-cfg.lr / e, &sum)?;
    block.check_value_finite()?;
    let delta = block.value.sub(&before)?;
    for (&i, h) in out.active.iter().zip(steps) {
        let proj = frobenius_inner(&delta, &factors.direction(i))?;
        out.d_terms[i] = proj * proj / h;
    }
    Ok(out)
}

fn theory_relax(pred: Predicted, modes: &mut ModeState, e_next: f64, psi: f64, block: usize) -> ModeUpdate {
    let mut xi = Vec::with_capacity(pred.active.len());
    let mut infeasible = 0;
    for &i in &pred.active {
        let sol = rsav_xi(pred.r_tilde[i], pred.prev.r[i], e_next, pred.d_terms[i], psi);
        if !sol.feasible {
            infeasible += 1;
        }
        modes.r[i] = sol.xi * pred.r_tilde[i] + (1.0 - sol.xi) * e_next;
        xi.push(sol.xi);
    }
    ModeUpdate {
        block,
        prev: pred.prev,
        next: modes.clone(),
        d_terms: pred.d_terms,
        r_tilde: pred.r_tilde,
        xi,
        diagnostics: pred.diagnostics,
        stalled: pred.stalled,
        infeasible,
    }
}

/// Theory-mode step over all blocks of one iteration.
///
/// Every block is moved with the shared `E^k = √(loss + κ)`, then `f` is
/// evaluated once at the new parameters and every block relaxes against the
/// same `E^{k+1}`. Returns one [`ModeUpdate`] per block and the new loss.
pub fn specmuon_theory_step(
    blocks: &mut [ParamBlock],
    modes: &mut [ModeState],
    loss: f64,
    eval: &mut dyn LossEvaluator,
    cfg: &SpecMuonConfig,
) -> Result<(Vec<ModeUpdate>, f64), OptimError> {
    if cfg.mode != SpecMuonMode::Theory {
        return Err(OptimError::InvalidConfig(
            "theory step called with a practical config".into(),
        ));
    }
    cfg.validate()?;
    validate_blocks(blocks)?;
    if blocks.len() != modes.len() {
        return Err(OptimError::InvalidConfig(format!(
            "{} blocks but {} mode states",
            blocks.len(),
            modes.len()
        )));
    }
    let e = energy_root(loss, cfg.kappa)?;
    let predicted = blocks
        .iter_mut()
        .zip(modes.iter())
        .map(|(b, m)| theory_predict(b, m, e, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let loss_next = if predicted.iter().all(|p| p.active.is_empty()) {
        loss
    } else {
        eval.loss(blocks)?
    };
    let e_next = energy_root(loss_next, cfg.kappa)?;
    let updates = predicted
        .into_iter()
        .zip(modes.iter_mut())
        .enumerate()
        .map(|(i, (p, m))| theory_relax(p, m, e_next, cfg.psi, i))
        .collect();
    Ok((updates, loss_next))
}

/// Practical-mode step of one block.
pub fn specmuon_practical_step(
    block: &mut ParamBlock,
    modes: &mut ModeState,
    buffer: &mut MomentumBuffer,
    loss: f64,
    cfg: &SpecMuonConfig,
) -> Result<ModeUpdate, OptimError> {
    if cfg.mode != SpecMuonMode::Practical {
        return Err(OptimError::InvalidConfig(
            "practical step called with a theory config".into(),
        ));
    }
    cfg.validate()?;
    block.validate()?;
    check_state(block, modes, cfg)?;
    if loss < 0.0 {
        return Err(OptimError::NegativeLoss(loss));
    }
    if buffer.0.shape() != block.value.shape() {
        return Err(OptimError::InvalidConfig(format!(
            "block {}: momentum buffer shape {:?}",
            block.name,
            buffer.0.shape()
        )));
    }
    let prev = modes.clone();
    let eps = cfg.eps;
    let root = (loss + cfg.kappa).sqrt();
    let norm = frobenius_norm(&block.grad);
    let g_hat = block.grad.map(|x| x / (norm + eps));
    let k = cfg.rtop.min(g_hat.min_dim());
    let factors = thin_svd(&g_hat, k)?;
    let p = cfg.predictor_power.exponent();
    let smooth = cfg.sav_eta;

    // Tail first: ĝ minus its leading modes, so rtop = 0 leaves ĝ untouched.
    let mut direction = g_hat;
    let mut r_tilde = prev.r.clone();
    let mut xi = Vec::new();
    let mut diagnostics = Vec::new();
    for j in 0..factors.rank() {
        let (u, s, v) = (factors.u(j), factors.sigma()[j], factors.v(j));
        rank_one_update(&mut direction, -s, u, v)?;
        let eta_j = cfg.lr / (s + eps);
        let d_g = s / (root + eps);
        let r_old = modes.r[j];
        let r_new = r_old / (1.0 + 0.5 * eta_j * d_g.powi(p));
        rank_one_update(&mut direction, r_new / (root + eps), u, v)?;
        let t = (1.0 - smooth) * r_new * r_new
            + smooth * r_old * r_old
            + (1.0 - smooth) * (r_new - r_old) * (r_new - r_old);
        let chi = (root - t.sqrt()) / (root - r_new + eps);
        let c = if chi.is_nan() { 0.0 } else { chi.clamp(0.0, 1.0) };
        modes.r[j] = c * r_new + (1.0 - c) * root;
        r_tilde[j] = r_new;
        xi.push(c);
        diagnostics.push(ModeDiagnostics {
            index: j,
            sigma: s,
            h: eta_j,
            r_tilde: r_new,
            e_k: root,
        });
    }
    buffer.0.scale_mut(cfg.momentum);
    buffer.0.axpy(1.0, &direction)?;
    block.value.axpy(-cfg.lr, &buffer.0)?;
    block.check_value_finite()?;
    Ok(ModeUpdate {
        block: 0,
        prev,
        next: modes.clone(),
        d_terms: Vec::new(),
        r_tilde,
        xi,
        diagnostics,
        stalled: factors.rank() == 0,
        infeasible: 0,
    })
}

/// SpecMuon over a list of blocks; auxiliaries and buffers are created on the
/// first step from the first loss value.
#[derive(Debug, Clone)]
pub struct SpecMuon {
    cfg: SpecMuonConfig,
    modes: Vec<ModeState>,
    buffers: Vec<MomentumBuffer>,
}

impl SpecMuon {
    pub fn new(cfg: SpecMuonConfig) -> Result<Self, OptimError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            modes: Vec::new(),
            buffers: Vec::new(),
        })
    }

    pub fn config(&self) -> &SpecMuonConfig {
        &self.cfg
    }

    pub fn modes(&self) -> &[ModeState] {
        &self.modes
    }

    fn init(&mut self, blocks: &[ParamBlock], loss: f64) -> Result<(), OptimError> {
        let r0 = match self.cfg.mode {
            SpecMuonMode::Theory => energy_root(loss, self.cfg.kappa)?,
            SpecMuonMode::Practical => {
                if loss < 0.0 {
                    return Err(OptimError::NegativeLoss(loss));
                }
                (loss + self.cfg.kappa).sqrt().max(self.cfg.eps)
            }
        };
        self.modes = blocks
            .iter()
            .map(|_| ModeState::new(self.cfg.rtop, r0))
            .collect::<Result<_, _>>()?;
        self.buffers = blocks
            .iter()
            .map(|b| MomentumBuffer::new(b.value.rows(), b.value.cols()))
            .collect();
        Ok(())
    }
}

impl Optimizer for SpecMuon {
    fn name(&self) -> &str {
        "specmuon"
    }

    fn step(
        &mut self,
        blocks: &mut [ParamBlock],
        loss: f64,
        eval: &mut dyn LossEvaluator,
    ) -> Result<StepReport, OptimError> {
        validate_blocks(blocks)?;
        if self.modes.len() != blocks.len() {
            self.init(blocks, loss)?;
        }
        let before = snapshot(blocks);
        match self.cfg.mode {
            SpecMuonMode::Theory => {
                let (modes, loss_after) = specmuon_theory_step(blocks, &mut self.modes, loss, eval, &self.cfg)?;
                Ok(StepReport {
                    modes,
                    scalar: None,
                    psi: Some(self.cfg.psi),
                    step_fro: step_norm(&before, blocks),
                    loss_after: Some(loss_after),
                })
            }
            SpecMuonMode::Practical => {
                let mut modes = Vec::with_capacity(blocks.len());
                for (i, ((b, m), buf)) in blocks
                    .iter_mut()
                    .zip(&mut self.modes)
                    .zip(&mut self.buffers)
                    .enumerate()
                {
                    let mut update = specmuon_practical_step(b, m, buf, loss, &self.cfg)?;
                    update.block = i;
                    modes.push(update);
                }
                Ok(StepReport {
                    modes,
                    step_fro: step_norm(&before, blocks),
                    ..StepReport::default()
                })
            }
        }
    }

    fn evals_per_step(&self) -> usize {
        match self.cfg.mode {
            SpecMuonMode::Theory => 2,
            SpecMuonMode::Practical => 1,
        }
    }
}
