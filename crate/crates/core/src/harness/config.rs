use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::linalg::DEFAULT_NS_ITERS;
use crate::optimizers::{
    Adam, AdamConfig, Gd, Muon, Optimizer, PredictorPower, Rsav, Sav, SpecMuon, SpecMuonConfig, SpecMuonMode,
};
use crate::problems::ProblemSpec;

/// Optimizer names understood by [`OptimizerSpec::build`].
pub const OPTIMIZER_NAMES: [&str; 7] = ["gd", "adam", "adamw", "muon", "sav", "rsav", "specmuon"];

/// One optimizer entry of a run configuration. Keys that do not apply to the
/// named optimizer are ignored; missing keys take that optimizer's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub name: String,
    /// Output label; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Learning rate, or the step `h` for SAV and RSAV.
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtop: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sav_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<SpecMuonMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor_power: Option<u32>,
}

impl OptimizerSpec {
    pub fn new(name: &str, lr: f64) -> Self {
        Self {
            name: name.to_string(),
            label: None,
            lr,
            betas: None,
            weight_decay: None,
            momentum: None,
            rtop: None,
            sav_eta: None,
            psi: None,
            kappa: None,
            eps: None,
            ns_iters: None,
            mode: None,
            predictor_power: None,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    fn adam_config(&self) -> AdamConfig {
        let d = AdamConfig::default();
        let [beta1, beta2] = self.betas.unwrap_or([d.beta1, d.beta2]);
        AdamConfig {
            lr: self.lr,
            beta1,
            beta2,
            eps: self.eps.unwrap_or(d.eps),
            weight_decay: self.weight_decay.unwrap_or(0.0),
        }
    }

    pub fn specmuon_config(&self) -> Result<SpecMuonConfig, HarnessError> {
        let base = match self.mode.unwrap_or(SpecMuonMode::Practical) {
            SpecMuonMode::Theory => SpecMuonConfig::theory(self.lr, 2),
            SpecMuonMode::Practical => SpecMuonConfig::practical(self.lr, 2),
        };
        let predictor_power = match self.predictor_power {
            Some(p) => PredictorPower::from_exponent(p)?,
            None => base.predictor_power,
        };
        let cfg = SpecMuonConfig {
            momentum: self.momentum.unwrap_or(base.momentum),
            rtop: self.rtop.unwrap_or(base.rtop),
            sav_eta: self.sav_eta.unwrap_or(base.sav_eta),
            psi: self.psi.unwrap_or(base.psi),
            kappa: self.kappa.unwrap_or(base.kappa),
            eps: self.eps.unwrap_or(base.eps),
            predictor_power,
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Energy shift the optimizer runs with, for SAV-type methods.
    pub fn kappa(&self) -> Option<f64> {
        match self.name.as_str() {
            "sav" | "rsav" => Some(self.kappa.unwrap_or(1.0)),
            "specmuon" => self.specmuon_config().ok().map(|c| c.kappa),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Optimizer>, HarnessError> {
        Ok(match self.name.as_str() {
            "gd" => {
                if !(self.lr > 0.0) {
                    return Err(HarnessError::Config(format!("gd: lr {} must be positive", self.lr)));
                }
                Box::new(Gd { lr: self.lr })
            }
            "adam" => Box::new(Adam::adam(self.adam_config())?),
            "adamw" => Box::new(Adam::adamw(self.adam_config())?),
            "muon" => Box::new(Muon::new(
                self.lr,
                self.momentum.unwrap_or(0.0),
                self.ns_iters.unwrap_or(DEFAULT_NS_ITERS),
            )?),
            "sav" => Box::new(Sav::new(self.lr, self.kappa.unwrap_or(1.0))?),
            "rsav" => Box::new(Rsav::new(self.lr, self.kappa.unwrap_or(1.0), self.psi.unwrap_or(0.95))?),
            "specmuon" => Box::new(SpecMuon::new(self.specmuon_config()?)?),
            other => return Err(HarnessError::UnknownOptimizer(other.to_string())),
        })
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_threshold() -> f64 {
    1e-6
}

/// A full run description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub check_theorems: bool,
    #[serde(default = "default_true")]
    pub plot: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Relative suboptimality `(f − f*) / (f₀ − f*)` that counts as reached
    /// (plain `f / f₀` when `f*` is unknown).
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Record per-step wall time. Off by default so output files are
    /// reproducible byte for byte.
    #[serde(default)]
    pub wall_clock: bool,
    pub problem: ProblemSpec,
    pub optimizers: Vec<OptimizerSpec>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.iterations == 0 {
            return Err(HarnessError::Config("iterations must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        if self.optimizers.is_empty() {
            return Err(HarnessError::Config("optimizers must not be empty".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(HarnessError::Config(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        let mut labels = std::collections::BTreeSet::new();
        for o in &self.optimizers {
            o.build()?;
            if !labels.insert(o.label()) {
                return Err(HarnessError::Config(format!(
                    "duplicate optimizer label {:?}",
                    o.label()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
iterations = 50
seeds = [1, 2]

[problem]
kind = "quadratic"
isotropic = true

[[optimizers]]
name = "specmuon"
lr = 0.1
mode = "theory"
rtop = 5

[[optimizers]]
name = "adamw"
lr = 5e-3
betas = [0.9, 0.999]
weight_decay = 5e-4
"#;

    #[test]
    fn parses_sample() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert!(cfg.plot);
        let sm = cfg.optimizers[0].specmuon_config().unwrap();
        assert_eq!(sm.mode, SpecMuonMode::Theory);
        assert_eq!(sm.rtop, 5);
        assert_eq!(sm.kappa, 1.0);
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_optimizer_names_the_offender() {
        let text = SAMPLE.replace("\"adamw\"", "\"lion\"");
        match RunConfig::from_toml(&text) {
            Err(HarnessError::UnknownOptimizer(name)) => assert_eq!(name, "lion"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_optimizer_list_is_rejected() {
        let text = "iterations = 5\noptimizers = []\n[problem]\nkind = \"mlp\"\n";
        assert!(matches!(RunConfig::from_toml(text), Err(HarnessError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SAMPLE.replace("rtop = 5", "rtop = 5\ntop_k = 3");
        assert!(RunConfig::from_toml(&text).is_err());
    }
}
