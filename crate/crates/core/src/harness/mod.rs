//! Experiment harness: configuration, the run loop, ledger/summary/plot output,
//! the least-squares comparison and the `rtop` sweep.

mod config;
mod fig1;
mod output;
mod run;
mod sweep;

pub use config::{OptimizerSpec, RunConfig, OPTIMIZER_NAMES};
pub use fig1::{fig1_grid, fig1_search, reproduce_fig1, Fig1Entry, Fig1Report, FIG1_ITERATIONS, FIG1_THRESHOLD};
pub use output::{loss_plot_svg, records_to_csv, Curve, CSV_HEADER};
pub use run::{run_single, RunOptions, RunResult, TheoremTally};
pub use sweep::{sweep_rtop, SweepReport, SweepRow};

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::optimizers::OptimError;
use crate::problems::{gradient_gate, ProblemError, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown optimizer {0:?}")]
    UnknownOptimizer(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

/// Per-optimizer aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerSummary {
    pub label: String,
    pub name: String,
    pub final_loss_mean: f64,
    pub final_loss_std: f64,
    /// Per seed, in `seeds` order.
    pub iterations_to_threshold: Vec<Option<usize>>,
    pub diverged_seeds: Vec<u64>,
    pub theorems: TheoremTally,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub problem: ProblemSpec,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub threshold: f64,
    pub check_theorems: bool,
    pub optimizers: Vec<OptimizerSummary>,
    /// Diverged runs, plus theorem violations when checks are enabled.
    pub failures: Vec<String>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: Summary,
    pub runs: Vec<RunResult>,
}

pub(crate) fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Seed-averaged loss curve over the iterations every seed reached.
pub(crate) fn mean_curve(label: &str, runs: &[&RunResult]) -> Curve {
    let len = runs.iter().map(|r| r.records.len()).min().unwrap_or(0);
    let losses = (0..len)
        .map(|k| runs.iter().map(|r| r.records[k].loss).sum::<f64>() / runs.len() as f64)
        .collect();
    Curve {
        label: label.to_string(),
        losses,
    }
}

/// Runs every optimizer on every seed. Each seed draws its own problem
/// instance, which must pass the finite-difference gate first. With `out`,
/// writes `{label}_seed{seed}.csv`, `summary.json` and, if enabled,
/// `loss.svg`.
pub fn run_experiment(cfg: &RunConfig, out: Option<&Path>) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let opts = RunOptions {
        threshold: cfg.threshold,
        wall_clock: cfg.wall_clock,
        stop_at_threshold: false,
    };
    let mut runs = Vec::with_capacity(cfg.seeds.len() * cfg.optimizers.len());
    for &seed in &cfg.seeds {
        let problem = cfg.problem.build(seed)?;
        gradient_gate(problem.as_ref(), seed, 20, 1e-6)?;
        for spec in &cfg.optimizers {
            let res = run_single(problem.as_ref(), spec, seed, cfg.iterations, &opts)?;
            if let Some(dir) = out {
                let path = dir.join(format!("{}_seed{}.csv", file_stem(spec.label()), seed));
                output::write_file(&path, &records_to_csv(&res.records))?;
            }
            runs.push(res);
        }
    }
    let mut failures = Vec::new();
    let mut summaries = Vec::new();
    let mut curves = Vec::new();
    for spec in &cfg.optimizers {
        let mine: Vec<&RunResult> = runs.iter().filter(|r| r.label == spec.label()).collect();
        let mut tally = TheoremTally::default();
        for r in &mine {
            tally.merge(&r.tally);
            if let Some(why) = &r.diverged {
                failures.push(format!("{} seed {}: diverged ({why})", r.label, r.seed));
            }
            if cfg.check_theorems && r.tally.failures() > 0 {
                failures.push(format!(
                    "{} seed {}: {} dissipation, {} positivity, {} descent violations",
                    r.label, r.seed, r.tally.dissipation_failed, r.tally.positivity_failed, r.tally.descent_failed
                ));
            }
        }
        let finals: Vec<f64> = mine.iter().map(|r| r.final_loss).filter(|f| f.is_finite()).collect();
        let (mean, std) = mean_std(&finals);
        summaries.push(OptimizerSummary {
            label: spec.label().to_string(),
            name: spec.name.clone(),
            final_loss_mean: mean,
            final_loss_std: std,
            iterations_to_threshold: mine.iter().map(|r| r.iterations_to_threshold).collect(),
            diverged_seeds: mine.iter().filter(|r| r.diverged.is_some()).map(|r| r.seed).collect(),
            theorems: tally,
        });
        curves.push(mean_curve(spec.label(), &mine));
    }
    let summary = Summary {
        problem: cfg.problem.clone(),
        iterations: cfg.iterations,
        seeds: cfg.seeds.clone(),
        threshold: cfg.threshold,
        check_theorems: cfg.check_theorems,
        optimizers: summaries,
        failures,
    };
    if let Some(dir) = out {
        output::write_file(&dir.join("summary.json"), &summary.to_json())?;
        if cfg.plot {
            output::write_file(&dir.join("loss.svg"), &loss_plot_svg("Training loss", &curves))?;
        }
    }
    Ok(ExperimentOutcome { summary, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_optimizers_three_seeds_write_six_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_toml(
            r#"
iterations = 20
seeds = [0, 1, 2]
check_theorems = true
[problem]
kind = "quadratic"
[[optimizers]]
name = "gd"
lr = 0.5
[[optimizers]]
name = "rsav"
lr = 0.5
"#,
        )
        .unwrap();
        let outcome = run_experiment(&cfg, Some(dir.path())).unwrap();
        let mut csv = 0;
        let mut json = 0;
        for e in std::fs::read_dir(dir.path()).unwrap() {
            let name = e.unwrap().file_name().into_string().unwrap();
            csv += usize::from(name.ends_with(".csv"));
            json += usize::from(name.ends_with(".json"));
        }
        assert_eq!((csv, json), (6, 1));
        assert!(outcome.summary.passed());
        let text = std::fs::read_to_string(dir.path().join("gd_seed1.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 21);
        assert!(outcome.summary.optimizers[1].theorems.dissipation_checked == 60);
    }
}
