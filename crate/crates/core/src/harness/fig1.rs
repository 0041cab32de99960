//! Adam, AdamW, Muon and SpecMuon (`rtop = 2`) on the default least-squares
//! instance, each at the best point of a small hyperparameter grid.

use std::path::Path;

use serde::Serialize;

use super::output::{self, Curve};
use super::{file_stem, loss_plot_svg, records_to_csv, run_single, HarnessError, OptimizerSpec, RunOptions};
use crate::problems::{gradient_gate, Problem, ProblemSpec};

/// Iteration budget of every grid point.
pub const FIG1_ITERATIONS: usize = 5000;

/// Target relative suboptimality `(f − f*) / (f₀ − f*)`.
pub const FIG1_THRESHOLD: f64 = 1e-6;

const ADAM_LR: [f64; 4] = [0.01, 5e-3, 1e-3, 5e-4];
const ADAMW_WD: [f64; 5] = [0.0, 0.01, 1e-3, 5e-4, 1e-4];
const MUON_LR: [f64; 4] = [0.1, 0.05, 0.02, 5e-3];
const MUON_MOMENTUM: [f64; 5] = [0.0, 0.02, 1e-3, 1e-4, 5e-4];
const SPECMUON_LR: [f64; 4] = [0.1, 0.05, 0.01, 3e-3];
const SPECMUON_MOMENTUM: [f64; 6] = [0.9, 0.01, 0.02, 1e-3, 1e-4, 5e-4];

/// The searched configurations, grouped by optimizer, in search order.
pub fn fig1_grid() -> Vec<(&'static str, Vec<OptimizerSpec>)> {
    let adam = ADAM_LR.iter().map(|&lr| OptimizerSpec::new("adam", lr)).collect();
    let adamw = ADAM_LR
        .iter()
        .flat_map(|&lr| {
            ADAMW_WD.iter().map(move |&wd| OptimizerSpec {
                weight_decay: Some(wd),
                ..OptimizerSpec::new("adamw", lr)
            })
        })
        .collect();
    let muon = MUON_LR
        .iter()
        .flat_map(|&lr| {
            MUON_MOMENTUM.iter().map(move |&m| OptimizerSpec {
                momentum: Some(m),
                ..OptimizerSpec::new("muon", lr)
            })
        })
        .collect();
    let specmuon = SPECMUON_LR
        .iter()
        .flat_map(|&lr| {
            SPECMUON_MOMENTUM.iter().map(move |&m| OptimizerSpec {
                momentum: Some(m),
                rtop: Some(2),
                sav_eta: Some(0.2),
                ..OptimizerSpec::new("specmuon", lr)
            })
        })
        .collect();
    vec![("adam", adam), ("adamw", adamw), ("muon", muon), ("specmuon", specmuon)]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1Entry {
    pub optimizer: String,
    pub best: OptimizerSpec,
    pub iterations_to_threshold: Option<usize>,
    /// Loss at the end of the best configuration's search run.
    pub final_loss: f64,
    pub configs_tried: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1Report {
    pub seed: u64,
    pub initial_loss: f64,
    pub f_star: f64,
    pub threshold: f64,
    pub entries: Vec<Fig1Entry>,
    /// SpecMuon reached the threshold no later than the best Adam and the
    /// best AdamW.
    pub specmuon_fastest: bool,
}

impl Fig1Report {
    pub fn entry(&self, optimizer: &str) -> Option<&Fig1Entry> {
        self.entries.iter().find(|e| e.optimizer == optimizer)
    }
}

fn search(problem: &dyn Problem, seed: u64) -> Result<Vec<Fig1Entry>, HarnessError> {
    let opts = RunOptions {
        threshold: FIG1_THRESHOLD,
        wall_clock: false,
        stop_at_threshold: true,
    };
    let mut entries = Vec::new();
    for (name, grid) in fig1_grid() {
        let mut best: Option<Fig1Entry> = None;
        for spec in &grid {
            let res = run_single(problem, spec, seed, FIG1_ITERATIONS, &opts)?;
            let key =
                |it: Option<usize>, f: f64| (it.unwrap_or(usize::MAX), if f.is_finite() { f } else { f64::INFINITY });
            let better = match &best {
                None => true,
                Some(b) => {
                    let (bi, bf) = key(b.iterations_to_threshold, b.final_loss);
                    let (ci, cf) = key(res.iterations_to_threshold, res.final_loss);
                    ci < bi || (ci == bi && cf < bf)
                }
            };
            if better {
                best = Some(Fig1Entry {
                    optimizer: name.to_string(),
                    best: spec.clone(),
                    iterations_to_threshold: res.iterations_to_threshold,
                    final_loss: res.final_loss,
                    configs_tried: grid.len(),
                });
            }
        }
        entries.extend(best);
    }
    Ok(entries)
}

/// Grid search only; nothing is written.
pub fn fig1_search(seed: u64) -> Result<Fig1Report, HarnessError> {
    let problem = ProblemSpec::default_least_squares().build(seed)?;
    gradient_gate(problem.as_ref(), seed, 20, 1e-6)?;
    let entries = search(problem.as_ref(), seed)?;
    let iters = |name: &str| {
        entries
            .iter()
            .find(|e| e.optimizer == name)
            .and_then(|e| e.iterations_to_threshold)
            .unwrap_or(usize::MAX)
    };
    let spec = entries
        .iter()
        .find(|e| e.optimizer == "specmuon")
        .and_then(|e| e.iterations_to_threshold);
    let specmuon_fastest = spec.is_some_and(|s| s <= iters("adam") && s <= iters("adamw"));
    Ok(Fig1Report {
        seed,
        initial_loss: problem.loss(&problem.init_params(seed))?,
        f_star: problem.constants().f_star.unwrap_or(f64::NAN),
        threshold: FIG1_THRESHOLD,
        entries,
        specmuon_fastest,
    })
}

/// Grid search, then full-length runs of each winner written to
/// `{optimizer}_seed{seed}.csv`, plus `fig1.json` and `loss.svg`.
pub fn reproduce_fig1(seed: u64, out: &Path) -> Result<Fig1Report, HarnessError> {
    let report = fig1_search(seed)?;
    let problem = ProblemSpec::default_least_squares().build(seed)?;
    let opts = RunOptions {
        threshold: FIG1_THRESHOLD,
        ..RunOptions::default()
    };
    let mut curves = Vec::new();
    for e in &report.entries {
        let res = run_single(problem.as_ref(), &e.best, seed, FIG1_ITERATIONS, &opts)?;
        let path = out.join(format!("{}_seed{}.csv", file_stem(&e.optimizer), seed));
        output::write_file(&path, &records_to_csv(&res.records))?;
        curves.push(Curve {
            label: format!("{} (lr {})", e.optimizer, e.best.lr),
            losses: res.records.iter().map(|r| r.loss).collect(),
        });
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    output::write_file(&out.join("fig1.json"), &json)?;
    output::write_file(&out.join("loss.svg"), &loss_plot_svg("Least squares", &curves))?;
    Ok(report)
}
