use std::path::Path;

use serde::Serialize;

use super::output;
use super::{mean_std, run_experiment, HarnessError, RunConfig, RunResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rank: usize,
    pub rtop: usize,
    pub label: String,
    pub final_loss_mean: f64,
    pub final_loss_std: f64,
    /// Seeds that reached the threshold.
    pub reached: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    /// Sorted by mean final loss.
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub runs: Vec<RunResult>,
}

impl SweepReport {
    pub fn table(&self) -> String {
        let mut s = String::from("rank  rtop  final_loss_mean  final_loss_std  reached\n");
        for r in &self.rows {
            s += &format!(
                "{:>4}  {:>4}  {:>15.6e}  {:>14.6e}  {:>7}\n",
                r.rank, r.rtop, r.final_loss_mean, r.final_loss_std, r.reached
            );
        }
        s
    }
}

/// Runs the config's first `specmuon` entry once per `rtop` value, labelled
/// `specmuon_rtop{k}`, over the config's seeds.
pub fn sweep_rtop(cfg: &RunConfig, rtop_values: &[usize], out: Option<&Path>) -> Result<SweepReport, HarnessError> {
    let base = cfg
        .optimizers
        .iter()
        .find(|o| o.name == "specmuon")
        .ok_or_else(|| HarnessError::Config("rtop sweep needs a specmuon optimizer entry".into()))?;
    if rtop_values.is_empty() {
        return Err(HarnessError::Config("no rtop values given".into()));
    }
    let problem = cfg.problem.build(cfg.seeds[0])?;
    let limit = problem.param_shapes().iter().map(|&(r, c)| r.min(c)).min().unwrap_or(0);
    if let Some(bad) = rtop_values.iter().find(|&&k| k > limit) {
        return Err(HarnessError::Config(format!(
            "rtop {bad} exceeds the smallest block dimension {limit}"
        )));
    }
    let optimizers = rtop_values
        .iter()
        .map(|&k| {
            let mut spec = base.clone();
            spec.rtop = Some(k);
            spec.label = Some(format!("specmuon_rtop{k}"));
            spec
        })
        .collect();
    let sweep_cfg = RunConfig {
        optimizers,
        ..cfg.clone()
    };
    let outcome = run_experiment(&sweep_cfg, out)?;
    let mut rows: Vec<SweepRow> = rtop_values
        .iter()
        .zip(&outcome.summary.optimizers)
        .map(|(&rtop, s)| {
            let finals: Vec<f64> = outcome
                .runs
                .iter()
                .filter(|r| r.label == s.label)
                .map(|r| r.final_loss)
                .filter(|f| f.is_finite())
                .collect();
            let (mean, std) = mean_std(&finals);
            SweepRow {
                rank: 0,
                rtop,
                label: s.label.clone(),
                final_loss_mean: mean,
                final_loss_std: std,
                reached: s.iterations_to_threshold.iter().flatten().count(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
        key(a.final_loss_mean)
            .total_cmp(&key(b.final_loss_mean))
            .then(a.rtop.cmp(&b.rtop))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    let report = SweepReport {
        rows,
        runs: outcome.runs,
    };
    if let Some(dir) = out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        output::write_file(&dir.join("rtop_ranking.json"), &json)?;
    }
    Ok(report)
}
