use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use specmuon_core::harness::{reproduce_fig1, sweep_rtop, HarnessError, RunConfig};
use specmuon_core::run_experiment;

/// Overrides every subcommand's output directory.
const OUT_DIR_ENV: &str = "SPECMUON_OUT_DIR";

#[derive(Parser)]
#[command(name = "specmuon", version, about = "Optimizer benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every optimizer in a config over its seeds and write CSV/JSON/SVG.
    Run { config: PathBuf },
    /// Grid-tuned Adam, AdamW, Muon and SpecMuon on the default least-squares instance.
    Fig1 {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out/fig1")]
        out: PathBuf,
    },
    /// Run the config's specmuon entry once per rtop value and rank the results.
    RtopSweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
    /// Theorem checks only; nothing is written.
    Check { config: PathBuf },
}

fn out_dir(default: PathBuf) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or(default, PathBuf::from)
}

fn report_failures(failures: &[String]) -> ExitCode {
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("{} failure(s):", failures.len());
    for f in failures {
        eprintln!("  {f}");
    }
    ExitCode::from(1)
}

fn execute(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let dir = out_dir(cfg.output_dir.clone());
            let outcome = run_experiment(&cfg, Some(&dir))?;
            print!("{}", outcome.summary.to_json());
            println!("wrote {}", dir.display());
            Ok(report_failures(&outcome.summary.failures))
        }
        Command::Fig1 { seed, out } => {
            let dir = out_dir(out);
            let report = reproduce_fig1(seed, &dir)?;
            println!("seed {seed}: f0 = {:e}, f* = {:e}", report.initial_loss, report.f_star);
            for e in &report.entries {
                let iters = e
                    .iterations_to_threshold
                    .map_or_else(|| "not reached".to_string(), |k| k.to_string());
                println!("{:<9} lr {:<7} iterations {iters}", e.optimizer, e.best.lr);
            }
            println!("specmuon fastest: {}", report.specmuon_fastest);
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::RtopSweep { config, values } => {
            let cfg = RunConfig::load(&config)?;
            let dir = out_dir(cfg.output_dir.clone());
            let report = sweep_rtop(&cfg, &values, Some(&dir))?;
            print!("{}", report.table());
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { config } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.check_theorems = true;
            let outcome = run_experiment(&cfg, None)?;
            for o in &outcome.summary.optimizers {
                let t = &o.theorems;
                println!(
                    "{}: dissipation {}/{}, positivity {}/{}, descent {}/{}",
                    o.label,
                    t.dissipation_checked - t.dissipation_failed,
                    t.dissipation_checked,
                    t.positivity_checked - t.positivity_failed,
                    t.positivity_checked,
                    t.descent_checked - t.descent_failed,
                    t.descent_checked,
                );
            }
            Ok(report_failures(&outcome.summary.failures))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
