use std::path::Path;
use std::process::{Command, Output};

fn specmuon(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specmuon"))
        .args(args)
        .env("SPECMUON_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const QUADRATIC: &str = r#"
iterations = 50
seeds = [0, 1]
[problem]
kind = "quadratic"
[[optimizers]]
name = "specmuon"
mode = "theory"
lr = 0.05
rtop = 3
[[optimizers]]
name = "rsav"
lr = 0.5
"#;

#[test]
fn run_writes_ledgers_summary_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), QUADRATIC);
    let res = specmuon(&["run", &cfg], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for name in [
        "specmuon_seed0.csv",
        "specmuon_seed1.csv",
        "rsav_seed0.csv",
        "rsav_seed1.csv",
        "summary.json",
        "loss.svg",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let csv = std::fs::read_to_string(out.join("rsav_seed1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
}

#[test]
fn check_passes_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), QUADRATIC);
    let res = specmuon(&["check", &cfg], &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("dissipation 100/100"));
    assert!(!out.exists());
}

#[test]
fn divergence_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "iterations = 2000\n[problem]\nkind = \"quadratic\"\nisotropic = true\n[[optimizers]]\nname = \"gd\"\nlr = 3.0\n",
    );
    let res = specmuon(&["check", &cfg], tmp.path());
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("diverged"));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &QUADRATIC.replace("\"rsav\"", "\"lion\""));
    let res = specmuon(&["run", &cfg], tmp.path());
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("lion"));

    let res = specmuon(&["run", "/nonexistent/cfg.toml"], tmp.path());
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn rtop_sweep_ranks_each_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "iterations = 30\n[problem]\nkind = \"least_squares\"\n[[optimizers]]\nname = \"specmuon\"\nlr = 0.05\n",
    );
    let res = specmuon(&["rtop-sweep", &cfg, "--values", "0,2,4,6"], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table = String::from_utf8_lossy(&res.stdout);
    assert_eq!(
        table
            .lines()
            .filter(|l| l.trim_start().starts_with(char::is_numeric))
            .count(),
        4
    );
    assert!(out.join("rtop_ranking.json").is_file());
    assert!(out.join("specmuon_rtop6_seed0.csv").is_file());

    let res = specmuon(&["rtop-sweep", &cfg, "--values", "9"], &out);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            specmuon_core::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
