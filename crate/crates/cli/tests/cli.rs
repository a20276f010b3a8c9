use std::path::Path;
use std::process::{Command, Output};

use osfde_cli::emit::result_table_from_json;

fn osfde(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osfde"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

#[test]
fn weights_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = osfde(&["weights", "--alpha", "1.5", "--count", "4"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,g,w");
    assert_eq!(lines.len(), 6);
    let w0: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((w0 - 0.75).abs() < 1e-15);
}

#[test]
fn convergence_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "problem = example1\nalpha = 1.5\nh_exp = -5..-6\ntau_exp = -8\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let out = osfde(&["--config", cfg, "convergence"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,beta,h_exp,tau_exp,solver,iter_mean,cpu_s,error,rate");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.5,,-5,-8,pgmres-t,"));
    assert!(lines[1].ends_with(','));

    let json = dir.path().join("out.json");
    let out = osfde(
        &["--config", cfg, "--format", "json", "--out", json.to_str().unwrap(), "convergence"],
        dir.path(),
    );
    assert!(out.status.success());
    let table = result_table_from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 2);
    let rate = table.rows[1].rate.unwrap();
    assert!(rate > 1.8 && rate < 2.3, "rate {rate}");
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = osfde(&["--set", "alpha=2.5", "--set", "problem=example1", "convergence"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = osfde(&["--set", "nonsense=1", "convergence"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectral_reports_violated_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let out = osfde(
        &["--set", "problem=example1", "--set", "alpha=1.5", "--set", "h_exp=-5", "--set", "tau_exp=-5", "spectral"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().ends_with(",false"));
}
