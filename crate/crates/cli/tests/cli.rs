use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use extremal_kpca::stats::auto_scree_m;
use extremal_kpca::theory::DavisKahanOutcome;
use extremal_kpca_cli::config::{DavisKahanConfig, RatesConfig, RawConfig};
use extremal_kpca_cli::{run_davis_kahan, run_rate_validation};
use nalgebra::DMatrix;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_extremal-kpca"));
    c.env_remove("EXTREMAL_KPCA_OUTPUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn csv_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

fn raw(pairs: &[(&str, &str)]) -> RawConfig {
    let mut r = RawConfig::default();
    for (k, v) in pairs {
        r.set(k, *v);
    }
    r
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["generate", "--n", "ten"]).status.code(), Some(1));
    assert_eq!(run(&["generate", "--set", "colour=blue"]).status.code(), Some(1));
    assert_eq!(run(&["rates", "--set", "exceedances=100,50"]).status.code(), Some(1));
    assert_eq!(run(&["kpca", "--gamma", "-1"]).status.code(), Some(1));
    assert_eq!(run(&["kpca", "--config", "/nonexistent/config.txt"]).status.code(), Some(1));

    // a regular file where the output directory should go
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = run(&["generate", "--n", "100", "--extremes", "10", "--output-dir", blocker.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn lfm_preimage_table_has_one_row_per_extreme() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["preimage", "--seed", "3", "--output-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(&dir.path().join("preimages.csv"));
    assert_eq!(lines[0], "source_index,p1,p2,p3,p4,iterations,converged,objective");
    assert_eq!(lines.len(), 201);
    let ext = csv_lines(&dir.path().join("extremes.csv"));
    assert_eq!(ext[0], "source_index,label,radius,y1,y2,y3,y4");
    assert_eq!(ext.len(), 201);
    assert_eq!(csv_lines(&dir.path().join("scree.csv"))[0], "index,eigenvalue");
    for f in ["scree.svg", "scatter.svg", "run.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    // generate stops early and adds the full sample
    let gen_dir = tempfile::tempdir().unwrap();
    let out = run(&["generate", "--n", "500", "--extremes", "20", "--output-dir", gen_dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(csv_lines(&gen_dir.path().join("samples.csv")).len(), 501);
    assert!(!gen_dir.path().join("scree.csv").exists());
}

#[test]
fn flags_override_config_file_and_env_sets_default_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# circle study\nmodel = circle\nn = 2000\nextremes = 50\nseed = 9\n").unwrap();
    let env_dir = dir.path().join("from-env");
    let out = bin()
        .args(["kpca", "--config", cfg.to_str().unwrap(), "--extremes", "30"])
        .env("EXTREMAL_KPCA_OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ext = csv_lines(&env_dir.join("extremes.csv"));
    assert_eq!(ext.len(), 31);
    assert_eq!(ext[0], "source_index,label,radius,y1,y2,y3,y4,y5");
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(env_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 9);
    assert_eq!(record["config"]["extremes"], "30");
    assert_eq!(record["command"], "kpca");
    assert_eq!(record["schema_version"], 1);
}

#[test]
fn auto_scree_rank_follows_the_written_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["kpca", "--m", "auto-scree", "--output-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eigenvalues: Vec<f64> = csv_lines(&dir.path().join("scree.csv"))[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let m = auto_scree_m(&eigenvalues);
    assert!(eigenvalues[m - 1] / eigenvalues[m] > 2.0);
    let svg = fs::read_to_string(dir.path().join("scree.svg")).unwrap();
    assert!(svg.contains(&format!("m = {m})")));
}

#[test]
fn rate_validation_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let r = raw(&[
        ("n", "20000"),
        ("replicates", "3"),
        ("exceedances", "800,400,200,100"),
        ("output_dir", dir.path().to_str().unwrap()),
    ]);
    let report = run_rate_validation(&RatesConfig::from_raw(&r).unwrap(), &r).unwrap();
    assert_eq!(report.check.u_grid.len(), 4);
    let rates = csv_lines(&dir.path().join("rates.csv"));
    assert_eq!(rates[0], "u,replicate,frobenius,scaled_statistic");
    assert_eq!(rates.len(), 1 + 4 * 3);
    let summary = csv_lines(&dir.path().join("summary.csv"));
    assert!(summary[0].starts_with("regime,expected_slope,fitted_slope,pass"));
    assert!(summary[1].starts_with("intermediate,-1,"));
}

#[test]
fn davis_kahan_rows_and_degenerate_flags() {
    let dir = tempfile::tempdir().unwrap();
    let r = raw(&[("n", "20000"), ("extremes", "100"), ("replicates", "4"), ("output_dir", dir.path().to_str().unwrap())]);
    let report = run_davis_kahan(&DavisKahanConfig::from_raw(&r).unwrap(), &r).unwrap();
    assert_eq!(report.tally(), (4, 4));
    let rows = csv_lines(&dir.path().join("dk.csv"));
    assert_eq!(rows[0], "replicate,bound,aligned_residual,gap,satisfied");
    assert_eq!(rows.len(), 5);

    // two factors leave no gap after the second eigenvalue
    let r = raw(&[("n", "20000"), ("extremes", "100"), ("replicates", "2"), ("m", "3"), ("output_dir", dir.path().to_str().unwrap())]);
    let report = run_davis_kahan(&DavisKahanConfig::from_raw(&r).unwrap(), &r).unwrap();
    assert_eq!(report.tally(), (0, 0));
    assert!(csv_lines(&dir.path().join("dk.csv"))[1].ends_with(",n/a"));
}

#[test]
fn zero_perturbation_gives_zero_bound_and_residual() {
    let c0 = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.2]);
    let out = DavisKahanOutcome::from_matrices(&c0, &DMatrix::zeros(3, 3), 2).unwrap();
    assert_eq!(out.bound, Some(0.0));
    assert!(out.residual < 1e-12);
    assert_eq!(out.satisfied, Some(true));
}
