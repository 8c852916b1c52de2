use std::path::Path;
use std::process::Command;

use seqtherm_cli::{run_estimate, run_fig2_sweep, run_fisher, run_simulate, run_spectrum, RunConfig, Sampler};

fn small_config(n: usize, trials: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.bath.alpha = 20.0;
    cfg.bath.beta = 10.0;
    cfg.protocol.n = n;
    cfg.run.trials = trials;
    cfg.run.seed = 17;
    cfg.run.beta_lo = 2.0;
    cfg.run.beta_hi = 40.0;
    cfg
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqtherm"))
}

#[test]
fn simulate_is_byte_reproducible() {
    let cfg = small_config(12, 500);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_simulate(&cfg, a.path()).unwrap();
    run_simulate(&cfg, b.path()).unwrap();
    assert_eq!(read(&a.path().join("records.csv")), read(&b.path().join("records.csv")));
    assert_eq!(read(&a.path().join("records.json")), read(&b.path().join("records.json")));

    let mut other = cfg.clone();
    other.run.seed += 1;
    let c = tempfile::tempdir().unwrap();
    run_simulate(&other, c.path()).unwrap();
    assert_ne!(read(&a.path().join("records.csv")), read(&c.path().join("records.csv")));
}

#[test]
fn zero_trials_give_header_only() {
    let dir = tempfile::tempdir().unwrap();
    run_simulate(&small_config(3, 0), dir.path()).unwrap();
    assert_eq!(
        std::fs::read_to_string(dir.path().join("records.csv")).unwrap(),
        "record_id,s_1,s_2,s_3\n"
    );
}

#[test]
fn metadata_echoes_covariance_convention() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_simulate(&small_config(4, 10), dir.path()).unwrap();
    let meta: serde_json::Value = serde_json::from_slice(&read(&out.metadata_path)).unwrap();
    assert_eq!(meta["covariance_convention"], "field_cov = D/2");
    assert_eq!(meta["seed"], 17);
    assert_eq!(meta["bath"]["alpha"], 20.0);
    assert_eq!(meta["protocol"]["n_measurements"], 4);
}

#[test]
fn simulate_then_estimate_recovers_beta() {
    let cfg = small_config(100, 2000);
    let dir = tempfile::tempdir().unwrap();
    let sim = run_simulate(&cfg, dir.path()).unwrap();
    let report = run_estimate(&sim.records_path, &cfg, (cfg.run.beta_lo, cfg.run.beta_hi), dir.path()).unwrap();
    let e = &report.estimate;
    assert!(e.ci[0] < 10.0 && 10.0 < e.ci[1], "β̂ = {} ± {}", e.beta_hat, e.std_error);
    assert!(!e.boundary_warning);
    let json: serde_json::Value = serde_json::from_slice(&read(&dir.path().join("estimate.json"))).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert!(json["estimate"]["beta_hat"].is_f64());
}

#[test]
fn absurd_bounds_raise_boundary_flag() {
    let cfg = small_config(40, 1000);
    let dir = tempfile::tempdir().unwrap();
    let sim = run_simulate(&cfg, dir.path()).unwrap();
    let report = run_estimate(&sim.records_path, &cfg, (200.0, 400.0), dir.path()).unwrap();
    assert!(report.estimate.boundary_warning);
    let json: serde_json::Value = serde_json::from_slice(&read(&dir.path().join("estimate.json"))).unwrap();
    assert_eq!(json["estimate"]["boundary_warning"], true);
}

#[test]
fn malformed_row_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "record_id,s_1,s_2\n0,1,-1\n1,-1,-1\n2,1,2\n").unwrap();
    let err = run_estimate(&path, &small_config(2, 0), (1.0, 50.0), dir.path()).unwrap_err();
    assert!(format!("{err:#}").contains("line 4"), "{err:#}");
    assert_eq!(seqtherm_cli::exit_code(&err), 2);
}

#[test]
fn spectrum_pipeline_writes_lags_and_spectrum() {
    let cfg = small_config(16, 3000);
    let dir = tempfile::tempdir().unwrap();
    let sim = run_simulate(&cfg, dir.path()).unwrap();
    let report = run_spectrum(&sim.records_path, &cfg, dir.path()).unwrap();
    assert!((report.kappa - 4.0).abs() < 1e-4);
    let lags = std::fs::read_to_string(dir.path().join("lags.csv")).unwrap();
    assert!(lags.starts_with("lag,c_hat,se\n"));
    assert_eq!(lags.lines().count(), 17);
    let spec = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(spec.starts_with("omega,power,se\n"));
    assert_eq!(spec.lines().count(), 16 / 2 + 2);
}

#[test]
fn fisher_report_has_schema_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fisher(&RunConfig::default(), dir.path()).unwrap();
    assert!(out.monte_carlo.is_none());
    let json: serde_json::Value = serde_json::from_slice(&read(&dir.path().join("precision_report.json"))).unwrap();
    let r = &json["report"];
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["input"]["beta"], 100.0);
    assert_eq!(r["diagnostics"]["flags"]["equator"], true);
    assert_eq!(r["diagnostics"]["flags"]["window_equals_t2"], true);

    let mut off = small_config(6, 2000);
    off.protocol.theta = 0.6;
    let out = run_fisher(&off, dir.path()).unwrap();
    assert!(out.report.fisher_sequential.is_none());
    assert!(out.monte_carlo.unwrap().fisher > 0.0);
}

#[test]
fn fig2_identity_between_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fig2_sweep(&RunConfig::default(), 2000, dir.path()).unwrap();
    let pref = 2.0 * ((-2.0f64).exp() - (-4.0f64).exp());
    for (r, c) in out.enhancement.iter().zip(&out.ncor) {
        assert!((r - pref * c).abs() <= 4.0 * f64::EPSILON * r.abs().max(1e-300));
    }
    let text = std::fs::read_to_string(dir.path().join("ncor.csv")).unwrap();
    assert_eq!(text.lines().count(), out.ns.len() + 1);
    assert!(text.starts_with("N,n_cor\n1,"));
}

#[test]
fn exact_sampler_respects_capacity() {
    let mut cfg = small_config(4, 100);
    cfg.run.sampler = Sampler::Exact;
    let dir = tempfile::tempdir().unwrap();
    run_simulate(&cfg, dir.path()).unwrap();
    cfg.protocol.n = 12;
    cfg.run.exact_max = 8;
    let err = run_simulate(&cfg, dir.path()).unwrap_err();
    assert_eq!(seqtherm_cli::exit_code(&err), 4);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = bin().args(["fig2", "--n-max", "500", "--out"]).arg(d).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(d.join("lag_ratio.csv").exists());

    let bad = d.join("bad.toml");
    std::fs::write(&bad, "[bath]\nalpah = 0.1\n").unwrap();
    let out = bin().arg("fisher").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));

    let out = bin().args(["simulate", "--beta-lo", "5", "--beta-hi", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let cap = d.join("cap.toml");
    std::fs::write(&cap, "[protocol]\nn = 12\n[run]\nsampler = \"exact\"\nexact_max = 6\n").unwrap();
    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&cap)
        .arg("--out")
        .arg(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    let off = d.join("off.toml");
    std::fs::write(&off, "[protocol]\nn = 12\ntheta = 0.5\n").unwrap();
    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&off)
        .args(["--trials", "50", "--out"])
        .arg(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = bin()
        .arg("spectrum")
        .arg(d.join("records.csv"))
        .arg("--config")
        .arg(&off)
        .arg("--out")
        .arg(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
