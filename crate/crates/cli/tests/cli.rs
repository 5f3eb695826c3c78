use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn mjpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mjpc"))
        .args(args)
        .env_remove("MJPC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_reports_stationary_law() {
    let o = mjpc(&["validate", "--model", path_str(&fixture("two_state.json"))]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pi0 = v["pi"][0].as_f64().unwrap();
    assert!((pi0 - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(v["reversible"], true);
}

#[test]
fn invalid_model_exits_with_two() {
    let o = mjpc(&["validate", "--model", path_str(&fixture("negative_rate.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("q[1][2]"));
    let o = mjpc(&["spectrum", "--model", "/does/not/exist.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spectrum_is_json() {
    let o = mjpc(&["spectrum", "--model", path_str(&fixture("two_state.json"))]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["gap"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!((v["sigma_hat_sq"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    assert!((v["variance"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn simulate_is_seeded() {
    let m = fixture("two_state.json");
    let args = ["simulate", "--model", path_str(&m), "--t", "3", "--u", "0:1:5", "--samples", "500", "--seed", "4", "--no-timestamp"];
    let a = mjpc(&args);
    let b = mjpc(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u,t,n,hits,p_hat,ci_lo,ci_hi"));
    assert_eq!(lines.count(), 5);
    let stamped = mjpc(&args[..args.len() - 1]);
    assert!(stdout(&stamped).starts_with("# generated"));
}

#[test]
fn bad_horizon_is_a_validation_error() {
    let m = fixture("two_state.json");
    let o = mjpc(&["simulate", "--model", path_str(&m), "--t", "-1", "--u", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mjpc(&["bounds", "--model", path_str(&m), "--t", "0", "--u-grid", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mjpc(&["bounds", "--model", path_str(&m), "--t", "1", "--u-grid", "0.1", "--families", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rate_and_bounds_tables() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture("three_cycle.toml");
    let rate_csv = dir.path().join("rate.csv");
    let o = mjpc(&["rate", "--model", path_str(&m), "--u-grid", "0.1:0.9:9", "--out", path_str(&rate_csv), "--no-timestamp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&rate_csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "u,lambda0_star,argmax_r,finite_flag");
    assert_eq!(rows.len(), 10);
    let rates: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(rates.windows(2).all(|w| w[0] < w[1]));

    let bounds_csv = dir.path().join("sub/bounds.csv");
    let o = mjpc(&["bounds", "--model", path_str(&m), "--t", "5", "--u-grid", "0.2,0.6", "--families", "general,poincare", "--out", path_str(&bounds_csv), "--no-timestamp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&bounds_csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "u,family,rate,prefactor,bound,branch,notes");
    assert_eq!(rows.len(), 5);
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 7));
}

#[test]
fn series_writes_two_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = mjpc(&["series", "--model", path_str(&fixture("two_state.json")), "--order", "5", "--r-grid", "0.01,0.02", "--out", path_str(dir.path()), "--no-timestamp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let coef = fs::read_to_string(dir.path().join("series_coefficients.csv")).unwrap();
    let second: f64 = coef.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((second - 2.0 / 3.0).abs() < 1e-14);
    let errs = fs::read_to_string(dir.path().join("series_errors.csv")).unwrap();
    assert!(errs.starts_with("r,lambda0,error_1,"));
    assert_eq!(errs.lines().count(), 3);
    let o = mjpc(&["series", "--model", path_str(&fixture("two_state.json")), "--order", "99"]);
    assert_eq!(o.status.code(), Some(2));
}

fn compare_args<'a>(model: &'a str, out: &'a str, threads: &'a str) -> Vec<&'a str> {
    vec![
        "compare", "--model", model, "--t-grid", "1,4", "--u-grid", "0.1,0.4", "--samples", "2000", "--seed", "21",
        "--threads", threads, "--out", out, "--no-timestamp",
    ]
}

#[test]
fn compare_is_thread_count_independent() {
    let m = fixture("three_cycle.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = mjpc(&compare_args(path_str(&m), path_str(a.path()), "1"));
    let ob = mjpc(&compare_args(path_str(&m), path_str(b.path()), "4"));
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    assert!(ob.status.success());
    let ca = fs::read(a.path().join("compare.csv")).unwrap();
    let cb = fs::read(b.path().join("compare.csv")).unwrap();
    assert_eq!(ca, cb);
    assert!(a.path().join("summary.json").exists());
}

#[test]
fn environment_sets_default_threads() {
    let m = fixture("three_cycle.toml");
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--model", path_str(&m), "--t", "1", "--u", "0.1", "--samples", "50"];
    let ok = Command::new(env!("CARGO_BIN_EXE_mjpc")).args(args).env("MJPC_THREADS", "2").output().unwrap();
    assert!(ok.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_mjpc")).args(args).env("MJPC_THREADS", "lots").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    // an explicit flag takes precedence over the environment
    let flag = Command::new(env!("CARGO_BIN_EXE_mjpc"))
        .args(args)
        .args(["--threads", "1", "--out", path_str(&dir.path().join("x.csv"))])
        .env("MJPC_THREADS", "lots")
        .output()
        .unwrap();
    assert!(flag.status.success());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::copy(fixture("two_state.json"), &model).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "model = \"m.json\"\nt_values = [2.0]\nu_grid = [0.3]\nsamples = 100\nseed = 1\nfamilies = [\"general\"]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = mjpc(&["compare", "--config", path_str(&cfg), "--samples", "300", "--out", path_str(&out), "--no-timestamp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["samples"], 300);
    assert_eq!(v["seed"], 1);
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",300,"));
}

#[test]
fn strict_compare_flags_violations() {
    let m = fixture("two_state.json");
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "compare", "--model", path_str(&m), "--t-grid", "1", "--u-grid", "0.1", "--samples", "2000",
        "--out", path_str(dir.path()), "--no-timestamp", "--strict",
    ];
    let ok = mjpc(&base);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    // an absurd assumed log-Sobolev constant produces a bound that cannot hold
    let mut args = base.to_vec();
    args.extend(["--families", "fsobolev", "--log-sobolev", "1000", "--assume-sobolev"]);
    let bad = mjpc(&args);
    assert_eq!(bad.status.code(), Some(4), "{}", String::from_utf8_lossy(&bad.stderr));
}

#[test]
fn compare_rejects_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("model = {:?}\nt_values = [1.0]\nu_grid = []\n", fixture("two_state.json"))).unwrap();
    let o = mjpc(&["compare", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("o/compare.csv").exists());
}
