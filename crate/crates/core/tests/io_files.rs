mod common;

use common::{any_model, fixture_path};
use mjpc_core::io::{csv_body, load_model, parse_model_str, run_compare, save_model, IoError, RunConfig};
use mjpc_core::perturbation::enumerate_classes;
use proptest::prelude::*;
use std::fs;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn save_then_load_is_bitwise(m in any_model(6), toml in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if toml { "m.toml" } else { "m.json" });
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        prop_assert_eq!(back.q.matrix(), m.q.matrix());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.f_raw.values()), bits(m.f_raw.values()));
        prop_assert_eq!(bits(back.f.values()), bits(m.f.values()));
        prop_assert_eq!(bits(back.nu.weights()), bits(m.nu.weights()));
        prop_assert_eq!(bits(back.pi.weights()), bits(m.pi.weights()));
        prop_assert_eq!(back.labels, m.labels);
    }
}

#[test]
fn loads_fixture_files() {
    let m = load_model(&fixture_path("two_state.json")).unwrap();
    assert_eq!(m.labels, ["a", "b"]);
    assert!((m.pi.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
    let c = load_model(&fixture_path("three_cycle.toml")).unwrap();
    assert_eq!(c.seed, Some(17));
    assert_eq!(c.nu.weights(), [0.2, 0.3, 0.5]);
    assert_eq!(c.labels, ["x", "y", "z"]);
}

#[test]
fn negative_rate_names_the_entry() {
    let err = load_model(&fixture_path("negative_rate.json")).unwrap_err();
    match &err {
        IoError::Validation { field, .. } => assert_eq!(field, "q[1][2]"),
        other => panic!("unexpected error {other:?}"),
    }
    assert!(err.to_string().contains("q[1][2]"));
}

#[test]
fn malformed_input_reports_position() {
    let err = parse_model_str("{\"q\": [[-1, 1], [1, -1]],\n \"f\": [1, }", false, "bad.json").unwrap_err();
    assert!(matches!(err, IoError::Parse { .. }));
    assert!(err.to_string().contains("line 2"), "{err}");
    let err = parse_model_str("q = [[-1, 1], [1, -1]]\nf = [1]", true, "short.toml").unwrap_err();
    assert!(matches!(err, IoError::Validation { .. }), "{err}");
    assert!(load_model(std::path::Path::new("/nonexistent/model.json")).is_err());
}

#[test]
fn unlabeled_states_get_default_names() {
    let m = parse_model_str("q = [[-1, 1], [1, -1]]\nf = [1, -1]", true, "x.toml").unwrap();
    assert_eq!(m.labels.len(), 2);
    assert_ne!(m.labels[0], m.labels[1]);
}

fn small_config(dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::new(fixture_path("three_cycle.toml"), vec![1.0, 4.0], vec![0.1, 0.3, 0.6]);
    cfg.samples = 300;
    cfg.seed = 5;
    cfg.out_dir = dir.to_path_buf();
    cfg.timestamp = false;
    cfg
}

#[test]
fn empty_grids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.u_grid.clear();
    assert!(matches!(run_compare(&cfg), Err(IoError::Config(_))));
    let mut cfg = small_config(dir.path());
    cfg.t_values.clear();
    assert!(matches!(run_compare(&cfg), Err(IoError::Config(_))));
}

#[test]
fn resume_completes_a_partial_run() {
    let full = tempfile::tempdir().unwrap();
    let cfg = small_config(full.path());
    let summary = run_compare(&cfg).unwrap();
    assert_eq!(summary.cells_written, 6);
    let reference = fs::read_to_string(cfg.csv_path()).unwrap();
    assert!(!reference.starts_with('#'));

    // keep the header plus the first four rows, then resume
    let part = tempfile::tempdir().unwrap();
    let mut cfg2 = small_config(part.path());
    let kept: String = reference.lines().take(5).map(|l| format!("{l}\n")).collect();
    fs::write(cfg2.csv_path(), kept).unwrap();
    cfg2.resume = true;
    let summary2 = run_compare(&cfg2).unwrap();
    assert_eq!(summary2.cells_resumed, 4);
    assert_eq!(summary2.cells_written, 2);
    assert_eq!(fs::read_to_string(cfg2.csv_path()).unwrap(), reference);

    // resuming a finished run does nothing
    let summary3 = run_compare(&cfg2).unwrap();
    assert_eq!(summary3.cells_written, 0);
    assert_eq!(fs::read_to_string(cfg2.csv_path()).unwrap(), reference);
}

#[test]
fn timestamp_is_a_comment_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.timestamp = true;
    run_compare(&cfg).unwrap();
    let text = fs::read_to_string(cfg.csv_path()).unwrap();
    assert!(text.starts_with("# generated"));
    let body = csv_body(&cfg.csv_path()).unwrap();
    assert!(body.starts_with("u,t,n,hits"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(cfg.summary_path()).unwrap()).unwrap();
    assert_eq!(summary["u_grid"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_parses_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "model = \"m.json\"\nt_values = [1.0]\nu_grid = [0.2]\nfamilies = [\"general\", \"poincare\"]\n").unwrap();
    let cfg = RunConfig::from_toml_file(&path).unwrap();
    assert_eq!(cfg.samples, 10_000);
    assert_eq!(cfg.families.len(), 2);
    assert!(cfg.timestamp);
}

#[test]
fn two_step_compositions() {
    // weak compositions of 1 into 2 parts: (1,0) and (0,1) form one rotation class
    let classes = enumerate_classes(2).unwrap();
    assert_eq!(classes.len(), 1);
    let total: usize = classes.iter().map(|c| c.size).sum();
    assert_eq!(total, 2);
    assert_eq!(classes[0].zeros, 1);
}
