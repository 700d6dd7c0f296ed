//! In-process pipeline runs: artifact shapes, manifest determinism, and
//! failure bookkeeping.

mod common;

use std::path::Path;

use disagg_cli::config::{load_config, Overrides};
use disagg_cli::pipeline::{run, stages_for, Action};
use disagg_cli::report::Manifest;

fn run_action(dir: &Path, config_body: &str, n_months: usize, action: Action) -> Manifest {
    let path = common::setup(dir, config_body, n_months);
    let config = load_config(&path, &Overrides::default()).unwrap();
    run(&config, &stages_for(action)).unwrap()
}

fn read_out(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(rel)).unwrap()
}

#[test]
fn full_run_writes_every_stage_and_reruns_byte_identically() {
    let body = common::config_body(42, r#"["chow_lin", "elastic_net"]"#, "[0, 1]", "ma5");
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let manifest = run_action(dir_a.path(), &body, 126, Action::All);
    run_action(dir_b.path(), &body, 126, Action::All);

    assert_eq!(
        manifest.completed_stages,
        ["preprocess", "evaluate", "dm", "disaggregate", "explain", "theory"]
    );
    assert!(manifest.failed_stage.is_none());
    assert!(manifest.master_sha256.is_some());

    // the recorded artifacts exist and cover all stages
    for rel in [
        "preprocess/monthly_indicators.csv",
        "preprocess/quarterly_indicators.csv",
        "preprocess/gdp_growth.csv",
        "preprocess/adf.csv",
        "evaluate/summary.csv",
        "evaluate/steps_chow_lin_lag0.csv",
        "evaluate/steps_elastic_net_lag1.csv",
        "evaluate/hyperparams.json",
        "dm/dm_tests.csv",
        "disaggregate/selection.csv",
        "disaggregate/model.json",
        "disaggregate/monthly_gdp.csv",
        "disaggregate/adjustment_factors.csv",
        "disaggregate/diagnostics.csv",
        "explain/attributions.csv",
        "explain/ranking.csv",
        "theory/regime.csv",
        "theory/ridge_curve.csv",
        "theory/verdicts.txt",
    ] {
        assert!(manifest.artifacts.contains_key(rel), "missing {rel}");
        assert!(dir_a.path().join("out").join(rel).exists(), "missing file {rel}");
    }

    // summary: one row per (model, lag) cell plus the header
    let summary = read_out(dir_a.path(), "evaluate/summary.csv");
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(summary.starts_with("country,model,lag,rmse"));

    // identical config and inputs in a different directory: identical bytes
    assert_eq!(
        read_out(dir_a.path(), "manifest.json"),
        read_out(dir_b.path(), "manifest.json")
    );
    for rel in manifest.artifacts.keys() {
        assert_eq!(
            std::fs::read(dir_a.path().join("out").join(rel)).unwrap(),
            std::fs::read(dir_b.path().join("out").join(rel)).unwrap(),
            "artifact {rel} differs between identical runs"
        );
    }

    // verdicts cover both propositions
    let verdicts = read_out(dir_a.path(), "theory/verdicts.txt");
    assert!(verdicts.contains("proposition 1:"));
    assert!(verdicts.contains("proposition 2:"));
}

#[test]
fn changing_the_seed_changes_the_manifest() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let models = r#"["elastic_net"]"#;
    run_action(
        dir_a.path(),
        &common::config_body(1, models, "[0]", "ma5"),
        126,
        Action::Evaluate,
    );
    run_action(
        dir_b.path(),
        &common::config_body(2, models, "[0]", "ma5"),
        126,
        Action::Evaluate,
    );
    let a = read_out(dir_a.path(), "manifest.json");
    let b = read_out(dir_b.path(), "manifest.json");
    assert_ne!(a, b);
}

#[test]
fn both_reconciliation_modes_hit_their_targets() {
    for mode in ["ma5", "denton"] {
        let dir = tempfile::tempdir().unwrap();
        let body = common::config_body(9, r#"["chow_lin"]"#, "[1]", mode);
        run_action(dir.path(), &body, 126, Action::Disaggregate);
        let diagnostics = read_out(dir.path(), "disaggregate/diagnostics.csv");
        let after: f64 = diagnostics
            .lines()
            .find(|l| l.starts_with("max_violation_after"))
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert!(after < 1e-9, "{mode}: residual violation {after}");

        let monthly = read_out(dir.path(), "disaggregate/monthly_gdp.csv");
        // monthly rows: 126 months minus the differencing row minus 3 lag
        // months, plus the header
        assert_eq!(monthly.lines().count(), 1 + 126 - 1 - 3);
    }
}

#[test]
fn failures_are_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let body = common::config_body(3, r#"["chow_lin"]"#, "[0]", "ma5");
    let path = common::setup(dir.path(), &body, 90);
    std::fs::remove_file(dir.path().join("master.csv")).unwrap();

    let config = load_config(&path, &Overrides::default()).unwrap();
    let err = run(&config, &stages_for(Action::Evaluate)).unwrap_err();
    assert_eq!(err.exit_code(), 1);

    let manifest: Manifest =
        serde_json::from_str(&read_out(dir.path(), "manifest.json")).unwrap();
    assert!(manifest.completed_stages.is_empty());
    let failed = manifest.failed_stage.unwrap();
    assert_eq!(failed.stage, "preprocess");
    assert!(failed.error.contains("master.csv"), "{}", failed.error);
    assert!(manifest.master_sha256.is_none());
}

#[test]
fn cli_overrides_flow_into_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let body = common::config_body(5, r#"["chow_lin"]"#, "[0]", "ma5");
    let path = common::setup(dir.path(), &body, 90);
    let overrides = Overrides {
        seed: Some(77),
        out_dir: Some("elsewhere".to_string()),
        country: Some("demo".to_string()),
    };
    let config = load_config(&path, &overrides).unwrap();
    let manifest = run(&config, &stages_for(Action::Preprocess)).unwrap();
    assert_eq!(manifest.seed, 77);
    assert_eq!(manifest.country, "demo");
    assert!(dir.path().join("elsewhere/manifest.json").exists());
    assert!(!dir.path().join("out").exists());
}
