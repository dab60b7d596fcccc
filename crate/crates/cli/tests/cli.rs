use std::path::Path;
use std::process::{Command, Output};

fn grsreach(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grsreach"))
        .args(args)
        .env("GRSREACH_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config_path(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

const ARTIFACTS: [&str; 6] = [
    "scenario.csv",
    "control.csv",
    "grs.csv",
    "reference.csv",
    "diag.json",
    "cycles.jsonl",
];

#[test]
fn synth_scenario_writes_artifacts_under_scenario_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let o = grsreach(&["synth", "--scenario", "A", "--angle", "120"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("termination: target_radius"), "{text}");
    assert!(text.contains("final_error:"));
    for f in ARTIFACTS {
        let p = tmp.path().join("A").join(f);
        assert!(p.is_file(), "missing {}", p.display());
    }
    let diag = std::fs::read_to_string(tmp.path().join("A/diag.json")).unwrap();
    assert!(diag.contains("\"runtime_s\": null"));
    assert!(diag.contains("\"condition_per_cycle\""));
}

#[test]
fn synth_output_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = grsreach(&["synth", "--scenario", "B"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ARTIFACTS {
        let x = std::fs::read(a.path().join("B").join(f)).unwrap();
        let y = std::fs::read(b.path().join("B").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn record_runtime_fills_diag_field() {
    let tmp = tempfile::tempdir().unwrap();
    let o = grsreach(&["synth", "--scenario", "B", "--record-runtime"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let diag = std::fs::read_to_string(tmp.path().join("B/diag.json")).unwrap();
    assert!(!diag.contains("\"runtime_s\": null"));
}

#[test]
fn synth_from_config_files() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["quadrotor_a", "affine_rotation"] {
        let cfg = config_path(&format!("{name}.cfg"));
        let o = grsreach(&["synth", "--config", &cfg], tmp.path());
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(tmp.path().join(name).join("trajectory.csv").is_file());
        assert!(tmp.path().join(name).join("diag.json").is_file());
    }
}

#[test]
fn missing_config_is_usage_error_naming_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.cfg");
    let o = grsreach(&["synth", "--config", missing.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.cfg"), "{}", stderr(&o));
}

#[test]
fn malformed_config_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cfg");
    std::fs::write(&bad, "scenario = A\ncolour = red\n").unwrap();
    let o = grsreach(&["grs", "--config", bad.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["grs", "--scenario", "A", "--samples", "4"],
        vec!["synth", "--scenario", "E"],
        vec!["synth"],
        vec!["synth", "--scenario", "A", "--variant", "3"],
        vec!["grs", "--scenario", "A", "--T", "-1"],
        vec!["batch", "--jobs", "0"],
    ] {
        let o = grsreach(&args, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn grs_reports_radius_range_and_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let o = grsreach(
        &["grs", "--scenario", "A", "--samples", "36", "--T", "0.25"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("min boundary radius:") && text.contains("max boundary radius:"));
    let csv = std::fs::read_to_string(tmp.path().join("A/grs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 37);
}

#[test]
fn target_outside_domain_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = grsreach(&["synth", "--scenario", "A", "--T", "10"], tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn verify_passes_and_injected_tolerance_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = grsreach(&["verify", "--suite", "learner"], tmp.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("PASS"));
    let bad = grsreach(
        &["verify", "--suite", "learner", "--inject-tolerance", "-1"],
        tmp.path(),
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL"));
}

#[test]
fn batch_runs_concurrently_and_keeps_order() {
    let tmp = tempfile::tempdir().unwrap();
    let o = grsreach(
        &["batch", "--scenarios", "B", "--angles", "30,210", "--jobs", "2"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("B      30"));
    assert!(lines[1].starts_with("B     210"));
    assert!(tmp.path().join("B/angle_30/diag.json").is_file());
    assert!(tmp.path().join("B/angle_210/diag.json").is_file());
}
