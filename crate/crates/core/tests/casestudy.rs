use grsreach::casestudy::{run_scenario, RunOptions, ScenarioId};
use grsreach::config::{ConfigError, RunConfig, RunError};
use grsreach::synthesizer::{DiagnosticsReport, Termination, Variant};

#[test]
fn artifacts_are_complete_and_consistent() {
    let run = run_scenario(ScenarioId::B, 120.0, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = run.write_artifacts(dir.path(), None).unwrap();
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        [
            "scenario.csv",
            "control.csv",
            "grs.csv",
            "reference.csv",
            "diag.json",
            "cycles.jsonl"
        ]
    );

    let traj = std::fs::read_to_string(dir.path().join("scenario.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("t,x1,x2,u1,u2"));
    assert_eq!(traj.lines().count(), run.result.trajectory.len() + 1);

    let control = std::fs::read_to_string(dir.path().join("control.csv")).unwrap();
    assert_eq!(control.lines().next(), Some("t_start,t_end,u1,u2"));
    assert_eq!(control.lines().count(), 3 * run.result.cycles() + 1);

    let grs = std::fs::read_to_string(dir.path().join("grs.csv")).unwrap();
    assert_eq!(grs.lines().count(), 361);

    let jsonl = std::fs::read_to_string(dir.path().join("cycles.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), run.result.cycles());
    for line in jsonl.lines().take(3) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("lambda").is_some() && v.get("bound_c").is_some());
    }

    let diag: DiagnosticsReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("diag.json")).unwrap()).unwrap();
    assert_eq!(diag.cycles, run.result.cycles());
    assert_eq!(diag.termination, Termination::TargetRadius);
    assert_eq!(diag.runtime_s, None);
    assert_eq!(diag.params.dt, 0.0005);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let a = run_scenario(ScenarioId::B, 300.0, &RunOptions::default()).unwrap();
    let b = run_scenario(ScenarioId::B, 300.0, &RunOptions::default()).unwrap();
    assert_eq!(a.result.trajectory, b.result.trajectory);
    assert_eq!(a.result.final_error.to_bits(), b.result.final_error.to_bits());
}

#[test]
fn variant_override_and_recommendation() {
    let auto = run_scenario(ScenarioId::B, 30.0, &RunOptions::default()).unwrap();
    assert_eq!(auto.result.variant, Variant::Algorithm1);
    let opts = RunOptions {
        variant: Some(Variant::Algorithm2),
        ..RunOptions::default()
    };
    let fin = run_scenario(ScenarioId::B, 30.0, &opts).unwrap();
    assert_eq!(fin.result.variant, Variant::Algorithm2);
    assert_eq!(fin.result.termination, Termination::HorizonReached);
    assert!(fin.result.gamma.is_some());
}

#[test]
fn config_run_matches_scenario_run() {
    let cfg = RunConfig::parse("scenario = B\nangle = 210\n").unwrap();
    let from_cfg = cfg.run().unwrap();
    let direct = run_scenario(ScenarioId::B, 210.0, &RunOptions::default()).unwrap();
    assert_eq!(from_cfg.result.final_state, direct.result.final_state);
    assert_eq!(from_cfg.result.cycles(), direct.result.cycles());
}

#[test]
fn config_errors_are_reported() {
    let missing = RunConfig::load(std::path::Path::new("/nonexistent/run.cfg"));
    assert!(matches!(missing, Err(ConfigError::Io { .. })));
    let cfg = RunConfig::parse("system = affine\nd = 2\nm = 2\n").unwrap();
    assert!(matches!(cfg.run(), Err(RunError::Config(_))));
}
