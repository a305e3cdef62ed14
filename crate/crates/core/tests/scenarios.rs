use std::path::PathBuf;
use std::process::Command;

use polycbf::scenario::{logged_barrier, run_scenario, FilterMode, Overrides, RunSummary, ScenarioConfig, Trajectory};

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let mut cfg = ScenarioConfig::load(path).unwrap();
    cfg.output_dir = None;
    cfg
}

fn short(name: &str, duration: f64) -> ScenarioConfig {
    let mut cfg = config(name);
    cfg.duration = duration;
    cfg
}

#[test]
fn runs_are_bit_identical() {
    for name in ["vehicles_kappa5.json", "vehicles_baseline_10.json", "crane_filtered.json"] {
        let cfg = short(name, 2.0);
        let (a, _) = run_scenario(&cfg).unwrap();
        let (b, _) = run_scenario(&cfg).unwrap();
        assert_eq!(a.len(), cfg.step_count() + 1);
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.state, y.state, "{name} at t = {}", x.time);
            assert_eq!(x.filtered, y.filtered);
        }
    }
}

#[test]
fn logged_barrier_matches_the_state_columns() {
    for name in ["vehicles_kappa1.json", "crane_filtered.json"] {
        let cfg = short(name, 3.0);
        let (traj, _) = run_scenario(&cfg).unwrap();
        for step in traj.steps.iter().step_by(97) {
            let recomputed = logged_barrier(&cfg, &step.state).unwrap();
            assert!((recomputed - step.h_hat).abs() <= 1e-12, "{name} at t = {}", step.time);
        }
    }
}

#[test]
fn outputs_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short("vehicles_kappa5.json", 1.0);
    cfg.apply(&Overrides {
        output_dir: Some(dir.path().to_path_buf()),
        ..Overrides::default()
    });
    let (traj, summary) = run_scenario(&cfg).unwrap();
    let back = Trajectory::load_csv(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(back.header(), traj.header());
    for (a, b) in back.steps.iter().zip(&traj.steps) {
        assert_eq!(a.state, b.state);
        assert_eq!(a.h_hat.to_bits(), b.h_hat.to_bits());
    }
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let read: RunSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(read.steps, summary.steps);
    assert_eq!(read.min_h_s, summary.min_h_s);
}

#[test]
fn unfiltered_run_passes_nominal_input_through() {
    let (traj, summary) = run_scenario(&short("vehicles_nominal.json", 2.5)).unwrap();
    assert_eq!(summary.filter_mode, FilterMode::Off);
    assert!(summary.first_filter_activation.is_none());
    for s in &traj.steps {
        assert_eq!(s.nominal, s.filtered);
        assert!(s.eta.iter().all(|e| e.is_nan()));
    }
    let t = summary.first_collision_time.unwrap();
    assert!((1.6..=2.2).contains(&t));
}

#[test]
fn only_active_steps_modify_the_input() {
    let (traj, _) = run_scenario(&short("vehicles_kappa5.json", 3.0)).unwrap();
    for s in traj.steps.iter().filter(|s| s.active.iter().any(|&a| a)) {
        assert_ne!(s.nominal, s.filtered);
    }
    for s in traj.steps.iter().filter(|s| s.active.iter().all(|&a| !a)) {
        assert_eq!(s.nominal, s.filtered);
    }
}

#[test]
fn invalid_settings_are_rejected() {
    let mut cfg = short("vehicles_kappa5.json", 1.0);
    cfg.dt = 0.0;
    assert!(run_scenario(&cfg).is_err());
    let mut cfg = short("crane_filtered.json", 1.0);
    cfg.filter.mode = FilterMode::Baseline(10);
    assert!(run_scenario(&cfg).is_err());
    assert!(ScenarioConfig::from_json_str("{\"name\": 3}", std::path::Path::new(".")).is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polycbf"))
}

#[test]
fn cli_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/vehicles_kappa1.json");
    let out = cli()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .args(["--dt", "2e-3", "--filter", "baseline:15"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: RunSummary = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary.filter_mode, FilterMode::Baseline(15));
    assert_eq!(summary.steps, 5001);
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn cli_verify_small_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["verify", "--seed", "3", "--counts"])
        .arg("pose_pairs=500,polygon_pairs=50,smooth_states=2000,gradient_states=50,jacobian_states=50,filter_instances=50,crane_states=50,point_queries=20")
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")));
    assert!(dir.path().join("verify.json").exists());
    assert!(!stdout.contains("[FAIL] h_a"), "{stdout}");
}

#[test]
fn cli_reports_bad_config() {
    let out = cli().args(["run", "does/not/exist.json"]).output().unwrap();
    assert!(!out.status.success());
}
