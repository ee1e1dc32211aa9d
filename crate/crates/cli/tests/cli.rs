use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cbf_synth_cli::ConfigFile;

const ALL: [&str; 5] = [
    "cartpole-position",
    "cartpole-angle",
    "quadrotor-z-only",
    "quadrotor-ellipse",
    "double-integrator",
];

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

fn run(args: &[&str], config: &Path, dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbf-synth"))
        .args(&args[..1])
        .arg("--config")
        .arg(config)
        .args(&args[1..])
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn shipped_configs_round_trip() {
    for name in ALL {
        let cfg = ConfigFile::load(&config_path(name)).unwrap();
        let again = ConfigFile::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

#[test]
fn unknown_keys_are_rejected_with_location() {
    let text = std::fs::read_to_string(config_path("double-integrator")).unwrap();
    let bad = text.replace("[gains]\n", "[gains]\nmu_typo = 3.0\n");
    let err = ConfigFile::parse(&bad).unwrap_err().to_string();
    assert!(err.contains("mu_typo") && err.contains("line"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, bad).unwrap();
    let out = run(&["synthesize"], &path, dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu_typo"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["check-degree"], &dir.path().join("missing.toml"), dir.path());
    assert_eq!(code(&out), 2);

    let text = std::fs::read_to_string(config_path("cartpole-position")).unwrap();
    let path = dir.path().join("unknown-model.toml");
    std::fs::write(&path, text.replace("name = \"cartpole\"", "name = \"unicycle\"")).unwrap();
    assert_eq!(code(&run(&["synthesize"], &path, dir.path())), 2);

    let path = dir.path().join("bad-index.toml");
    std::fs::write(&path, text.replace("indices = [0]", "indices = [7]")).unwrap();
    assert_eq!(code(&run(&["check-degree"], &path, dir.path())), 2);
}

#[test]
fn check_degree_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, expected) in [("cartpole-position", 0), ("cartpole-angle", 1), ("quadrotor-z-only", 1)] {
        let out = run(&["check-degree"], &config_path(name), dir.path());
        assert_eq!(code(&out), expected, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["rank_ok"], expected == 0);
    }
}

#[test]
fn synthesize_exit_codes_and_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    for (name, expected) in [("quadrotor-ellipse", 0), ("double-integrator", 0), ("quadrotor-z-only", 1)] {
        let out_path = dir.path().join(format!("{name}.json"));
        let out = run(&["synthesize", "--out", out_path.to_str().unwrap()], &config_path(name), dir.path());
        assert_eq!(code(&out), expected, "{name}");
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
        assert_eq!(report["passed"], expected == 0);
        if expected == 1 {
            assert_eq!(report["failed_stage"], "rank");
        }
    }

    let text = std::fs::read_to_string(config_path("quadrotor-ellipse")).unwrap();
    let wide = dir.path().join("wide.toml");
    std::fs::write(&wide, text.replace("theta_max_rad = 1.0", "theta_max_rad = 1.6")).unwrap();
    let out = run(&["synthesize"], &wide, dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank"));
}

#[test]
fn simulate_writes_csv_summary_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let summary = dir.path().join("run.json");
    let out = run(
        &[
            "simulate",
            "--csv",
            csv.to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
            "--horizon",
            "1",
        ],
        &config_path("cartpole-position"),
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,x3,x4,u_des1,u_safe1,h,psi,active");
    assert_eq!(lines.count(), 1001);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert!(report["invariance"]["min_h"].as_f64().unwrap() >= -1e-3);
    assert!(dir.path().join("run.plot.py").exists());
}

#[test]
fn unfiltered_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--no-filter"], &config_path("cartpole-position"), dir.path());
    assert_eq!(code(&out), 1);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["invariance"]["min_psi"].as_f64().unwrap() < 0.0);
}

#[test]
fn z_only_cannot_be_simulated() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate"], &config_path("quadrotor-z-only"), dir.path());
    assert_eq!(code(&out), 1);
}
