use std::path::PathBuf;
use std::process::Command;

fn dmpp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dmpp"))
}

fn scenarios() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn bundled_scenarios_validate() {
    let out = dmpp().arg("validate").args(scenarios()).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert_eq!(
        text.lines().filter(|l| l.starts_with("ok")).count(),
        scenarios().len()
    );
}

#[test]
fn compare_writes_trajectories_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let scene = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/fig3.toml");
    let out = dmpp()
        .args([
            "compare",
            "--against",
            "goal-filter",
            "--dump-debug",
            "--out-dir",
        ])
        .arg(dir.path())
        .arg(&scene)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [
        "fig3-dmpp.csv",
        "fig3-dmpp.metrics.json",
        "fig3-dmpp.debug.json",
        "fig3-classical_goal_filter.csv",
        "fig3.summary.json",
    ] {
        assert!(dir.path().join(file).is_file(), "missing {file}");
    }
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("fig3.summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn broken_scenario_fails_with_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("broken.toml");
    std::fs::write(&scene, "schema_version = 2\nname = \"broken\"\n").unwrap();
    let out = dmpp()
        .arg("run")
        .arg("--out-dir")
        .arg(dir.path())
        .arg(&scene)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("broken.error.json")).unwrap(),
    )
    .unwrap();
    assert!(!report["error"].as_str().unwrap().is_empty());
}

#[test]
fn train_then_bench() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo.csv");
    let mut text = String::from("t,y1\n");
    for i in 0..200 {
        let u = i as f64 / 199.0;
        text += &format!("{u},{}\n", u * u * (3.0 - 2.0 * u));
    }
    std::fs::write(&demo, text).unwrap();
    let model = dir.path().join("model.json");
    let out = dmpp()
        .arg("train")
        .arg(&demo)
        .arg("--out")
        .arg(&model)
        .args(["--kernels", "15"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(model.is_file());

    let out = dmpp()
        .args([
            "bench",
            "--kernels",
            "10,20",
            "--dofs",
            "2",
            "--steps",
            "50",
            "--warmup",
            "5",
            "--json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert!(report["exponent"].is_number());
}
