use std::fs;
use std::process::Command;

fn vcslab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vcslab"))
}

#[test]
fn lists_bundled_configs() {
    let out = vcslab().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "example1-susy-qm",
        "boson-example2",
        "resolution-eds",
        "susy-grid-linear",
    ] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn bundled_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = vcslab()
        .args(["run", "boson-example2", "--jobs", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], "vcslab-report/1");
    assert_eq!(json["passed"], true);
    assert!(json["checks"].as_array().unwrap().len() > 5);
    assert!(fs::read_to_string(out.join("summary.txt"))
        .unwrap()
        .contains("overall: PASS"));
}

#[test]
fn expected_failure_demo_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dz");
    let status = vcslab()
        .args(["run", "delta-zero-failure", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("cross_entry.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = vcslab::config::bundled("example2")
        .unwrap()
        .replace("dim = 80", "dim = 4");
    let path = dir.path().join("small.toml");
    fs::write(&path, text).unwrap();
    let status = vcslab()
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = vcslab().args(["run", "no-such-config"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn failing_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[tolerances]\nh_tau = 1e-300\n",
        vcslab::config::bundled("example1-susy-qm").unwrap()
    );
    let path = dir.path().join("strict.toml");
    fs::write(&path, text).unwrap();
    let out = dir.path().join("o");
    let status = vcslab().arg("run").arg(&path).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(fs::read_to_string(out.join("summary.txt"))
        .unwrap()
        .contains("overall: FAIL"));
}
