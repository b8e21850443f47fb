use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_paramp-sim"))
}

#[test]
fn power_command_converts_both_ways() {
    let out = bin()
        .args(["power", "--cp", "0.75", "--units", "mt", "--watts", "9"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["lambda_hz"].as_f64().unwrap() - 63e6).abs() < 1.0);

    let out = bin()
        .args(["power", "--cp", "252e6", "--units", "hz", "--lambda-hz", "5e8"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let w = v["watts"].as_f64().unwrap();
    assert!(w > 3.9 && w < 4.0);

    let out = bin()
        .args(["power", "--cp", "1", "--units", "hz", "--watts", "1", "--lambda-hz", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn presets_are_listed_and_shown() {
    let out = bin().arg("presets").output().unwrap();
    let names = String::from_utf8(out.stdout).unwrap();
    for n in ["fig2", "fig3a", "fig3b", "fig4", "fig5", "noise300k", "bandwidth", "room-epr"] {
        assert!(names.lines().any(|l| l == n), "{n}");
    }
    let out = bin().args(["preset", "fig5", "--show"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["action"], "protocol");
}

#[test]
fn preset_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["preset", "noise300k", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("noise_report.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"action": "trajectory", "params": {"g_hz": -1}, "options": {"sampels": 3}}"#).unwrap();
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampels"));

    let out = bin().args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn partial_sweep_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    std::fs::write(
        &path,
        r#"{
  "action": "rate-vs-amplitude",
  "params": { "gamma_hz": 0, "kappa_hz": 0 },
  "sweep": { "values": [1e8, 1e9] },
  "options": { "duration_s": 4e-4, "samples": 50 }
}"#,
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("out/rates.csv").exists());
}
