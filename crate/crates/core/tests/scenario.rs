use std::path::Path;

use paramp_core::scenario::{exit_code_for, run_scenario, RunOverrides, RunStatus, Scenario};
use serde_json::json;

fn run(doc: serde_json::Value, dir: &Path, workers: Option<usize>) -> paramp_core::scenario::RunSummary {
    let sc = Scenario::from_value(doc).expect("valid scenario");
    let over = RunOverrides {
        output_dir: Some(dir.to_path_buf()),
        workers,
        rel_tol: None,
    };
    run_scenario(&sc, &over).expect("run completes")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn undamped_trajectory_has_mirror_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let s = run(json!({ "preset": "fig2", "options": { "periods": 3000, "samples": 30 } }), dir.path(), None);
    assert_eq!(s.status, RunStatus::Ok);
    let (h, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(h.len(), 1 + 10 + 4);
    assert_eq!(rows.len(), 31);
    let v: Vec<usize> = ["v1", "v2", "v3", "v4"].iter().map(|c| column(&h, c)).collect();
    for row in &rows {
        let x: Vec<f64> = v.iter().map(|&i| row[i].parse().unwrap()).collect();
        assert!((x[0] * x[3] - 1.0 / 16.0).abs() < 1e-6, "{x:?}");
        assert!((x[1] * x[2] - 1.0 / 16.0).abs() < 1e-6, "{x:?}");
    }
    let last: f64 = rows.last().unwrap()[v[3]].parse().unwrap();
    assert!(last > 1.0, "{last}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&s.manifest).unwrap()).unwrap();
    assert_eq!(manifest["action"], "trajectory");
    assert_eq!(manifest["status"], "ok");
}

#[test]
fn stronger_damping_gives_shallower_squeezing() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "preset": "fig3b",
        "series": [
            { "label": "k5", "params": { "gamma_hz": 5e3, "kappa_hz": 5e3 } },
            { "label": "k50", "params": { "gamma_hz": 5e4, "kappa_hz": 5e4 } },
            { "label": "k200", "params": { "gamma_hz": 2e5, "kappa_hz": 2e5 } }
        ],
        "sweep": { "start": 0.5e9, "stop": 1.0e9, "points": 2 }
    });
    let s = run(doc, dir.path(), Some(2));
    assert_eq!(s.status, RunStatus::Ok);
    let (h, rows) = read_csv(&dir.path().join("steady_state.csv"));
    let (ser, var, db) = (column(&h, "series"), column(&h, "lambda_hz"), column(&h, "s_sqz_db"));
    for x in ["500000000.0", "1000000000.0"] {
        let at = |label: &str| -> f64 {
            rows.iter()
                .find(|r| r[ser] == label && r[var] == x)
                .map(|r| r[db].parse().unwrap())
                .unwrap()
        };
        let (a, b, c) = (at("k5"), at("k50"), at("k200"));
        assert!(a < b && b < c && c < 0.0, "{x}: {a} {b} {c}");
    }
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let doc = json!({
        "preset": "bandwidth",
        "sweep": { "start": 2.4985e9, "stop": 2.5015e9, "points": 7 }
    });
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    run(doc.clone(), one.path(), Some(1));
    run(doc, four.path(), Some(4));
    let a = std::fs::read(one.path().join("bandwidth.csv")).unwrap();
    let b = std::fs::read(four.path().join("bandwidth.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

fn overflow_sweep(values: &[f64]) -> serde_json::Value {
    json!({
        "name": "overflow",
        "action": "rate-vs-amplitude",
        "params": { "gamma_hz": 0.0, "kappa_hz": 0.0 },
        "sweep": { "values": values },
        "options": { "duration_s": 4e-4, "samples": 50 }
    })
}

#[test]
fn failing_rows_make_a_partial_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = run(overflow_sweep(&[1e8, 1e9]), dir.path(), None);
    assert_eq!(s.status, RunStatus::Partial);
    assert_eq!(s.status.exit_code(), 3);
    assert_eq!((s.rows, s.failed_rows), (2, 1));
    let (h, rows) = read_csv(&dir.path().join("rates.csv"));
    let st = column(&h, "status");
    assert_eq!(rows[0][st], "ok");
    assert_ne!(rows[1][st], "ok");
}

#[test]
fn all_rows_failing_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let s = run(overflow_sweep(&[0.9e9, 1e9]), dir.path(), None);
    assert_eq!(s.status, RunStatus::Failed);
    assert_eq!(s.status.exit_code(), 2);
}

#[test]
fn undamped_rate_ignores_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "action": "rate-vs-temperature",
        "params": { "gamma_hz": 0.0, "kappa_hz": 0.0 },
        "sweep": { "values": [0.001, 1.0, 300.0] },
        "options": { "duration_s": 5e-7, "samples": 40 }
    });
    run(doc, dir.path(), None);
    let (h, rows) = read_csv(&dir.path().join("rates.csv"));
    let r = column(&h, "rate_db_per_us");
    let rates: Vec<f64> = rows.iter().map(|row| row[r].parse().unwrap()).collect();
    for x in &rates {
        assert!((x - rates[0]).abs() < 1e-9 * rates[0].abs(), "{rates:?}");
    }
}

#[test]
fn config_errors_carry_a_key_path() {
    let err = Scenario::from_json_str(r#"{"action": "trajectory", "params": {"g_hz": "big"}}"#).unwrap_err();
    assert!(err.to_string().contains("params.g_hz"), "{err}");
    assert_eq!(exit_code_for(&err), 1);

    let err = Scenario::from_json_str(r#"{"action": "trajectory", "params": {"gee_hz": 1}}"#).unwrap_err();
    assert!(err.to_string().contains("gee_hz"), "{err}");

    let err = Scenario::from_json_str(r#"{"preset": "nope"}"#).unwrap_err();
    assert_eq!(exit_code_for(&err), 1);
}

#[test]
fn single_point_and_invalid_sweeps_are_rejected() {
    let one = Scenario::from_value(json!({ "action": "rate-vs-amplitude", "sweep": { "values": [1e9] } }));
    let one = one.and_then(|sc| run_scenario(&sc, &RunOverrides::default()));
    assert!(matches!(one, Err(e) if exit_code_for(&e) == 1));

    let dir = tempfile::tempdir().unwrap();
    let neg = Scenario::from_value(json!({
        "action": "rate-vs-temperature",
        "sweep": { "values": [1.0, -1.0] }
    }))
    .unwrap();
    let over = RunOverrides {
        output_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let err = run_scenario(&neg, &over).unwrap_err();
    assert_eq!(exit_code_for(&err), 1);
}

#[test]
fn power_action_reports_both_directions() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "action": "power",
        "options": { "power": { "conversion_factor": 252e6, "units": "hz", "lambda_hz": 5e8 } }
    });
    let s = run(doc, dir.path(), None);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("power.json")).unwrap()).unwrap();
    let w = v["watts"].as_f64().unwrap();
    assert!(w > 3.9 && w < 4.0, "{v}");
    assert_eq!(s.status, RunStatus::Ok);
}
