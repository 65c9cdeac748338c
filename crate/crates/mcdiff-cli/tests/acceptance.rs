//! End-to-end checks of the command line interface: document round-trips,
//! exit codes, CSV output, and the documented conversion identities.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mcdiff")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should launch")
}

fn write_doc(dir: &Path, name: &str, doc: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be JSON")
}

fn ternary_ms_doc() -> Value {
    json!({
        "species": [
            {"name": "n2", "molar_mass": 0.028},
            {"name": "o2", "molar_mass": 0.032},
            {"name": "co2", "molar_mass": 0.044}
        ],
        "state": {"T": 300.0, "rho": 1.2, "y": [0.4, 0.35, 0.25]},
        "closure": {
            "kind": "maxwell-stefan",
            "friction": {
                "n": 3,
                "data": [0.0, 1.3e9, 0.7e9, 1.3e9, 0.0, 1.9e9, 0.7e9, 1.9e9, 0.0]
            }
        }
    })
}

fn matrix_entries(doc: &Value) -> Vec<f64> {
    doc["data"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect()
}

/// Uniform friction `f = 1/dbar` collapses the Onsager matrix to
/// `dbar * R * P`, entrywise `dbar * rho * y_i * (delta_ij - y_j)`.
#[test]
fn uniform_friction_converts_to_scaled_projector() {
    let dir = tempfile::tempdir().unwrap();
    let dbar = 2.0e-9;
    let f = 1.0 / dbar;
    let y = [0.4, 0.35, 0.25];
    let rho = 1.2;
    let doc = json!({
        "species": [
            {"name": "a", "molar_mass": 0.028},
            {"name": "b", "molar_mass": 0.032},
            {"name": "c", "molar_mass": 0.044}
        ],
        "state": {"T": 300.0, "rho": rho, "y": y},
        "closure": {
            "kind": "maxwell-stefan",
            "friction": {"n": 3, "data": [0.0, f, f, f, 0.0, f, f, f, 0.0]}
        }
    });
    let input = write_doc(dir.path(), "uniform.json", &doc);

    let out = run(&["convert", "--input", input.to_str().unwrap(), "--target", "A"]);
    let converted = stdout_json(&out);
    assert_eq!(converted["closure"]["kind"], "fick-onsager");
    let l = matrix_entries(&converted["closure"]["onsager"]);

    let mut expected = vec![0.0_f64; 9];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            expected[3 * i + j] = dbar * rho * y[i] * (delta - y[j]);
        }
    }
    let scale = expected.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    for (got, want) in l.iter().zip(&expected) {
        assert!(
            (got - want).abs() <= 1.0e-12 * scale,
            "entry {got} vs {want}"
        );
    }
    assert!(converted["report"]["flux_residual"].as_f64().unwrap() <= 1.0e-10);
    assert!(converted["report"]["ellipticity"]["ok"].as_bool().unwrap());
}

#[test]
fn ternary_projected_target_zeroes_interaction() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_doc(dir.path(), "ms.json", &ternary_ms_doc());
    let out = run(&["convert", "--input", input.to_str().unwrap(), "--target", "C"]);
    let converted = stdout_json(&out);

    assert_eq!(converted["closure"]["kind"], "core-diagonal");
    let d: Vec<f64> = converted["closure"]["d"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(d.len(), 3);
    assert!(d.iter().all(|&v| v > 0.0));
    // Ternary systems have no interaction part; the emitted block is zero.
    let k = matrix_entries(&converted["closure"]["k"]);
    assert!(k.iter().all(|&v| v == 0.0), "interaction block {k:?}");
}

#[test]
fn binary_projected_target_omits_interaction() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "species": [
            {"name": "he", "molar_mass": 0.004},
            {"name": "ar", "molar_mass": 0.040}
        ],
        "state": {"T": 295.0, "rho": 0.8, "y": [0.55, 0.45]},
        "closure": {
            "kind": "maxwell-stefan",
            "friction": {"n": 2, "data": [0.0, 2.2e9, 2.2e9, 0.0]}
        }
    });
    let input = write_doc(dir.path(), "binary.json", &doc);
    let out = run(&["convert", "--input", input.to_str().unwrap(), "--target", "C"]);
    let converted = stdout_json(&out);

    assert_eq!(converted["closure"]["kind"], "core-diagonal");
    assert!(converted["closure"].get("k").is_none(), "binary form carries no interaction block");
    assert_eq!(converted["closure"]["d"].as_array().unwrap().len(), 2);
}

/// Applying a conversion to its own output must reproduce that output byte
/// for byte; the first application may only rewrite the report block.
#[test]
fn convert_outputs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_doc(dir.path(), "ms.json", &ternary_ms_doc());

    for target in ["A", "B", "C"] {
        let p1 = dir.path().join(format!("t{target}.1.json"));
        let p2 = dir.path().join(format!("t{target}.2.json"));
        let p3 = dir.path().join(format!("t{target}.3.json"));
        for (src, dst) in [(&input, &p1), (&p1, &p2), (&p2, &p3)] {
            let out = run(&[
                "convert",
                "--input",
                src.to_str().unwrap(),
                "--target",
                target,
                "--output",
                dst.to_str().unwrap(),
            ]);
            assert!(
                out.status.success(),
                "target {target}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
        let b2 = std::fs::read(&p2).unwrap();
        let b3 = std::fs::read(&p3).unwrap();
        assert_eq!(b2, b3, "target {target} output drifted on reconversion");
    }
}

#[test]
fn malformed_document_exits_two_with_error_object() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\"species\": [").unwrap();

    let out = run(&["check", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr should be JSON");
    assert_eq!(err["error"]["code"], 2);
    assert!(err["error"]["message"].as_str().unwrap().contains("parse"));

    // Structurally valid JSON with an inconsistent matrix also exits 2.
    let doc = json!({
        "species": [
            {"name": "a", "molar_mass": 0.03},
            {"name": "b", "molar_mass": 0.04}
        ],
        "state": {"T": 300.0, "rho": 1.0, "y": [0.5, 0.5]},
        "closure": {"kind": "maxwell-stefan", "friction": {"n": 3, "data": [0.0]}}
    });
    let path = write_doc(dir.path(), "shape.json", &doc);
    let out = run(&["check", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

/// A friction table with negative coefficients loads (sign is not part of
/// the closure's validity) but fails the positivity certificates; --strict
/// turns that into exit code 3.
#[test]
fn strict_check_flags_indefinite_table() {
    let dir = tempfile::tempdir().unwrap();
    let third = 1.0 / 3.0;
    let doc = json!({
        "species": [
            {"name": "s1", "molar_mass": 0.03},
            {"name": "s2", "molar_mass": 0.03},
            {"name": "s3", "molar_mass": 0.03}
        ],
        "state": {"T": 300.0, "rho": 1.0, "y": [third, third, third]},
        "closure": {
            "kind": "maxwell-stefan",
            "friction": {
                "n": 3,
                "data": [0.0, third, -1.0, third, 0.0, -1.0, -1.0, -1.0, 0.0]
            }
        }
    });
    let input = write_doc(dir.path(), "negative.json", &doc);

    let plain = run(&["check", "--input", input.to_str().unwrap()]);
    assert_eq!(plain.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&plain.stdout).unwrap();
    assert_eq!(report["psd_on_flux_subspace"]["ok"], false);
    // No admissible friction constant exists for a table with negatives.
    assert!(report.get("friction_constant").is_none());

    let strict = run(&["check", "--input", input.to_str().unwrap(), "--strict"]);
    assert_eq!(strict.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&strict.stderr).unwrap();
    assert_eq!(err["error"]["code"], 3);
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let ms = write_doc(dir.path(), "ms.json", &ternary_ms_doc());
    let darken_doc = json!({
        "species": [
            {"name": "a", "molar_mass": 0.020},
            {"name": "b", "molar_mass": 0.030},
            {"name": "c", "molar_mass": 0.050}
        ],
        "state": {"T": 310.0, "rho": 0.9, "y": [0.5, 0.3, 0.2]},
        "closure": {
            "kind": "darken-self-diffusion",
            "table": {
                "n": 3,
                "data": [1.1e-9, 1.4e-9, 0.8e-9, 1.0e-9, 2.0e-9, 1.2e-9, 0.9e-9, 1.6e-9, 2.4e-9]
            }
        }
    });
    let dk = write_doc(dir.path(), "darken.json", &darken_doc);

    for args in [
        vec!["check", "--input", ms.to_str().unwrap()],
        vec!["darken", "--input", dk.to_str().unwrap()],
        vec!["fickian", "--input", ms.to_str().unwrap()],
        vec!["convert", "--input", ms.to_str().unwrap(), "--target", "B"],
    ] {
        let first = run(&args);
        let second = run(&args);
        assert!(first.status.success(), "{args:?}");
        assert_eq!(first.stdout, second.stdout, "{args:?} not deterministic");
    }

    // The darken report carries both classic binary interpolations.
    let report: Value = serde_json::from_slice(&run(&["darken", "--input", dk.to_str().unwrap()]).stdout).unwrap();
    let comps = report["binary_comparisons"].as_array().unwrap();
    assert_eq!(comps.len(), 3);
    for comp in comps {
        assert!(comp["darken"].as_f64().unwrap() > 0.0);
        assert!(comp["vignes"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn simulate_writes_conservative_csv_series() {
    let dir = tempfile::tempdir().unwrap();
    let n_cells = 12;
    let mut profile = Vec::with_capacity(n_cells * 3);
    for c in 0..n_cells {
        let s = c as f64 / (n_cells - 1) as f64;
        profile.extend_from_slice(&[0.46 - 0.12 * s, 0.31 + 0.01 * s, 0.23 + 0.11 * s]);
    }
    let mut doc = ternary_ms_doc();
    doc["state"].as_object_mut().unwrap().remove("y");
    doc["state"]["profile"] = json!({"n_cells": n_cells, "data": profile});
    doc["sim"] = json!({
        "n_cells": n_cells,
        "length": 0.001,
        "t_end": 0.5,
        "output_every": 2
    });
    let input = write_doc(dir.path(), "sim.json", &doc);
    let prefix = dir.path().join("run");

    let out = run(&[
        "simulate",
        "--input",
        input.to_str().unwrap(),
        "--output",
        prefix.to_str().unwrap(),
    ]);
    let summary = stdout_json(&out);
    assert!(summary["steps"].as_u64().unwrap() >= 1);
    assert!(summary["min_fraction_seen"].as_f64().unwrap() > 0.0);
    assert!(summary["min_zeta_ratio"].as_f64().unwrap() >= -1.0e-12);

    let monitors = std::fs::read_to_string(summary["monitors_csv"].as_str().unwrap()).unwrap();
    let profile_csv = std::fs::read_to_string(summary["profile_csv"].as_str().unwrap()).unwrap();
    assert!(!monitors.contains('\r') && !profile_csv.contains('\r'));

    let mut lines = monitors.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,min_fraction,mass_1,mass_2,mass_3,zeta_total"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() >= 2);
    let first = &rows[0];
    let last = rows.last().unwrap();
    for i in 2..5 {
        let drift = (last[i] - first[i]).abs() / first[i].abs();
        assert!(drift <= 1.0e-12, "mass column {i} drifted by {drift}");
    }
    for row in &rows {
        assert!(row[1] > 0.0);
        assert!(row[5] >= 0.0);
    }

    let mut plines = profile_csv.lines();
    assert_eq!(plines.next().unwrap(), "z,y_1,y_2,y_3");
    let prows: Vec<&str> = plines.collect();
    assert_eq!(prows.len(), n_cells);
    for row in prows {
        let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals.len(), 4);
        let sum: f64 = vals[1..].iter().sum();
        assert!((sum - 1.0).abs() <= 1.0e-12);
    }

    // Identical runs produce identical files.
    let prefix2 = dir.path().join("run2");
    let out2 = run(&[
        "simulate",
        "--input",
        input.to_str().unwrap(),
        "--output",
        prefix2.to_str().unwrap(),
    ]);
    assert!(out2.status.success());
    let monitors2 = std::fs::read_to_string(format!("{}.monitors.csv", prefix2.display())).unwrap();
    assert_eq!(monitors, monitors2);
}

#[test]
fn simulate_rejects_unstable_time_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = ternary_ms_doc();
    doc["sim"] = json!({
        "n_cells": 12,
        "length": 0.001,
        "t_end": 0.5,
        "dt": 1.0e3,
        "output_every": 2
    });
    let input = write_doc(dir.path(), "unstable.json", &doc);
    let out = run(&[
        "simulate",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], 2);
}

#[test]
fn counterexample_reports_negative_pair_and_admissibility() {
    let out = run(&["counterexample", "--a", "3.0"]);
    let report = stdout_json(&out);
    let friction = matrix_entries(&report["friction"]);
    assert!(friction[2] < 0.0, "species 1-3 coefficient should be negative");
    assert_eq!(report["tau_psd"], true);
    assert!(!report["negative_friction_pairs"].as_array().unwrap().is_empty());
    let posdiag: Vec<bool> = report["posdiag_satisfied"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_bool().unwrap())
        .collect();
    let d: Vec<f64> = report["projected_d"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (sat, di) in posdiag.iter().zip(&d) {
        assert_eq!(*sat, *di >= 0.0);
    }
    // The family needs coupling beyond the threshold.
    let weak = run(&["counterexample", "--a", "1.5"]);
    assert_eq!(weak.status.code(), Some(2));
}

#[test]
fn fickian_report_has_real_stable_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_doc(dir.path(), "ms.json", &ternary_ms_doc());
    let report = stdout_json(&run(&["fickian", "--input", input.to_str().unwrap()]));
    assert_eq!(report["z_matrix"], true);
    let radius = report["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p[0].as_f64().unwrap().hypot(p[1].as_f64().unwrap()))
        .fold(0.0_f64, f64::max);
    assert!(report["max_abs_imag"].as_f64().unwrap() <= 1.0e-8 * radius);
    assert!(report["min_real"].as_f64().unwrap() >= -1.0e-9 * radius);
}
