use std::path::Path;
use std::process::{Command, Output};

use parisian_core::parisian::{compute, Precision, Quantity, RuinQuery};
use parisian_core::LevyModel;
use serde_json::Value;

fn parisian(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parisian")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const CL: &str = r#"{"model":"cramer_lundberg","c":2.0,"eta":1.0,"alpha":1.0}"#;

#[test]
fn compute_emits_traceable_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", CL);
    let out = parisian(&["compute", "--quantity", "ruin_prob", "--x", "1", "--r", "1", "--q", "0.5", "--model-config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["value", "method", "est_error", "model", "query"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let value = v["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&value));
    assert_eq!(v["method"], "mixed_delay_ruin");

    // printed digits re-parse to the library's value exactly
    let model = LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap();
    let direct = compute(&model, Quantity::RuinProb, &RuinQuery::new(1.0, 1.0, 0.5), Precision::default()).unwrap();
    assert_eq!(value.to_bits(), direct.value.to_bits());
}

#[test]
fn special_delays_route_to_their_formulas() {
    let base = ["compute", "--quantity", "ruin_prob", "--x", "1", "--model", "brownian", "--c", "1", "--sigma", "1"];
    let method = |extra: &[&str]| -> String {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        let out = parisian(&args);
        assert_eq!(out.status.code(), Some(0));
        let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
        v["method"].as_str().unwrap().to_string()
    };
    assert_eq!(method(&["--r", "inf", "--q", "0.5"]), "exponential_delay_ruin");
    assert_eq!(method(&["--r", "1", "--q", "0"]), "deterministic_delay_ruin");
    assert_eq!(method(&["--r", "1", "--q", "0.5"]), "mixed_delay_ruin");
    assert_eq!(method(&["--r", "inf", "--q", "0"]), "classical_ruin");
}

#[test]
fn table_has_header_and_rows() {
    let out = parisian(&[
        "table", "--sweep", "x", "--from", "0", "--to", "5", "--steps", "11", "--x", "0", "--r", "1", "--q", "0.5", "--model",
        "cramer-lundberg", "--c", "2", "--eta", "1", "--alpha", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,value");
    assert_eq!(lines.len(), 12);
    let values: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn simulate_reports_estimate_and_error() {
    let out = parisian(&[
        "simulate", "--x", "1", "--r", "1", "--q", "0.5", "--paths", "20000", "--seed", "3", "--model", "cramer-lundberg", "--c",
        "2", "--eta", "1", "--alpha", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let (est, se) = (v["estimate"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert_eq!(v["n"], 20000);
    assert_eq!(v["seed"], 3);
    assert!(v["censored"].is_u64());
    assert!((est - 0.164849).abs() < 4.0 * se, "{est} ± {se}");
}

#[test]
fn toml_config_and_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "output_format = \"csv\"\n[model]\nmodel = \"brownian\"\nc = 1.0\nsigma = 1.0\n[tolerances]\nouter_rel = 1e-9\n",
    );
    let out = parisian(&["scale", "--kind", "w", "--from", "0", "--to", "1", "--steps", "3", "--model-config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("x,value\n0,0\n"));
}

#[test]
fn transition_lists_density_and_atom() {
    let out = parisian(&[
        "transition", "--r", "1", "--from", "0", "--to", "2", "--steps", "5", "--format", "json", "--model", "cramer-lundberg",
        "--c", "2", "--eta", "1", "--alpha", "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["atom"]["location"], 2.0);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn output_file_receives_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = parisian(&[
        "compute", "--quantity", "ruin_classical", "--x", "1", "--format", "csv", "--output", path.to_str().unwrap(), "--model",
        "brownian", "--c", "1", "--sigma", "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("quantity,value,method,est_error\nruin_classical,"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.json", r#"{"model":"brownian","c":1.0,"sigma":1.0,"drift":2}"#);
    let bad = write(dir.path(), "b.json", r#"{"model":"brownian","c":1.0,"sigma":0.0}"#);
    let cases: Vec<Vec<&str>> = vec![
        vec!["compute", "--quantity", "ruin_prob", "--x", "1", "--model-config", &unknown],
        vec!["compute", "--quantity", "ruin_prob", "--x", "1", "--model-config", &bad],
        vec!["compute", "--quantity", "ruin_prob", "--x", "1"],
        vec!["compute", "--quantity", "nonsense", "--x", "1", "--model-config", &bad],
        vec!["compute", "--quantity", "exit_lt", "--x", "1", "--r", "1", "--model", "brownian", "--c", "1", "--sigma", "1"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = parisian(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn numeric_failure_exits_1_with_the_cause() {
    let out = parisian(&[
        "compute", "--quantity", "lt_two_sided", "--x", "1", "--b", "10", "--p", "50", "--r", "1", "--q", "0.5", "--model",
        "brownian", "--c", "1", "--sigma", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cancel"));
}

#[test]
fn verify_fast_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = parisian(&["verify", "--level", "fast", "--seed", "42", "--output", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ra, rb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    let v: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(v["summary"]["failed"], 0);
}
