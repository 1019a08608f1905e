use std::path::Path;
use std::process::{Command, Output};

fn qbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbd"))
        .args(args)
        .env_remove("QBD_FLOAT_TOL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// CSV body rows, skipping `#` comments and the header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn frac(s: &str) -> (i128, i128) {
    let (p, q) = s.split_once('/').unwrap_or((s, "1"));
    (p.parse().unwrap(), q.parse().unwrap())
}

fn same_fraction(s: &str, p: i128, q: i128) -> bool {
    let (a, b) = frac(s);
    a * q == p * b
}

fn walk_model(dir: &Path, levels: usize, broken: bool) -> std::path::PathBuf {
    let mut blocks = vec![r#"{"B": [["1/2"]], "A": [["1/2"]]}"#.to_string()];
    for n in 1..levels {
        let b = if broken && n == 2 { "1/4" } else { "0" };
        blocks.push(format!(r#"{{"B": [["{b}"]], "A": [["1/2"]], "C": [["1/2"]]}}"#));
    }
    let text = format!(r#"{{"kind": "discrete", "N": 1, "blocks": [{}]}}"#, blocks.join(","));
    let path = dir.join("walk.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn invariant_level_zero_exact() {
    let o = qbd(&[
        "invariant",
        "--alpha",
        "0",
        "--beta",
        "0",
        "--k",
        "0.5",
        "--levels",
        "0",
        "--backend",
        "exact",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("level,phase,value,numerator,denominator"));
    assert_eq!(
        rows(&text),
        vec![
            vec!["0", "1", "648/217", "648", "217"],
            vec!["0", "2", "96/217", "96", "217"]
        ]
    );
}

#[test]
fn reflecting_walk_gives_constant_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = walk_model(dir.path(), 7, false);
    let o = qbd(&["invariant", "--model", path.to_str().unwrap(), "--levels", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 6);
    assert!(r.iter().all(|row| row[2] == "1"));
}

#[test]
fn transient_classification_in_header() {
    let o = qbd(&[
        "invariant",
        "--alpha",
        "0",
        "--beta",
        "1",
        "--k",
        "0.5",
        "--levels",
        "3",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o)
        .lines()
        .next()
        .unwrap()
        .contains("transient; uniqueness unknown"));
}

#[test]
fn usage_errors_exit_two() {
    let exact = qbd(&[
        "invariant",
        "--alpha",
        "0.5",
        "--beta",
        "1",
        "--k",
        "0.5",
        "--backend",
        "exact",
    ]);
    assert_eq!(exact.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&exact.stderr).contains("exact backend"));
    assert_eq!(qbd(&["invariant", "--alpha", "0"]).status.code(), Some(2));
    assert_eq!(
        qbd(&["invariant", "--alpha", "0", "--model", "x.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qbd(&["invariant", "--alpha", "0", "--beta", "0", "--k", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qbd(&["invariant", "--model", "/nonexistent/model.json"]).status.code(),
        Some(2)
    );
    assert_eq!(qbd(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn csv_and_json_agree() {
    for backend in ["exact", "float"] {
        let base = ["invariant", "--levels", "4", "--backend", backend];
        let csv = stdout(&qbd(&base));
        let json: serde_json::Value =
            serde_json::from_str(&stdout(&qbd(&[&base[..], &["--format", "json"]].concat()))).unwrap();
        let jrows = json["rows"].as_array().unwrap();
        let crows = rows(&csv);
        assert_eq!(jrows.len(), crows.len());
        for (j, c) in jrows.iter().zip(&crows) {
            assert_eq!(j["level"].to_string(), c[0]);
            assert_eq!(j["phase"].to_string(), c[1]);
            let value = match &j["value"] {
                serde_json::Value::String(s) => s.clone(),
                v => v.to_string(),
            };
            assert_eq!(value, c[2], "{backend}");
        }
        assert_eq!(json["classification"]["recurrence"], "null-recurrent");
    }
}

#[test]
fn verify_golden_exact_passes() {
    let o = qbd(&["verify", "--levels", "20", "--backend", "exact"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 5);
    assert!(r.iter().all(|row| row[1] == "PASS"), "{r:?}");
    assert!(stdout(&o).contains("max residual 0 (exact) on levels 0..19"));
}

#[test]
fn verify_golden_float_residual() {
    let o = qbd(&["verify", "--levels", "20", "--backend", "float", "--format", "json"]);
    assert!(o.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let stat = json["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "stationarity")
        .unwrap();
    let detail = stat["detail"].as_str().unwrap();
    let value: f64 = detail.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(value < 1e-10, "{detail}");
}

#[test]
fn float_tolerance_comes_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_qbd"))
        .args(["verify", "--levels", "10", "--backend", "float"])
        .env("QBD_FLOAT_TOL", "1e-30")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn broken_row_sum_fails_stochasticity() {
    let dir = tempfile::tempdir().unwrap();
    let path = walk_model(dir.path(), 7, true);
    let o = qbd(&["verify", "--model", path.to_str().unwrap(), "--levels", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let r = rows(&stdout(&o));
    assert_eq!((r[0][0].as_str(), r[0][1].as_str()), ("stochasticity", "FAIL"));
}

#[test]
fn negative_blocks_are_a_validation_failure() {
    let o = qbd(&[
        "invariant",
        "--alpha",
        "1",
        "--beta",
        "2",
        "--k",
        "1/2",
        "--levels",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("negative entry"));
}

#[test]
fn figure_spot_rows() {
    let o = qbd(&["figure", "--levels", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("n,pi1,pi2"));
    let r = rows(&text);
    assert_eq!(r.len(), 2);
    assert!(same_fraction(&r[0][1], 648, 217) && same_fraction(&r[0][2], 96, 217));
    assert!(same_fraction(&r[1][1], 165240, 55097) && same_fraction(&r[1][2], 112560, 55097));
    assert_eq!(rows(&stdout(&qbd(&["figure", "--levels", "0"]))).len(), 1);
}

#[test]
fn figure_linear_growth() {
    let o = qbd(&["figure", "--levels", "10000", "--backend", "float"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    let last = r.last().unwrap();
    assert_eq!(last[0], "10000");
    for v in &last[1..] {
        let v: f64 = v.parse().unwrap();
        assert!((v / 1e4 - 1.0).abs() < 0.05, "{v}");
    }
}

#[test]
fn figure_from_pipeline_matches_invariant() {
    let args = ["--alpha", "1", "--beta", "1", "--k", "1/2", "--levels", "3"];
    let fig = rows(&stdout(&qbd(&[&["figure"][..], &args].concat())));
    let inv = rows(&stdout(&qbd(&[&["invariant"][..], &args].concat())));
    for (n, row) in fig.iter().enumerate() {
        assert_eq!(row[1], inv[2 * n][2]);
        assert_eq!(row[2], inv[2 * n + 1][2]);
    }
}

#[test]
fn oracle_agrees_on_golden_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle.json");
    let o = qbd(&[
        "oracle",
        "--truncation",
        "200",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(json["max_relative_error"].as_f64().unwrap() < 5e-2);
    assert_eq!(json["rows"].as_array().unwrap().len(), 12);
}

#[test]
fn oracle_on_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = walk_model(dir.path(), 12, false);
    let o = qbd(&[
        "oracle",
        "--model",
        path.to_str().unwrap(),
        "--truncation",
        "10",
        "--levels",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|row| row[4].parse::<f64>().unwrap() < 1e-12));
}
