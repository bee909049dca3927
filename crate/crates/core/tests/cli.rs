use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn trichotomy(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trichotomy"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("TRICHOTOMY_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn arctan_is_not_a_trichotomy() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("arctan.json");
    let o = trichotomy(&["check-trichotomy", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("dichotomy on both half-lines, projections incompatible"), "{stdout}");
    let v = json(dir.path().join("certificate.json"));
    assert_eq!(v["status"], "incompatible");
}

#[test]
fn check_dichotomy_on_both_halves() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("diag_cos.json");
    let o = trichotomy(&["check-dichotomy", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = json(dir.path().join("dichotomy.json"));
    assert_eq!(v["right"]["interval"], serde_json::json!([0.0, 30.0]));
    assert_eq!(v["left"]["interval"], serde_json::json!([-30.0, 0.0]));
}

#[test]
fn solve_linear_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("diag_cos.json");
    let o = trichotomy(&["solve-linear", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sol.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2");
    let row = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .find(|r| r[0].abs() < 1e-12)
        .expect("grid contains t = 0");
    assert!((row[1] - 0.5).abs() < 1e-6 && (row[2] + 0.5).abs() < 1e-6, "{row:?}");
    let rep = json(dir.path().join("report.json"));
    assert!(rep["residual"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn solve_semilinear_report() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("scalar_sin.json");
    let o = trichotomy(&["solve-semilinear", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(dir.path().join("report.json"));
    assert!((rep["alpha"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!((rep["r"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!(dir.path().join("phi0.csv").exists());
}

#[test]
fn contraction_refused_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("sin_basis.json");
    let o = trichotomy(&["continue-epsilon", f.to_str().unwrap(), "--eps", "0.6"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("hint:"), "{stderr}");
}

#[test]
fn continuation_writes_each_step() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("sin_basis.json");
    let o = trichotomy(&["continue-epsilon", f.to_str().unwrap(), "--eps", "0.2,0.1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(dir.path().join("continuation.json"));
    assert_eq!(v["steps"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("sol_eps_1.csv").exists());
}

#[test]
fn small_window_gets_a_hint() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("diag_cos.json");
    let o = trichotomy(&["solve-linear", f.to_str().unwrap(), "--window", "12"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("increase window T to >="), "{stderr}");
}

#[test]
fn probe_c1_and_rap_scan() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("c1_cubic.json");
    let o = trichotomy(&["probe-c1", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(dir.path().join("probe.json"));
    assert!((v["q_minus2"].as_f64().unwrap() - 3.3292).abs() < 1e-3);

    let f = fixture("atan_forced.json");
    let o = trichotomy(&["rap-scan", f.to_str().unwrap(), "--side", "plus", "--tau-range", "1:3:1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(dir.path().join("rap.json"));
    assert_eq!(v[0]["side"], "plus");
    assert_eq!(v[0]["entries"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("residuals_eps0.csv").exists());
    assert!(dir.path().join("lagrange.json").exists());
}

#[test]
fn invalid_problem_reports_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dim": 1, "A": [["x3"]], "f": ["0"], "window": 10}"#).unwrap();
    let o = trichotomy(&["solve-linear", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("/A/0/0") && stderr.contains("x3"), "{stderr}");

    std::fs::write(&bad, r#"{"dim": 1, "A": [["1"]], "f": ["0"], "window": 10, "colour": 1}"#).unwrap();
    let o = trichotomy(&["solve-linear", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn every_bundled_fixture_loads() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            trichotomy::cli::load_problem(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 8);
}
