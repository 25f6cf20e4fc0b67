use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn shortloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shortloop"))
        .args(args)
        .output()
        .expect("spawn shortloop")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn qtable_writes_one_row_per_step_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = shortloop(&["qtable", "--dim", "1", "--tmax", "100", "--steps", "400", "--out", path_str(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,q_numeric,q_paper_asym,q_calibrated_asym,oracle_residual"));
    assert_eq!(lines.count(), 400);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn inverted_range_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    let o = shortloop(&["qtable", "--tmin", "10", "--tmax", "1", "--out", path_str(&out)]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
}

#[test]
fn airy_kernel_has_an_oracle_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let o = shortloop(&[
        "kernel", "--model", "airy", "--h", "0.01", "--xmin", "-0.2", "--xmax", "0.2", "--points", "9", "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["x", "h", "weyl", "correction", "total", "oracle", "abs_error", "bound", "regime"]);
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let err: f64 = rec[6].parse().unwrap();
        assert!(err < 1e-5, "corrected prediction off the closed form by {err}");
    }
}

#[test]
fn robin_boundary_kernel_has_an_upsilon_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let o = shortloop(&[
        "kernel", "--model", "boundary", "--condition", "robin", "--beta", "-0.5", "--h", "0.05", "--xmin", "0",
        "--xmax", "1", "--points", "5", "--eigensolver", "--out", path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().last(), Some("upsilon"));
    // β < 0: no surface state, so the profile accounts for the whole layer.
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (total, oracle): (f64, f64) = (rec[4].parse().unwrap(), rec[5].parse().unwrap());
        assert!((total - oracle).abs() <= 0.01 * oracle, "{total} vs {oracle}");
    }
}

#[test]
fn missing_flags_are_listed() {
    let o = shortloop(&["kernel", "--h", "0.1"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    for flag in ["--model", "--xmin", "--xmax", "--out"] {
        assert!(err.contains(flag), "{err}");
    }
}

#[test]
fn boundary_profile_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = shortloop(&["boundary-profile", "--dim", "1", "--rmax", "20", "--steps", "11", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("r,upsilon,upsilon_asym,envelope_bound\n"));
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn bundled_airy_study_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("airy_d1.cfg");
    let o = shortloop(&["study", "--config", path_str(&cfg), "--out-dir", path_str(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("airy_d1.csv").exists());
    let summary = std::fs::read_to_string(dir.path().join("airy_d1.txt")).unwrap();
    assert!(summary.contains("verdict: PASS"));
}

#[test]
fn impossible_slope_fails_the_study() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("airy_d1_exact.cfg"))
        .unwrap()
        .replace("expected_slope = -0.6666666666666666", "expected_slope = 5.0");
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, text).unwrap();
    let o = shortloop(&["study", "--config", path_str(&cfg)]);
    assert_eq!(code(&o), 3);
    assert!(dir.path().join("airy_d1_exact.csv").exists());
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.cfg");
    std::fs::write(&cfg, "[study]\nid = \"x\"\nexpected_slope = = 1\n").unwrap();
    let o = shortloop(&["study", "--config", path_str(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn selftest_passes_and_the_hook_names_the_suite() {
    let o = shortloop(&["selftest"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).matches("PASS").count(), 8);
    let o = shortloop(&["selftest", "--corrupt-table"]);
    assert_eq!(code(&o), 4);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("FAIL special_fn")), "{out}");
}
