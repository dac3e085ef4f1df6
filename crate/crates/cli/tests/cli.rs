use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gamma-lab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("GAMMA_LAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn csv_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn scan_rows_match_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["scan", "--profile", "indicator", "--p", "1", "--fn", "U", "--ladder", "0.1,0.01,0.001"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(tmp.path());
    assert_eq!(rows.len(), 3);
    for r in rows {
        let d: f64 = r[0].parse().unwrap();
        let e: f64 = r[1].parse().unwrap();
        let exact = 1.0 - d + d * d.ln();
        assert!((e - exact).abs() <= 1e-6 * exact, "delta {d}: {e} vs {exact}");
        assert_eq!(r[3], "1");
    }
    let csv = std::fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    assert!(csv.starts_with(&format!("# gamma-lab {} csv v1\n# command=scan\n", gamma_lab::VERSION)));
    assert!(csv.contains("# quad.rel_tol="));
    assert!(tmp.path().join("run.log").exists());
}

#[test]
fn check_profile_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["check-profile", "--profile", "indicator", "--p", "1", "--set", "profile.scale=0.5"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("normalization 0.5, pass"), "{stdout}");
    assert_eq!(summary(tmp.path())["result"]["pass"], Value::Bool(true));

    let out = run(tmp.path(), &["check-profile", "--profile", "indicator", "--p", "1", "--set", "profile.scale=1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("normalization 1, fail"));
}

#[test]
fn kappa_on_compact_profile_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &["kappa", "--profile", "compact", "--p", "1", "--ladder", "0.1,0.05", "--nodes", "8", "--restarts", "1",
          "--set", "opt.anneal_moves=100"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(tmp.path());
    assert_eq!(s["result"]["value"].as_f64(), Some(0.0));
    let rows = csv_rows(tmp.path());
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[1], "0");
        let f = std::fs::read_to_string(tmp.path().join(&r[8])).unwrap();
        gamma_lab::gridfn::parse_text::<f64>(&f).unwrap();
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("plan.cfg");
    std::fs::write(
        &cfg,
        "seed = 42\n[profile]\nkind = indicator\np = 1\n[ladder]\nvalues = 0.05, 0.02\n[opt]\nnodes = 8\nanneal_moves = 100\nrestarts = 1\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    for dir in [a.path(), b.path()] {
        let out = run(dir, &["kappa", "--config", cfg]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["results.csv", "summary.json", "kappa_minimizer_0.plfn", "kappa_minimizer_1.plfn"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn divergent_eval_reports_certificate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["eval", "--fn", "H", "--delta", "0.5"]);
    assert!(out.status.success());
    let rows = csv_rows(tmp.path());
    assert_eq!(rows[0][1], "inf");
    assert_eq!(rows[0][3], "true");
    assert_eq!(rows[0][4], "0.5");
}

#[test]
fn errors_have_distinct_codes_and_records() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["eval", "--set", "quad.colour=red"]);
    assert_eq!(out.status.code(), Some(2));
    let rec: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(rec["error"], "config");
    assert!(tmp.path().join("error.json").exists());

    let cfg = tmp.path().join("two.cfg");
    std::fs::write(&cfg, "delta = 0.1\nladder.values = 0.1, 0.01\n").unwrap();
    let out = run(tmp.path(), &["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(tmp.path(), &["eval", "--fn", "/nonexistent/f.plfn"]);
    assert_eq!(out.status.code(), Some(3));

    let out = run(tmp.path(), &["scan", "--fn", "H"]);
    assert_eq!(out.status.code(), Some(4));

    let out = run(tmp.path(), &["gamma1d", "--p", "2", "--ladder", "0.1"]);
    assert_eq!(out.status.code(), Some(4));
}
