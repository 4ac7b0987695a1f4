use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vtem(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vtem"))
        .args(args)
        .current_dir(dir)
        .env_remove("VTEM_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stability_writes_both_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let o = vtem(
        &["stability", "--model", "scalar-cubic", "--dt", "0.005", "--T", "10", "--paths", "100", "--seed", "42", "--out", "stab.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("stab.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 200);
    assert_eq!(rows.iter().filter(|r| r.starts_with("truncated,")).count(), 100);
    assert!(stdout(&o).contains("classical: diverged"));
}

#[test]
fn converge_prints_half_order_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = vtem(
        &["converge", "--model", "scalar-cubic", "--dt-list", "2^-6..2^-12", "--dt-ref", "2^-16", "--paths", "1000", "--q", "1", "--seed", "7", "--out", "err.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let slope: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("slope "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.35..=0.65).contains(&slope), "slope {slope}");
    assert_eq!(fs::read_to_string(dir.path().join("err.csv")).unwrap().lines().count(), 8);
}

#[test]
fn validate_builtin_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = vtem(&["validate", "--model", "duffing-vdp"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 failed"));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn description_file_validation_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // c = 1 is too small for the quadratic V
    fs::write(dir.path().join("m.txt"), "f = -x^3\ng = x\nV = x^2\nc = 1\n").unwrap();
    let o = vtem(&["validate", "--model", "m.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("validation failed"));
}

#[test]
fn description_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.txt"), "f = -x - x^3\ng = x\nV = x^2\n").unwrap();
    let o = vtem(&["simulate", "--model", "m.txt", "--dt", "0.01", "--T", "1", "--out", "p.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(csv.starts_with("step,t,y_1,v,truncated\n"));
    assert_eq!(csv.lines().count(), 102);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.ini"), "model = scalar-cubic\n[simulate]\ndt = 0.005\nT = 0.1\nout = p.csv\n").unwrap();
    let o = vtem(&["simulate", "--config", "run.ini", "--dt", "0.001"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("dt 0.001"));
    // 0.1 / 0.001 steps plus header and initial row
    assert_eq!(fs::read_to_string(dir.path().join("p.csv")).unwrap().lines().count(), 102);
}

#[test]
fn missing_required_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.ini"), "model = scalar-cubic\n").unwrap();
    let o = vtem(&["converge", "--config", "run.ini", "--paths", "10"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dt-list"));
}

#[test]
fn duplicate_key_exits_1_with_both_lines() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.ini"), "model = scalar-cubic\ndt = 0.005\n\ndt = 0.001\n").unwrap();
    let o = vtem(&["simulate", "--config", "run.ini", "--T", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lines 2 and 4"), "{}", stderr(&o));
}

#[test]
fn parse_error_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.ini"), "model = scalar-cubic\ndt 0.005\n").unwrap();
    let o = vtem(&["simulate", "--config", "run.ini"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"));
}

#[test]
fn step_above_delta_star_and_bad_flags_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = vtem(&["simulate", "--model", "scalar-cubic", "--dt", "0.01", "--T", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = vtem(&["simulate", "--model", "scalar-cubic", "--frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = vtem(&["validate", "--model", "no-such-model"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn worker_count_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["stability", "--model", "duffing-vdp", "--dt", "0.01", "--T", "1", "--paths", "300", "--seed", "3"];
    let mut a = base.to_vec();
    a.extend(["--workers", "1", "--out", "a.csv"]);
    let mut b = base.to_vec();
    b.extend(["--workers", "3", "--out", "b.csv"]);
    assert_eq!(vtem(&a, dir.path()).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_vtem"))
        .args(&b)
        .current_dir(dir.path())
        .env("VTEM_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let x = fs::read(dir.path().join("a.csv")).unwrap();
    let y = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let o = vtem(&["simulate", "--model", "duffing-vdp", "--dt", "0.01", "--T", "2", "--seed", "9", "--out", name], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn list_models_names_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let o = vtem(&["list-models"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for m in ["planar-quartic", "scalar-cubic", "duffing-vdp"] {
        assert!(text.contains(m));
    }
}
