use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn otlab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_otlab"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("OTLAB_THREADS", n),
        None => cmd.env_remove("OTLAB_THREADS"),
    };
    cmd.output().expect("spawn otlab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_scenario(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.cfg");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const TWO_POINT: &str = "\
name = cli/two_point
cost = quadratic
source.region = square
target.region = square
target.points = (-0.5,0);(0.5,0)
mesh.resolution = 64
analyses = holes, singular, isolation, monotonicity
samples.monotonicity = 500
expect.holes = 0
expect.isolated = 0
";

#[test]
fn verify_cost_passes_for_every_cost() {
    for id in ["quadratic", "bilinear", "log", "sqrt_plus"] {
        let o = otlab(&["verify-cost", id, "--samples", "2000"], None);
        assert_eq!(o.status.code(), Some(0), "{id}: {}", stdout(&o));
        let out = stdout(&o);
        assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
        assert!(out.contains("structural.mtw") && out.contains("loeper"));
    }
}

#[test]
fn unknown_cost_is_a_usage_error() {
    let o = otlab(&["verify-cost", "cubic"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cubic"));
}

#[test]
fn run_writes_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), TWO_POINT);
    let out = dir.path().join("out");
    let o = otlab(&["run", &file, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for f in ["scenario.cfg", "verdicts.csv", "solver.csv", "tessellation.csv", "masses.csv", "potential.csv", "holes.csv", "singular.csv", "components.csv", "cells.svg", "singular.svg"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let masses = fs::read_to_string(out.join("masses.csv")).unwrap();
    assert_eq!(masses.lines().count(), 3);
    let verdicts = fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(verdicts.starts_with("name,status,detail\n"));
    assert!(!verdicts.contains(",FAIL,"));
}

#[test]
fn failing_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), &TWO_POINT.replace("expect.holes = 0", "expect.holes = 1"));
    let o = otlab(&["run", &file, "--out", dir.path().join("out").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL holes"));
}

#[test]
fn bad_scenarios_exit_two_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), &format!("{TWO_POINT}colour = red\n"));
    let o = otlab(&["run", &file, "--out", dir.path().join("out").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 11") && err.contains("colour"), "{err}");

    let o = otlab(&["run", "no/such/preset", "--out", dir.path().join("o2").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overrides_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), TWO_POINT);
    let out = dir.path().join("out");
    let o = otlab(&["run", &file, "--out", out.to_str().unwrap(), "--resolution", "96", "--seed", "7"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let cfg = fs::read_to_string(out.join("scenario.cfg")).unwrap();
    assert!(cfg.contains("mesh.resolution = 96") && cfg.contains("seed = 7"), "{cfg}");

    let o = otlab(&["run", &file, "--out", out.to_str().unwrap(), "--resolution", "32"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(otlab(&["run", "two_point", "--out", a.to_str().unwrap()], Some("1")).status.code(), Some(0));
    assert_eq!(otlab(&["run", "two_point", "--out", b.to_str().unwrap()], None).status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}
