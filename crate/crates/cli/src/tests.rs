//! End-to-end runs of the command line, in process.

use crate::main_with;
use crate::query::replay_file;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use virelay::{Solver, TraceFileV1};

/// Serializes access to `VIRELAY_SOLVER`.
static ENV: Mutex<()> = Mutex::new(());

fn z3() -> &'static str {
    static PATH: OnceLock<String> = OnceLock::new();
    PATH.get_or_init(|| {
        let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
        let s = Solver::resolve(None, std::time::Duration::from_secs(60)).expect("z3 on PATH or VIRELAY_SOLVER");
        s.path.to_string_lossy().into_owned()
    })
}

/// Runs with an explicit solver and output directory.
fn run(args: &[&str], dir: &Path) -> i32 {
    let mut full = vec!["virelay"];
    full.extend_from_slice(args);
    if matches!(args[0], "check" | "optimize" | "sweep") && !args.contains(&"--solver") {
        full.extend_from_slice(&["--solver", z3()]);
    }
    let dir = dir.to_str().unwrap();
    if !args.contains(&"--out") && args[0] != "render" {
        full.extend_from_slice(&["--out", dir]);
    }
    main_with(full)
}

fn write_params(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn replays(dir: &Path, name: &str) -> TraceFileV1 {
    let f = TraceFileV1::read(&dir.join(name)).unwrap();
    replay_file(&f).unwrap_or_else(|e| panic!("{name}: {e}"));
    f
}

#[test]
fn worksteal_ratio_check_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let base = ["check", "--model", "worksteal", "--query", "ratio", "--set", "n_resources=2", "--set", "n_tasks=3"];
    assert_eq!(run(&[&base[..], &["--set", "q=2"]].concat(), d.path()), 0);
    assert_eq!(run(&[&base[..], &["--set", "q=\"5/4\""]].concat(), d.path()), 1);
    replays(d.path(), "worksteal-ratio.trace.json");
}

#[test]
fn srpt_avg_check_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let base = ["check", "--model", "srpt", "--query", "avg", "--set", "n_tasks=2", "--set", "steps=2"];
    assert_eq!(run(&[&base[..], &["--set", "q=2"]].concat(), d.path()), 0);
    assert_eq!(run(&[&base[..], &["--set", "q=\"5/4\""]].concat(), d.path()), 1);
    let f = replays(d.path(), "srpt-avg.trace.json");
    assert_eq!(f.charts.iter().map(|c| c.label.as_str()).collect::<Vec<_>>(), vec!["heuristic", "ideal"]);
}

#[test]
fn linuxlb_check_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = write_params(d.path(), "lb.json", r#"{"version": "5.5", "n_tasks": 5, "periods": 2}"#);
    let p = p.to_str().unwrap();
    assert_eq!(run(&["check", "--model", "linuxlb", "--query", "work-conservation", "--params", p], d.path()), 1);
    replays(d.path(), "linuxlb-work-conservation.trace.json");
    let fair = ["check", "--model", "linuxlb", "--query", "fairness", "--params", p, "--set", "periods=4", "--set", "threshold=0"];
    assert_eq!(run(&fair, d.path()), 0);
}

#[test]
fn pktsched_check_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let base = ["check", "--model", "pktsched", "--set", "scheduler=priority", "--set", "n_queues=3", "--set", "horizon=5"];
    assert_eq!(run(&[&base[..], &["--set", "victim=3", "--set", "invocations=5"]].concat(), d.path()), 1);
    replays(d.path(), "pktsched-starvation.trace.json");
    assert_eq!(run(&[&base[..], &["--set", "victim=1", "--set", "invocations=1"]].concat(), d.path()), 0);
}

const FIFO: [&str; 10] =
    ["--model", "pktsched", "--set", "scheduler=fifo", "--set", "horizon=2", "--set", "victim=1", "--set", "invocations=1"];

#[test]
fn usage_errors_exit_3() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(&[&["check", "--solver", "/no/such/solver"][..], &FIFO[..]].concat(), d.path()), 3);
    assert_eq!(run(&["check", "--model", "worksteal", "--query", "nope"], d.path()), 3);
    assert_eq!(run(&["check", "--model", "pktsched", "--set", "scheduler=fifo", "--set", "horizon=2", "--set", "victim=9", "--set", "invocations=1"], d.path()), 3);
    assert_eq!(run(&["check", "--model", "pktsched", "--params", "/no/such/params.json"], d.path()), 3);
    assert_eq!(run(&["optimize", "--model", "linuxlb", "--set", "version=\"5.5\"", "--set", "n_tasks=5"], d.path()), 3);
    assert_eq!(run(&["frobnicate"], d.path()), 3);
    assert_eq!(run(&["check", "--model", "nonsense"], d.path()), 3);
    assert_eq!(run(&["optimize", "--model", "worksteal", "--set", "n_resources=2", "--set", "n_tasks=2", "--tol", "0"], d.path()), 3);
}

#[test]
fn solver_env_var_is_honoured() {
    let d = tempfile::tempdir().unwrap();
    let real = z3().to_string();
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let code_with = |value: &str| {
        std::env::set_var(virelay::smt::SOLVER_ENV, value);
        let mut args = vec!["virelay", "check"];
        args.extend_from_slice(&FIFO);
        args.extend_from_slice(&["--out", d.path().to_str().unwrap()]);
        main_with(args)
    };
    let missing = code_with("/no/such/solver");
    let found = code_with(&real);
    std::env::remove_var(virelay::smt::SOLVER_ENV);
    assert_eq!(missing, 3);
    assert_eq!(found, 0);
}

#[cfg(unix)]
#[test]
fn unknown_answer_exits_2() {
    use std::os::unix::fs::PermissionsExt;
    let d = tempfile::tempdir().unwrap();
    let fake = d.path().join("fake-solver");
    std::fs::write(&fake, "#!/bin/sh\necho unknown\n").unwrap();
    std::fs::set_permissions(&fake, std::fs::Permissions::from_mode(0o755)).unwrap();
    assert_eq!(run(&[&["check", "--solver", fake.to_str().unwrap()][..], &FIFO[..]].concat(), d.path()), 2);
}

#[test]
fn optimize_writes_exact_bound() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(&["optimize", "--model", "worksteal", "--set", "n_resources=2", "--set", "n_tasks=3"], d.path()), 0);
    let f = replays(d.path(), "worksteal-gap.trace.json");
    assert_eq!(f.bound, Some(virelay::rational::ratio(3, 2)));
    assert!(std::fs::read_to_string(d.path().join("worksteal-gap.trace.json")).unwrap().contains("\"bound\": \"3/2\""));
}

#[test]
fn single_task_bound_is_one() {
    let d = tempfile::tempdir().unwrap();
    let args = ["optimize", "--model", "worksteal", "--set", "n_resources=2", "--set", "n_tasks=1", "--set", "k=1"];
    assert_eq!(run(&args, d.path()), 0);
    assert_eq!(TraceFileV1::read(&d.path().join("worksteal-gap.trace.json")).unwrap().bound, Some(virelay::rational::int(1)));
}

#[test]
fn emitted_scripts_are_stable_and_solvable() {
    let d = tempfile::tempdir().unwrap();
    let args = ["emit-smt", "--model", "worksteal", "--set", "n_resources=2", "--set", "n_tasks=2", "--set", "q=\"3/2\"", "--out"];
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(run(&[&args[..], &[a.to_str().unwrap()]].concat(), d.path()), 0);
    assert_eq!(run(&[&args[..], &[b.to_str().unwrap()]].concat(), d.path()), 0);
    let name = "worksteal-gap.smt2";
    let first = std::fs::read(a.join(name)).unwrap();
    assert_eq!(first, std::fs::read(b.join(name)).unwrap());
    let answer = std::process::Command::new(z3()).arg(a.join(name)).output().unwrap();
    let line = String::from_utf8_lossy(&answer.stdout).lines().next().unwrap_or("").to_string();
    assert!(line == "sat" || line == "unsat", "solver said: {line}");
}

#[test]
fn emitted_invariant_script_asserts_the_violation() {
    let d = tempfile::tempdir().unwrap();
    let args = ["emit-smt", "--model", "pktsched", "--set", "scheduler=rr", "--set", "n_queues=2", "--set", "horizon=3", "--set", "victim=2", "--set", "invocations=2"];
    assert_eq!(run(&args, d.path()), 0);
    let text = std::fs::read_to_string(d.path().join("pktsched-starvation.smt2")).unwrap();
    assert!(text.contains("(check-sat)"));
    // The served-queue test of the starvation window is part of the goal.
    let goal = text.lines().rfind(|l| l.starts_with("(assert")).unwrap();
    assert!(goal.contains("h.s0p.served") && goal.contains("h.s0.occ.1"), "{goal}");
}

#[test]
fn sweep_marks_invalid_points() {
    let d = tempfile::tempdir().unwrap();
    let p = write_params(d.path(), "grid.json", r#"{"n_resources": 2, "n_tasks": 2, "k": 1, "c": ["1/2", 1]}"#);
    assert_eq!(run(&["sweep", "--model", "worksteal", "--params", p.to_str().unwrap(), "--tol", "1/64"], d.path()), 2);
    let csv = std::fs::read_to_string(d.path().join("worksteal-gap-sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "c,bound,bound_decimal,status,wall_time");
    assert_eq!(lines.len(), 3, "{csv}");
    assert!(lines[1].starts_with("1/2,,,config_error"), "{csv}");
    assert!(lines[2].starts_with("1,") && lines[2].contains("converged"), "{csv}");
}

#[test]
fn one_point_sweep_has_one_row() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(&["sweep", "--model", "worksteal", "--set", "n_resources=2", "--set", "n_tasks=[3]", "--jobs", "2"], d.path()), 0);
    let csv = std::fs::read_to_string(d.path().join("worksteal-gap-sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("3,3/2,1.5,converged"), "{csv}");
}

#[test]
fn render_is_deterministic_and_checks_versions() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(&["optimize", "--model", "worksteal", "--set", "n_resources=2", "--set", "n_tasks=3"], d.path()), 0);
    let path = d.path().join("worksteal-gap.trace.json");
    let path = path.to_str().unwrap();
    let dir = d.path().to_str().unwrap();
    let (r1, r2) = (d.path().join("r1"), d.path().join("r2"));
    assert_eq!(run(&["render", path, "--out", r1.to_str().unwrap()], d.path()), 0);
    assert_eq!(run(&["render", path, "--out", r2.to_str().unwrap()], d.path()), 0);
    let text = std::fs::read_to_string(r1.join("worksteal-gap.trace.txt")).unwrap();
    assert_eq!(text, std::fs::read_to_string(r2.join("worksteal-gap.trace.txt")).unwrap());
    assert!(text.contains("== heuristic") && text.contains("== ideal"));

    assert_eq!(run(&["render", path, "--format", "svg", "--out", dir], d.path()), 0);
    let svg = std::fs::read_to_string(d.path().join("worksteal-gap.trace.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    let bumped = std::fs::read_to_string(path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 7");
    let bad = d.path().join("bad.json");
    std::fs::write(&bad, bumped).unwrap();
    assert_eq!(run(&["render", bad.to_str().unwrap()], d.path()), 3);
}
