//! Solver subprocess driver.
//!
//! The script goes to a temporary file and the solver is run as
//! `<solver> <file>`. On timeout the child is killed and reaped.

use super::sexp::{self, Sexp};
use super::{emit_smtlib, term_to_string, Assignment, Problem, SmtError, Term, Value};
use crate::rational::{self, Rat};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

pub const SOLVER_ENV: &str = "VIRELAY_SOLVER";

#[derive(Clone, Debug, PartialEq)]
pub enum SolverStatus {
    Sat(Assignment),
    Unsat,
    Unknown(String),
    Timeout,
}

impl SolverStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolverStatus::Sat(_) => "sat",
            SolverStatus::Unsat => "unsat",
            SolverStatus::Unknown(_) => "unknown",
            SolverStatus::Timeout => "timeout",
        }
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, SolverStatus::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolverStatus::Unsat)
    }
}

#[derive(Clone, Debug)]
pub struct SolverVerdict {
    pub status: SolverStatus,
    /// Seconds.
    pub wall_time: f64,
}

/// A solver binary plus a per-call time limit.
#[derive(Clone, Debug)]
pub struct Solver {
    pub path: PathBuf,
    pub timeout: Duration,
}

impl Solver {
    pub fn new(path: impl Into<PathBuf>, timeout: Duration) -> Self {
        Solver { path: path.into(), timeout }
    }

    /// Resolution order: explicit path, `VIRELAY_SOLVER`, then `z3` and
    /// `cvc5` on `PATH`.
    pub fn resolve(explicit: Option<&Path>, timeout: Duration) -> Result<Self, SmtError> {
        if let Some(p) = explicit {
            return Ok(Solver::new(p, timeout));
        }
        if let Some(p) = std::env::var_os(SOLVER_ENV).filter(|p| !p.is_empty()) {
            return Ok(Solver::new(PathBuf::from(p), timeout));
        }
        for name in ["z3", "cvc5"] {
            if let Some(p) = which(name) {
                return Ok(Solver::new(p, timeout));
            }
        }
        Err(SmtError::Config(format!(
            "no solver found: pass --solver, set {SOLVER_ENV}, or put z3/cvc5 on PATH"
        )))
    }

    /// Emits, runs, and on `sat` completes the assignment over all declared
    /// variables and re-checks every assertion against it.
    pub fn check(&self, problem: &Problem, goal: Option<&Term>) -> Result<SolverVerdict, SmtError> {
        let extra: Vec<&Term> = goal.into_iter().collect();
        problem.validate(&extra)?;
        let script = emit_smtlib(problem, goal);
        let mut verdict = run_solver(&script, self.timeout, &self.path)?;
        if let SolverStatus::Sat(a) = &mut verdict.status {
            a.complete(problem);
            if let Some(i) = problem.first_violation(a)? {
                return Err(SmtError::Solver(format!(
                    "model violates assertion {i}: {}",
                    term_to_string(&problem.assertions()[i])
                )));
            }
            if let Some(g) = goal {
                if !super::eval_bool(g, a)? {
                    return Err(SmtError::Solver("model violates the goal".into()));
                }
            }
        }
        Ok(verdict)
    }
}

fn which(name: &str) -> Option<PathBuf> {
    let paths = std::env::var_os("PATH")?;
    std::env::split_paths(&paths)
        .map(|d| d.join(name))
        .find(|p| p.is_file())
}

pub fn run_solver(script: &str, timeout: Duration, solver_path: &Path) -> Result<SolverVerdict, SmtError> {
    let mut file = tempfile::Builder::new()
        .prefix("virelay-")
        .suffix(".smt2")
        .tempfile()?;
    file.write_all(script.as_bytes())?;
    file.flush()?;

    let start = Instant::now();
    let mut child = Command::new(solver_path)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                SmtError::Config(format!("cannot run solver `{}`: {e}", solver_path.display()))
            }
            _ => SmtError::Io(e),
        })?;
    let mut out = child.stdout.take().expect("piped stdout");
    let mut err = child.stderr.take().expect("piped stderr");
    let out_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = out.read_to_string(&mut s);
        s
    });
    let err_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = err.read_to_string(&mut s);
        s
    });

    let mut poll = Duration::from_millis(1);
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            let _ = out_reader.join();
            let _ = err_reader.join();
            return Ok(SolverVerdict { status: SolverStatus::Timeout, wall_time: start.elapsed().as_secs_f64() });
        }
        thread::sleep(poll);
        poll = (poll * 2).min(Duration::from_millis(20));
    }
    let wall_time = start.elapsed().as_secs_f64();
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    let status = parse_solver_output(&stdout).map_err(|e| match e {
        SmtError::Parse { msg, raw } if !stderr.trim().is_empty() => SmtError::Parse {
            msg,
            raw: format!("{raw}\n--- stderr ---\n{stderr}"),
        },
        other => other,
    })?;
    Ok(SolverVerdict { status, wall_time })
}

/// Interprets `check-sat` / `get-model` output.
pub fn parse_solver_output(raw: &str) -> Result<SolverStatus, SmtError> {
    let perr = |msg: String| SmtError::Parse { msg, raw: raw.to_string() };
    let items = sexp::parse_all(raw).map_err(perr)?;
    let is_error = |s: &Sexp| matches!(s.list(), Some([Sexp::Atom(h), ..]) if h == "error");
    let pos = items.iter().position(|s| {
        matches!(s.atom(), Some("sat" | "unsat" | "unknown" | "timeout"))
    });
    let Some(pos) = pos else {
        if let Some(e) = items.iter().find(|s| is_error(s)) {
            return Err(SmtError::Solver(format!("{e:?}")));
        }
        return Err(perr("no check-sat answer in solver output".into()));
    };
    if let Some(e) = items[..pos].iter().find(|s| is_error(s)) {
        return Err(SmtError::Solver(format!("{e:?}")));
    }
    match items[pos].atom().unwrap() {
        "unsat" => Ok(SolverStatus::Unsat),
        "timeout" => Ok(SolverStatus::Timeout),
        "unknown" => {
            let reason = items[pos + 1..]
                .iter()
                .map(|s| format!("{s:?}"))
                .collect::<Vec<_>>()
                .join(" ");
            Ok(SolverStatus::Unknown(if reason.is_empty() { "unknown".into() } else { reason }))
        }
        _ => {
            let model = items
                .get(pos + 1)
                .and_then(Sexp::list)
                .ok_or_else(|| perr("sat without a model".into()))?;
            let model = match model {
                [Sexp::Atom(h), rest @ ..] if h == "model" => rest,
                m => m,
            };
            let mut a = Assignment::new();
            for def in model {
                let Some([Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(sort), body]) =
                    def.list()
                else {
                    continue;
                };
                if kw != "define-fun" || !args.is_empty() || !matches!(sort.as_str(), "Bool" | "Real" | "Int") {
                    continue;
                }
                let v = parse_value(body).ok_or_else(|| perr(format!("cannot read value of `{name}`")))?;
                a.insert(name.clone(), v);
            }
            Ok(SolverStatus::Sat(a))
        }
    }
}

fn parse_value(s: &Sexp) -> Option<Value> {
    match s {
        Sexp::Atom(a) if a == "true" => Some(Value::Bool(true)),
        Sexp::Atom(a) if a == "false" => Some(Value::Bool(false)),
        _ => parse_num(s).map(Value::Num),
    }
}

fn parse_num(s: &Sexp) -> Option<Rat> {
    match s {
        Sexp::Atom(a) => rational::parse(a).ok(),
        Sexp::List(l) => match l.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => parse_num(x).map(|v| -v),
            [Sexp::Atom(op), x] if op == "to_real" => parse_num(x),
            [Sexp::Atom(op), x, y] if op == "/" => {
                let d = parse_num(y)?;
                if num_traits::Zero::is_zero(&d) {
                    return None;
                }
                Some(parse_num(x)? / d)
            }
            _ => None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn parses_z3_style_model() {
        let raw = "sat\n(\n  (define-fun x () Real\n    (/ 5.0 2.0))\n  (define-fun y () Real\n    (- (/ 1.0 3.0)))\n  (define-fun b () Bool\n    true)\n  (define-fun n () Int\n    (- 4))\n)\n";
        let SolverStatus::Sat(a) = parse_solver_output(raw).unwrap() else { panic!() };
        assert_eq!(a.get("x"), Some(&Value::Num(ratio(5, 2))));
        assert_eq!(a.get("y"), Some(&Value::Num(ratio(-1, 3))));
        assert_eq!(a.get("b"), Some(&Value::Bool(true)));
        assert_eq!(a.get("n"), Some(&Value::Num(int(-4))));
    }

    #[test]
    fn unsat_with_model_error_afterwards() {
        let raw = "unsat\n(error \"line 5 column 10: model is not available\")\n";
        assert_eq!(parse_solver_output(raw).unwrap(), SolverStatus::Unsat);
    }

    #[test]
    fn error_before_answer() {
        let raw = "(error \"line 1 column 1: unknown constant\")\nsat\n()";
        assert!(matches!(parse_solver_output(raw), Err(SmtError::Solver(_))));
    }

    #[test]
    fn garbage_is_parse_error() {
        assert!(matches!(parse_solver_output("hello"), Err(SmtError::Parse { .. })));
        assert!(matches!(parse_solver_output("sat\n((define-fun x () Real (foo 1)))"), Err(SmtError::Parse { .. })));
    }

    #[test]
    fn old_model_wrapper() {
        let raw = "sat\n(model (define-fun x () Real 1.5))";
        let SolverStatus::Sat(a) = parse_solver_output(raw).unwrap() else { panic!() };
        assert_eq!(a.get("x"), Some(&Value::Num(ratio(3, 2))));
    }

    #[test]
    fn missing_binary_is_config_error() {
        let r = run_solver("(check-sat)", Duration::from_secs(1), Path::new("/nonexistent/z3"));
        assert!(matches!(r, Err(SmtError::Config(_))));
    }
}
