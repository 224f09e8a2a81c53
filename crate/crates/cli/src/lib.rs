//! `virelay` command line: checks, gap searches, sweeps, SMT emission and
//! trace rendering.
//!
//! Exit codes: 0 holds / converged, 1 counterexample found, 2 inconclusive,
//! 3 usage or configuration error.

pub mod query;
pub mod sweep;

#[cfg(test)]
mod tests;

use clap::{Args, Parser, Subcommand, ValueEnum};
use query::{ModelKind, RunConfig};
use serde_json::Value as Json;
use std::path::{Path, PathBuf};
use std::time::Duration;
use virelay::framework::Verdict;
use virelay::rational::{self, Rat};
use virelay::render;
use virelay::smt::SmtError;
use virelay::{Error, Solver, TraceFileV1};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FOUND: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "virelay", version, about = "Bounded performance verification of scheduling heuristics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct QueryOpts {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Model-specific query; each model has a default.
    #[arg(long)]
    pub query: Option<String>,
    /// JSON object with model keys and query arguments.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Overrides one params key; VALUE is parsed as JSON, else taken as a string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverOpts {
    /// Solver binary; falls back to VIRELAY_SOLVER, then z3 or cvc5 on PATH.
    #[arg(long)]
    pub solver: Option<PathBuf>,
    /// Per-call solver time limit in seconds.
    #[arg(long, default_value_t = 600)]
    pub timeout: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Ascii,
    Svg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a trace violating a property.
    Check {
        #[command(flatten)]
        query: QueryOpts,
        #[command(flatten)]
        solver: SolverOpts,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Bound the heuristic/ideal ratio of a gap query.
    Optimize {
        #[command(flatten)]
        query: QueryOpts,
        #[command(flatten)]
        solver: SolverOpts,
        #[arg(long, default_value = "1/1024")]
        tol: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a gap query over a grid; array-valued params are the axes.
    Sweep {
        #[command(flatten)]
        query: QueryOpts,
        #[command(flatten)]
        solver: SolverOpts,
        #[arg(long, default_value = "1/1024")]
        tol: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Draw a trace file as a Gantt chart.
    Render {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Ascii)]
        format: Format,
        #[arg(long, default_value_t = render::DEFAULT_WIDTH)]
        width: usize,
        /// Directory to write into instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the SMT-LIB2 script a query would solve.
    EmitSmt {
        #[command(flatten)]
        query: QueryOpts,
        /// Directory to write into instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for an error that ended a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Unsupported(_) | Error::Json(_) | Error::Field { .. } | Error::Io(_) => EXIT_USAGE,
        Error::Smt(SmtError::Config(_)) => EXIT_USAGE,
        _ => EXIT_INCONCLUSIVE,
    }
}

fn parse_set(s: &str) -> virelay::Result<(String, Json)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got `{s}`")))?;
    let v = serde_json::from_str(v).unwrap_or_else(|_| Json::String(v.to_string()));
    Ok((k.to_string(), v))
}

pub fn run_config(q: &QueryOpts) -> virelay::Result<RunConfig> {
    let mut params = match &q.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))?
        }
        None => Json::Object(Default::default()),
    };
    for s in &q.set {
        let (k, v) = parse_set(s)?;
        params.as_object_mut().ok_or_else(|| Error::config("params must be a JSON object"))?.insert(k, v);
    }
    RunConfig::new(q.model, q.query.as_deref(), params)
}

/// Resolves the solver and fails early when the binary does not exist.
pub fn solver_of(o: &SolverOpts) -> virelay::Result<Solver> {
    let timeout = Duration::from_secs(o.timeout.max(1));
    let s = Solver::resolve(o.solver.as_deref(), timeout)?;
    let found = s.path.is_file() || (s.path.components().count() == 1 && which(&s.path).is_some());
    if !found {
        return Err(Error::Smt(SmtError::Config(format!("solver binary `{}` not found", s.path.display()))));
    }
    Ok(s)
}

fn which(name: &Path) -> Option<PathBuf> {
    std::env::split_paths(&std::env::var_os("PATH")?).map(|d| d.join(name)).find(|p| p.is_file())
}

fn parse_tol(s: &str) -> virelay::Result<Rat> {
    let t = rational::parse(s).map_err(|e| Error::config(format!("--tol: {e}")))?;
    if t <= Rat::from_integer(0.into()) {
        return Err(Error::config("--tol must be positive"));
    }
    Ok(t)
}

fn write_into(dir: &Path, name: &str, text: &str) -> virelay::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

fn trace_name(rc: &RunConfig) -> String {
    format!("{}-{}.trace.json", rc.model.name(), rc.query)
}

fn dispatch(cli: Cli) -> virelay::Result<i32> {
    match cli.command {
        Command::Check { query, solver, out } => {
            let rc = run_config(&query)?;
            let solver = solver_of(&solver)?;
            let r = query::check(&rc, &solver)?;
            println!("{} {}: {} ({}, {:.2}s)", rc.model.name(), rc.query, r.verdict.label(), r.status, r.wall_time);
            if let Some(f) = &r.file {
                let path = write_into(&out, &trace_name(&rc), &f.to_json()?)?;
                println!("trace: {}", path.display());
            }
            Ok(match r.verdict {
                Verdict::Holds => EXIT_OK,
                Verdict::Violated => EXIT_FOUND,
                Verdict::Inconclusive => EXIT_INCONCLUSIVE,
            })
        }
        Command::Optimize { query, solver, tol, out } => {
            let rc = run_config(&query)?;
            let tol = parse_tol(&tol)?;
            let solver = solver_of(&solver)?;
            let r = query::optimize(&rc, &solver, &tol)?;
            println!("{}", r.describe());
            println!("status: {} after {} probes, {:.2}s", r.status.label(), r.probes, r.wall_time);
            if let Some(f) = &r.file {
                let path = write_into(&out, &trace_name(&rc), &f.to_json()?)?;
                println!("traces: {}", path.display());
            }
            Ok(if r.converged() { EXIT_OK } else { EXIT_INCONCLUSIVE })
        }
        Command::Sweep { query, solver, tol, out, jobs } => {
            let rc = run_config(&query)?;
            let tol = parse_tol(&tol)?;
            let solver = solver_of(&solver)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("{}-{}-sweep.csv", rc.model.name(), rc.query));
            let file = std::fs::File::create(&path)?;
            let rows = sweep::sweep(&rc, &solver, &tol, jobs, file)?;
            let done = rows.iter().filter(|r| r.status == "converged").count();
            println!("{done}/{} points converged; csv: {}", rows.len(), path.display());
            Ok(if done == rows.len() { EXIT_OK } else { EXIT_INCONCLUSIVE })
        }
        Command::Render { file, format, width, out } => {
            let f = TraceFileV1::read(&file).map_err(|e| Error::config(format!("{}: {e}", file.display())))?;
            let (text, ext) = match format {
                Format::Ascii => (render::render_ascii(&f, width), "txt"),
                Format::Svg => (render::render_svg(&f), "svg"),
            };
            match out {
                Some(dir) => {
                    let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
                    let path = write_into(&dir, &format!("{stem}.{ext}"), &text)?;
                    println!("{}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(EXIT_OK)
        }
        Command::EmitSmt { query, out } => {
            let rc = run_config(&query)?;
            let script = query::emit(&rc)?;
            match out {
                Some(dir) => {
                    let path = write_into(&dir, &format!("{}-{}.smt2", rc.model.name(), rc.query), &script)?;
                    println!("{}", path.display());
                }
                None => print!("{script}"),
            }
            Ok(EXIT_OK)
        }
    }
}
