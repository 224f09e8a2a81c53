//! Performance verification of resource-allocation heuristics.
//!
//! A heuristic is modeled as a bounded alternation of `Algorithm` (a zero-time
//! decision) and `System` (the environment advancing time) over SMT
//! variables. Queries either search for a violation of an invariant or bound
//! the gap between the heuristic and a solver-chosen ideal schedule.

pub mod error;
pub mod framework;
pub mod models;
pub mod rational;
pub mod render;
pub mod smt;
pub mod tracefile;

pub use error::{Error, Result};
pub use framework::{
    check_invariant, decode_trace, optimal_gap, unroll, CheckOutcome, GapOutcome, Phase,
    ScheduleTrace, StateSchema, StateStep, TraceSpec, TraceStep, TransitionSpec, Verdict,
};
pub use rational::Rat;
pub use tracefile::TraceFileV1;
pub use smt::{
    build_argmin, emit_smtlib, maximize_ratio, run_solver, Assignment, Problem, RatioOutcome,
    RatioStatus, SmtError, Solver, SolverStatus, SolverVerdict, Sort, Term, Value,
};
