//! Invariant and optimality-gap queries over unrolled traces.

use super::decode::{decode_trace, TraceStep};
use super::trace::{unroll_into, Cx, Decisions, TraceSpec, TransitionSpec, Unrolled};
use crate::error::{Error, Result};
use crate::rational::Rat;
use crate::smt::{maximize_ratio, probe_ratio, Assignment, Problem, RatioOutcome, Solver, SolverStatus, SolverVerdict, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// No violation within the horizon.
    Holds,
    /// The solver produced a counterexample.
    Violated,
    /// Unknown or timeout.
    Inconclusive,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn of(status: &SolverStatus) -> Verdict {
        match status {
            SolverStatus::Sat(_) => Verdict::Violated,
            SolverStatus::Unsat => Verdict::Holds,
            _ => Verdict::Inconclusive,
        }
    }
}

/// A built invariant query: the violation is the goal.
pub struct CheckProblem<W> {
    pub problem: Problem,
    pub goal: Term,
    pub workload: W,
    pub trace: Unrolled,
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub solver_status: &'static str,
    pub wall_time: f64,
    pub trace: Unrolled,
    pub counterexample: Option<Assignment>,
    pub steps: Option<Vec<TraceStep>>,
}

/// Unrolls one heuristic trace and builds the violation goal.
pub fn build_check<M, F>(spec: &TraceSpec<M>, violation: F) -> Result<CheckProblem<M::Workload>>
where
    M: TransitionSpec,
    F: FnOnce(&mut Cx<M::Workload>, &Unrolled) -> Result<Term>,
{
    let mut p = Problem::new();
    p.metadata.insert("model".into(), spec.model.name().to_string());
    p.metadata.insert("horizon".into(), spec.horizon.to_string());
    p.metadata.insert("query".into(), "invariant".into());
    let w = spec.model.declare_workload(&mut p)?;
    let tr = unroll_into(spec, &mut p, &w, "h", Decisions::Heuristic)?;
    let goal = {
        let mut cx = Cx::new(&mut p, &w, "h");
        violation(&mut cx, &tr)?
    };
    Ok(CheckProblem { problem: p, goal, workload: w, trace: tr })
}

/// Runs a built invariant query and decodes any counterexample.
pub fn run_check<M: TransitionSpec>(solver: &Solver, spec: &TraceSpec<M>, cp: CheckProblem<M::Workload>) -> Result<CheckOutcome> {
    let SolverVerdict { status, wall_time } = solver.check(&cp.problem, Some(&cp.goal))?;
    let verdict = Verdict::of(&status);
    let label = status.label();
    let (counterexample, steps) = match status {
        SolverStatus::Sat(a) => {
            let steps = decode_trace(&a, &cp.trace, spec.model.schema())?;
            (Some(a), Some(steps))
        }
        _ => (None, None),
    };
    Ok(CheckOutcome { verdict, solver_status: label, wall_time, trace: cp.trace, counterexample, steps })
}

/// Searches for a heuristic trace on which `violation` holds.
pub fn check_invariant<M, F>(solver: &Solver, spec: &TraceSpec<M>, violation: F) -> Result<CheckOutcome>
where
    M: TransitionSpec,
    F: FnOnce(&mut Cx<M::Workload>, &Unrolled) -> Result<Term>,
{
    let cp = build_check(spec, violation)?;
    run_check(solver, spec, cp)
}

/// A schedule for the ideal side of a gap query that is not a step trace.
pub trait IdealSchedule {
    fn tag(&self) -> &str;
    fn metric(&self) -> Term;
}

/// How the ideal copy is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdealMode {
    /// The model's direct schedule if it has one, else a free trace.
    Auto,
    Direct,
    Trace,
}

pub enum Ideal {
    Direct(Box<dyn IdealSchedule>),
    Trace(Unrolled),
}

impl Ideal {
    pub fn tag(&self) -> &str {
        match self {
            Ideal::Direct(d) => d.tag(),
            Ideal::Trace(t) => &t.tag,
        }
    }

    pub fn as_trace(&self) -> Option<&Unrolled> {
        match self {
            Ideal::Trace(t) => Some(t),
            Ideal::Direct(_) => None,
        }
    }
}

/// Heuristic copy `h` and ideal copy `i` over one shared workload.
pub struct GapProblem<W> {
    pub problem: Problem,
    pub workload: W,
    pub heuristic: Unrolled,
    pub ideal: Ideal,
    pub num: Term,
    pub den: Term,
}

pub fn build_gap<M: TransitionSpec>(spec: &TraceSpec<M>, mode: IdealMode) -> Result<GapProblem<M::Workload>> {
    let m = &spec.model;
    let mut p = Problem::new();
    p.metadata.insert("model".into(), m.name().to_string());
    p.metadata.insert("horizon".into(), spec.horizon.to_string());
    p.metadata.insert("query".into(), "gap".into());
    let w = m.declare_workload(&mut p)?;
    let h = unroll_into(spec, &mut p, &w, "h", Decisions::Heuristic)?;
    let direct = match mode {
        IdealMode::Trace => None,
        IdealMode::Auto | IdealMode::Direct => m.direct_ideal(&mut p, &w, "i")?,
    };
    let ideal = match (direct, mode) {
        (Some(d), _) => Ideal::Direct(d),
        (None, IdealMode::Direct) => {
            return Err(Error::Unsupported(format!("{} has no direct ideal schedule", m.name())))
        }
        (None, _) => Ideal::Trace(unroll_into(spec, &mut p, &w, "i", Decisions::Free)?),
    };
    p.metadata.insert(
        "ideal".into(),
        match ideal {
            Ideal::Direct(_) => "direct".into(),
            Ideal::Trace(_) => "trace".into(),
        },
    );
    let num = m.metric(&h)?;
    let den = match &ideal {
        Ideal::Direct(d) => d.metric(),
        Ideal::Trace(t) => m.metric(t)?,
    };
    Ok(GapProblem { problem: p, workload: w, heuristic: h, ideal, num, den })
}

pub struct GapOutcome {
    pub ratio: RatioOutcome,
    pub heuristic: Unrolled,
    pub ideal: Ideal,
    pub heuristic_steps: Option<Vec<TraceStep>>,
    pub ideal_steps: Option<Vec<TraceStep>>,
}

/// Is `metric(h) >= q * metric(i)` reachable?
pub fn probe_gap<W>(solver: &Solver, gp: &GapProblem<W>, q: &Rat) -> Result<SolverVerdict> {
    Ok(probe_ratio(solver, &gp.problem, &gp.num, &gp.den, q)?)
}

/// Binary search for the largest heuristic/ideal metric ratio in `[lo, hi]`.
pub fn optimal_gap<M: TransitionSpec>(
    solver: &Solver,
    spec: &TraceSpec<M>,
    mode: IdealMode,
    lo: &Rat,
    hi: &Rat,
    tol: &Rat,
) -> Result<GapOutcome> {
    let gp = build_gap(spec, mode)?;
    let ratio = maximize_ratio(solver, &gp.problem, &gp.num, &gp.den, lo, hi, tol)?;
    let schema = spec.model.schema();
    let (heuristic_steps, ideal_steps) = match &ratio.witness {
        Some(a) => (
            Some(decode_trace(a, &gp.heuristic, schema)?),
            gp.ideal.as_trace().map(|t| decode_trace(a, t, schema)).transpose()?,
        ),
        None => (None, None),
    };
    Ok(GapOutcome { ratio, heuristic: gp.heuristic, ideal: gp.ideal, heuristic_steps, ideal_steps })
}
