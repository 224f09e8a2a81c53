//! Transition systems and bounded unrolling.

use super::schema::{Field, Lifetime, Phase, StateSchema, StateStep};
use crate::error::{Error, Result};
use crate::smt::{term, Problem, Sort, Term};

/// Construction context handed to model callbacks for one trace copy.
///
/// While a guard is set (the trace is not yet done), every assertion made
/// through the context is weakened to `guard => c`; once the trace is done the
/// framework freezes all step fields instead.
pub struct Cx<'a, W> {
    pub p: &'a mut Problem,
    pub w: &'a W,
    pub tag: &'a str,
    guard: Option<Term>,
}

impl<'a, W> Cx<'a, W> {
    pub fn new(p: &'a mut Problem, w: &'a W, tag: &'a str) -> Self {
        Cx { p, w, tag, guard: None }
    }

    /// Variable name scoped to this trace copy.
    pub fn name(&self, s: &str) -> String {
        format!("{}.{s}", self.tag)
    }

    pub fn assert(&mut self, c: Term) {
        match &self.guard {
            Some(g) => self.p.assert(g.implies(&c)),
            None => self.p.assert(c),
        }
    }

    pub fn assert_all(&mut self, cs: impl IntoIterator<Item = Term>) {
        for c in cs {
            self.assert(c);
        }
    }

    pub fn var(&mut self, name: &str, sort: Sort) -> Term {
        let n = self.name(name);
        self.p.var(&n, sort)
    }

    pub fn bool_var(&mut self, name: &str) -> Term {
        self.var(name, Sort::Bool)
    }

    pub fn real_var(&mut self, name: &str) -> Term {
        self.var(name, Sort::Real)
    }

    /// A fresh variable equal to `t` (under the current guard).
    pub fn define(&mut self, name: &str, t: &Term) -> Term {
        if t.as_const().is_some() || t.var_name().is_some() {
            return t.clone();
        }
        let v = self.var(name, t.sort());
        self.assert(v.eq_t(t));
        v
    }

    pub fn guard(&self) -> Option<&Term> {
        self.guard.as_ref()
    }
}

/// A heuristic as an alternation of `Algorithm` and `System` transitions.
pub trait TransitionSpec {
    /// Solver-chosen constants shared by every trace copy of one problem.
    type Workload;

    fn name(&self) -> &str;
    fn schema(&self) -> &StateSchema;
    /// Number of Algorithm/System rounds.
    fn horizon(&self) -> usize;
    fn declare_workload(&self, p: &mut Problem) -> Result<Self::Workload>;
    /// Constraints on the initial state (workload freedom lives here).
    fn initial(&self, cx: &mut Cx<Self::Workload>, s0: &StateStep) -> Result<()>;
    /// The heuristic's zero-time decision from `pre` to `post`.
    fn algorithm(&self, cx: &mut Cx<Self::Workload>, pre: &StateStep, post: &StateStep) -> Result<()>;
    /// Unconstrained decisions, limited only by feasibility. Used for the
    /// ideal copy of a gap query.
    fn free_algorithm(&self, _cx: &mut Cx<Self::Workload>, _pre: &StateStep, _post: &StateStep) -> Result<()> {
        Err(Error::Unsupported(format!("{} has no free-decision transition", self.name())))
    }
    /// The environment: advance time to the next event and update state.
    fn system(&self, cx: &mut Cx<Self::Workload>, post: &StateStep, next: &StateStep) -> Result<()>;
    fn done(&self, s: &StateStep) -> Result<Term>;
    /// Constraints over the whole trace copy (write-once fields, symmetry
    /// breaking, horizon sufficiency).
    fn trace_constraints(&self, _cx: &mut Cx<Self::Workload>, _tr: &Unrolled) -> Result<()> {
        Ok(())
    }
    /// Performance metric of one trace copy; completion time by default.
    fn metric(&self, tr: &Unrolled) -> Result<Term> {
        Ok(tr.final_state().time.clone())
    }
    /// A closed-form ideal schedule over the same workload, used instead of a
    /// free-decision trace copy when available.
    fn direct_ideal(
        &self,
        _p: &mut Problem,
        _w: &Self::Workload,
        _tag: &str,
    ) -> Result<Option<Box<dyn super::query::IdealSchedule>>> {
        Ok(None)
    }
    /// Freeze step fields after `done` and guard transitions with `!done`.
    /// Models whose transitions are already idle once done may opt out.
    fn freeze_when_done(&self) -> bool {
        true
    }
}

/// A transition system plus its horizon.
pub struct TraceSpec<M: TransitionSpec> {
    pub model: M,
    pub horizon: usize,
}

impl<M: TransitionSpec> TraceSpec<M> {
    pub fn new(model: M) -> Self {
        let horizon = model.horizon();
        TraceSpec { model, horizon }
    }
}

/// Whether `Algorithm` is the heuristic or unconstrained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decisions {
    Heuristic,
    Free,
}

/// The states of one unrolled trace copy: `Pre` states `0..=K` and `Post`
/// states `0..K`, interleaved.
#[derive(Clone, Debug)]
pub struct Unrolled {
    pub tag: String,
    pub states: Vec<StateStep>,
    pub done: Vec<Term>,
    pub decisions: Decisions,
}

impl Unrolled {
    pub fn horizon(&self) -> usize {
        self.states.len() / 2
    }

    pub fn pre(&self, t: usize) -> &StateStep {
        &self.states[2 * t]
    }

    pub fn post(&self, t: usize) -> &StateStep {
        &self.states[2 * t + 1]
    }

    pub fn final_state(&self) -> &StateStep {
        self.states.last().expect("non-empty trace")
    }

    pub fn pres(&self) -> impl Iterator<Item = &StateStep> {
        self.states.iter().filter(|s| s.phase == Phase::Pre)
    }
}

fn field_var(p: &mut Problem, tag: &str, state: &str, f: &Field, idx: Option<usize>) -> Term {
    let name = match (f.lifetime, idx) {
        (Lifetime::Trace, Some(i)) => format!("{tag}.{}.{i}", f.name),
        (Lifetime::Trace, None) => format!("{tag}.{}", f.name),
        (Lifetime::Step, Some(i)) => format!("{tag}.{state}.{}.{i}", f.name),
        (Lifetime::Step, None) => format!("{tag}.{state}.{}", f.name),
    };
    p.var(&name, f.sort)
}

struct Statics {
    tasks: Vec<Vec<Option<Term>>>,
    queues: Vec<Vec<Option<Term>>>,
    globals: Vec<Option<Term>>,
}

fn new_state(
    p: &mut Problem,
    schema: &StateSchema,
    layout: &std::sync::Arc<super::schema::Layout>,
    statics: &Statics,
    tag: &str,
    index: usize,
    phase: Phase,
    time: Option<Term>,
) -> StateStep {
    let state = match phase {
        Phase::Pre => format!("s{index}"),
        Phase::Post => format!("s{index}p"),
    };
    let time = time.unwrap_or_else(|| p.var(&format!("{tag}.{state}.time"), Sort::Real));
    let mut pick = |fields: &[Field], st: &[Option<Term>], idx: Option<usize>| -> Vec<Term> {
        fields
            .iter()
            .zip(st)
            .map(|(f, s)| match s {
                Some(t) => t.clone(),
                None => field_var(p, tag, &state, f, idx),
            })
            .collect()
    };
    let tasks = (0..schema.n_tasks)
        .map(|i| pick(&schema.task_fields, &statics.tasks[i], Some(i)))
        .collect();
    let queues = (0..schema.n_resources)
        .map(|r| pick(&schema.queue_fields, &statics.queues[r], Some(r)))
        .collect();
    let globals = pick(&schema.global_fields, &statics.globals, None);
    StateStep { index, phase, time, tasks, queues, globals, layout: layout.clone() }
}

fn frame(a: &StateStep, b: &StateStep, schema: &StateSchema) -> Vec<Term> {
    let mut eqs = vec![b.time.eq_t(&a.time)];
    for i in 0..schema.n_tasks {
        for (k, f) in schema.task_fields.iter().enumerate() {
            if f.lifetime == Lifetime::Step {
                eqs.push(b.tasks[i][k].eq_t(&a.tasks[i][k]));
            }
        }
    }
    for r in 0..schema.n_resources {
        for (k, f) in schema.queue_fields.iter().enumerate() {
            if f.lifetime == Lifetime::Step {
                eqs.push(b.queues[r][k].eq_t(&a.queues[r][k]));
            }
        }
    }
    for (k, f) in schema.global_fields.iter().enumerate() {
        if f.lifetime == Lifetime::Step {
            eqs.push(b.globals[k].eq_t(&a.globals[k]));
        }
    }
    eqs
}

/// Adds one trace copy of `spec` to `p`, tagged `tag`.
pub fn unroll_into<M: TransitionSpec>(
    spec: &TraceSpec<M>,
    p: &mut Problem,
    w: &M::Workload,
    tag: &str,
    decisions: Decisions,
) -> Result<Unrolled> {
    let m = &spec.model;
    let schema = m.schema();
    schema.validate()?;
    if spec.horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let layout = schema.layout();
    let mut statics = Statics {
        tasks: vec![vec![None; schema.task_fields.len()]; schema.n_tasks],
        queues: vec![vec![None; schema.queue_fields.len()]; schema.n_resources],
        globals: vec![None; schema.global_fields.len()],
    };
    for i in 0..schema.n_tasks {
        for (k, f) in schema.task_fields.iter().enumerate() {
            if f.lifetime == Lifetime::Trace {
                statics.tasks[i][k] = Some(field_var(p, tag, "", f, Some(i)));
            }
        }
    }
    for r in 0..schema.n_resources {
        for (k, f) in schema.queue_fields.iter().enumerate() {
            if f.lifetime == Lifetime::Trace {
                statics.queues[r][k] = Some(field_var(p, tag, "", f, Some(r)));
            }
        }
    }
    for (k, f) in schema.global_fields.iter().enumerate() {
        if f.lifetime == Lifetime::Trace {
            statics.globals[k] = Some(field_var(p, tag, "", f, None));
        }
    }

    let k_max = spec.horizon;
    let mut states = Vec::with_capacity(2 * k_max + 1);
    for t in 0..=k_max {
        let pre = new_state(p, schema, &layout, &statics, tag, t, Phase::Pre, None);
        let pre_time = pre.time.clone();
        states.push(pre);
        if t < k_max {
            states.push(new_state(p, schema, &layout, &statics, tag, t, Phase::Post, Some(pre_time)));
        }
    }
    for s in &states {
        for inv in &schema.invariants {
            p.assert_all(inv(s)?);
        }
    }

    let freeze = m.freeze_when_done();
    let mut done = Vec::with_capacity(k_max + 1);
    {
        let mut cx = Cx::new(p, w, tag);
        m.initial(&mut cx, &states[0])?;
        for t in 0..k_max {
            let (pre, post, next) = (&states[2 * t], &states[2 * t + 1], &states[2 * t + 2]);
            let d = m.done(pre)?;
            let d = cx.define(&format!("s{t}.done"), &d);
            if freeze {
                cx.guard = Some(d.not());
            }
            match decisions {
                Decisions::Heuristic => m.algorithm(&mut cx, pre, post)?,
                Decisions::Free => m.free_algorithm(&mut cx, pre, post)?,
            }
            m.system(&mut cx, post, next)?;
            cx.guard = None;
            if freeze {
                let frozen = term::and(frame(pre, post, schema).into_iter().chain(frame(post, next, schema)));
                cx.assert(d.implies(&frozen));
            }
            cx.assert(next.time.ge(&pre.time));
            done.push(d);
        }
        let d = m.done(&states[2 * k_max])?;
        let d = cx.define(&format!("s{k_max}.done"), &d);
        done.push(d);
    }
    let tr = Unrolled { tag: tag.to_string(), states, done, decisions };
    let mut cx = Cx::new(p, w, tag);
    m.trace_constraints(&mut cx, &tr)?;
    Ok(tr)
}

/// A standalone problem holding the workload and one heuristic trace.
pub fn unroll<M: TransitionSpec>(spec: &TraceSpec<M>) -> Result<(Problem, M::Workload, Unrolled)> {
    let mut p = Problem::new();
    p.metadata.insert("model".into(), spec.model.name().to_string());
    p.metadata.insert("horizon".into(), spec.horizon.to_string());
    let w = spec.model.declare_workload(&mut p)?;
    let tr = unroll_into(spec, &mut p, &w, "h", Decisions::Heuristic)?;
    Ok((p, w, tr))
}
