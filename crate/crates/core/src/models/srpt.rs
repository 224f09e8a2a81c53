//! Non-preemptive shortest-remaining-processing-time on one processor, with
//! tasks that alternate ready, running and blocking periods.
//!
//! Each task has `s` steps; step `j` is ready once step `j-1` has finished
//! blocking, runs for `r[i][j]` and then blocks for `bl[i][j]`. One
//! decision starts exactly one step, so `N·s` decisions finish every task.
//! A decision happens when the processor is free and some step is ready:
//! at the later of the previous run's end and the earliest ready time.

use crate::error::{Error, Result};
use crate::framework::{
    build_gap, decode::scoped_values, Cx, Field, GapProblem, IdealMode, IdealSchedule, ScheduleTrace, Segment,
    SegmentKind, StateSchema, StateStep, TraceSpec, TransitionSpec, Unrolled,
};
use crate::rational::{self, serde_rat, Rat};
use crate::smt::{
    build_argmin, maximize_ratio, term, Assignment, Problem, RatioOutcome, Solver, SolverStatus, Sort, Term, Value,
};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;

/// Bound on blocking relative to running: every blocking period is at most
/// `alpha` times every running period. `None` means unbounded.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Alpha(pub Option<Rat>);

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.0 {
            Some(r) => s.serialize_str(&rational::to_exact(r)),
            None => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Str(String),
            Int(i64),
            Float(f64),
            Null(()),
        }
        let parsed = match Repr::deserialize(d)? {
            Repr::Null(()) => return Ok(Alpha(None)),
            Repr::Str(s) if matches!(s.trim(), "inf" | "infinity" | "unbounded") => return Ok(Alpha(None)),
            Repr::Str(s) => rational::parse(&s),
            Repr::Int(v) => Ok(rational::int(v)),
            Repr::Float(v) => rational::parse(&format!("{v}")),
        };
        parsed.map(|r| Alpha(Some(r))).map_err(serde::de::Error::custom)
    }
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrptConfig {
    pub n_tasks: usize,
    #[serde(default = "two")]
    pub steps: usize,
    #[serde(default)]
    pub alpha: Alpha,
    /// Decisions; defaults to `n_tasks * steps`.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Deadline for the deadline query; solver-chosen when absent.
    #[serde(default, with = "serde_rat::option")]
    pub deadline: Option<Rat>,
    #[serde(default)]
    pub workload: Option<SrptWorkload>,
}

/// Concrete run and blocking durations, `[task][step]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrptWorkload {
    #[serde(with = "nested")]
    pub run: Vec<Vec<Rat>>,
    #[serde(with = "nested")]
    pub block: Vec<Vec<Rat>>,
}

mod nested {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Row(#[serde(with = "serde_rat::vec")] Vec<Rat>);

    pub fn serialize<S: Serializer>(v: &[Vec<Rat>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Row> = v.iter().map(|r| Row(r.clone())).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<Rat>>, D::Error> {
        Ok(Vec::<Row>::deserialize(d)?.into_iter().map(|r| r.0).collect())
    }
}

impl SrptWorkload {
    pub fn length(&self, i: usize) -> Rat {
        self.run[i].iter().fold(Rat::zero(), |a, x| a + x)
    }

    pub fn from_assignment(a: &Assignment, n: usize, s: usize) -> Result<Self> {
        let get = |name: String| match a.get(&name) {
            Some(Value::Num(r)) => Ok(r.clone()),
            _ => Err(Error::Decode(format!("assignment has no numeric value for `{name}`"))),
        };
        let mut w = SrptWorkload { run: vec![], block: vec![] };
        for i in 0..n {
            w.run.push((0..s).map(|j| get(format!("w.r.{i}.{j}"))).collect::<Result<_>>()?);
            w.block.push((0..s).map(|j| get(format!("w.bl.{i}.{j}"))).collect::<Result<_>>()?);
        }
        Ok(w)
    }
}

impl SrptConfig {
    pub fn new(n_tasks: usize, steps: usize, alpha: Option<Rat>) -> Self {
        SrptConfig { n_tasks, steps, alpha: Alpha(alpha), horizon: None, deadline: None, workload: None }
    }

    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or(self.n_tasks * self.steps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tasks == 0 || self.steps == 0 {
            return Err(Error::config("n_tasks and steps must be at least 1"));
        }
        if let Some(a) = &self.alpha.0 {
            if !a.is_positive() {
                return Err(Error::config("alpha must be positive or unbounded"));
            }
        }
        if self.horizon == Some(0) {
            return Err(Error::config("horizon must be at least 1"));
        }
        if let Some(w) = &self.workload {
            let shape_ok = |m: &Vec<Vec<Rat>>| m.len() == self.n_tasks && m.iter().all(|r| r.len() == self.steps);
            if !shape_ok(&w.run) || !shape_ok(&w.block) {
                return Err(Error::config(format!(
                    "pinned workload must be {} tasks x {} steps",
                    self.n_tasks, self.steps
                )));
            }
            if w.run.iter().flatten().any(|x| !x.is_positive()) || w.block.iter().flatten().any(|x| x.is_negative()) {
                return Err(Error::config("run periods must be positive and blocking periods non-negative"));
            }
        }
        Ok(())
    }
}

/// Workload terms, `[task][step]`.
#[derive(Clone, Debug)]
pub struct SrptTerms {
    pub run: Vec<Vec<Term>>,
    pub block: Vec<Vec<Term>>,
}

impl SrptTerms {
    fn length(&self, i: usize) -> Term {
        term::sum(self.run[i].iter().cloned(), Sort::Real)
    }

    /// Remaining running time when step `j` of task `i` is about to start.
    fn remaining(&self, i: usize, j: usize) -> Term {
        term::sub(&self.length(i), &term::sum(self.run[i][..j].iter().cloned(), Sort::Real))
    }
}

/// Period boundaries of one schedule, built from its run-start terms.
struct Periods {
    rs: Vec<Vec<Term>>,
    rf: Vec<Vec<Term>>,
    bf: Vec<Vec<Term>>,
}

impl Periods {
    fn new(rs: Vec<Vec<Term>>, w: &SrptTerms) -> Self {
        let rf: Vec<Vec<Term>> =
            rs.iter().enumerate().map(|(i, row)| row.iter().enumerate().map(|(j, x)| x + &w.run[i][j]).collect()).collect();
        let bf = rf
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, x)| x + &w.block[i][j]).collect())
            .collect();
        Periods { rs, rf, bf }
    }

    /// Start of the ready period of step `j`.
    fn ds(&self, i: usize, j: usize) -> Term {
        if j == 0 {
            Term::real_i(0)
        } else {
            self.bf[i][j - 1].clone()
        }
    }

    fn completion(&self, i: usize) -> Term {
        self.bf[i].last().expect("at least one step").clone()
    }
}

pub struct Srpt {
    pub cfg: SrptConfig,
    pub schema: StateSchema,
}

impl Srpt {
    pub fn new(cfg: SrptConfig) -> Self {
        let mut schema = StateSchema::new(cfg.n_tasks, 1);
        for j in 0..cfg.steps {
            schema.task_fields.push(Field::trace(&format!("rs{j}"), Sort::Real));
        }
        for j in 0..cfg.steps {
            schema.task_fields.push(Field::step(&format!("st{j}"), Sort::Bool));
        }
        schema.queue_fields.push(Field::step("busy", Sort::Real));
        Srpt { cfg, schema }
    }

    fn periods(&self, s: &StateStep, w: &SrptTerms) -> Result<Periods> {
        let rs = (0..self.cfg.n_tasks)
            .map(|i| (0..self.cfg.steps).map(|j| s.task(i, &format!("rs{j}")).cloned()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Periods::new(rs, w))
    }

    /// Whether step `j` of task `i` is the next one to start.
    fn current(&self, s: &StateStep, i: usize, j: usize) -> Result<Term> {
        let not_started = s.task(i, &format!("st{j}"))?.not();
        Ok(if j == 0 { not_started } else { term::and2(&not_started, s.task(i, &format!("st{}", j - 1))?) })
    }
}

impl TransitionSpec for Srpt {
    type Workload = SrptTerms;

    fn name(&self) -> &str {
        "srpt"
    }

    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon()
    }

    fn declare_workload(&self, p: &mut Problem) -> Result<SrptTerms> {
        let (n, s) = (self.cfg.n_tasks, self.cfg.steps);
        let run: Vec<Vec<Term>> = (0..n).map(|i| (0..s).map(|j| p.real_var(&format!("w.r.{i}.{j}"))).collect()).collect();
        let block: Vec<Vec<Term>> =
            (0..n).map(|i| (0..s).map(|j| p.real_var(&format!("w.bl.{i}.{j}"))).collect()).collect();
        for x in run.iter().flatten() {
            p.assert(x.gt(&Term::real_i(0)));
        }
        for b in block.iter().flatten() {
            p.assert(b.ge(&Term::real_i(0)));
        }
        if let Some(alpha) = &self.cfg.alpha.0 {
            for b in block.iter().flatten() {
                for x in run.iter().flatten() {
                    p.assert(b.le(&x.scale(alpha)));
                }
            }
        }
        if let Some(cw) = &self.cfg.workload {
            for i in 0..n {
                for j in 0..s {
                    p.assert(run[i][j].eq_t(&Term::real(cw.run[i][j].clone())));
                    p.assert(block[i][j].eq_t(&Term::real(cw.block[i][j].clone())));
                }
            }
        }
        Ok(SrptTerms { run, block })
    }

    fn initial(&self, cx: &mut Cx<SrptTerms>, s0: &StateStep) -> Result<()> {
        cx.assert(s0.time.eq_t(&Term::real_i(0)));
        cx.assert(s0.queue(0, "busy")?.eq_t(&Term::real_i(0)));
        for i in 0..self.cfg.n_tasks {
            for j in 0..self.cfg.steps {
                cx.assert(s0.task(i, &format!("st{j}"))?.not());
            }
        }
        Ok(())
    }

    fn algorithm(&self, cx: &mut Cx<SrptTerms>, pre: &StateStep, post: &StateStep) -> Result<()> {
        let w = cx.w;
        let (n, s) = (self.cfg.n_tasks, self.cfg.steps);
        let per = self.periods(pre, w)?;
        let mut cand = Vec::with_capacity(n);
        let mut val = Vec::with_capacity(n);
        for i in 0..n {
            let mut ready = Vec::new();
            let mut rem = Vec::new();
            for j in 0..s {
                let cur = self.current(pre, i, j)?;
                ready.push(term::and2(&cur, &per.ds(i, j).le(&pre.time)));
                rem.push(term::ite(&cur, &w.remaining(i, j), &Term::real_i(0)));
            }
            cand.push(term::or(ready));
            val.push(term::sum(rem, Sort::Real));
        }
        let prefix = cx.name(&format!("s{}.sel", pre.index));
        let (sel, side) = build_argmin(cx.p, &prefix, &val, &cand)?;
        cx.assert_all(side);
        let mut ends = Vec::new();
        let mut any = Vec::new();
        for i in 0..n {
            for j in 0..s {
                let asg = term::and2(&sel[i], &self.current(pre, i, j)?);
                cx.assert(asg.implies(&per.rs[i][j].eq_t(&pre.time)));
                let st = format!("st{j}");
                cx.assert(post.task(i, &st)?.iff(&term::or2(pre.task(i, &st)?, &asg)));
                ends.push(term::ite(&asg, &per.rf[i][j], &Term::real_i(0)));
                any.push(asg);
            }
        }
        let busy = term::ite(&term::or(any), &term::sum(ends, Sort::Real), pre.queue(0, "busy")?);
        cx.assert(post.queue(0, "busy")?.eq_t(&busy));
        Ok(())
    }

    fn system(&self, cx: &mut Cx<SrptTerms>, post: &StateStep, next: &StateStep) -> Result<()> {
        let w = cx.w;
        let (n, s) = (self.cfg.n_tasks, self.cfg.steps);
        let per = self.periods(post, w)?;
        for i in 0..n {
            for j in 0..s {
                let st = format!("st{j}");
                cx.assert(next.task(i, &st)?.iff(post.task(i, &st)?));
            }
        }
        let busy = post.queue(0, "busy")?.clone();
        cx.assert(next.queue(0, "busy")?.eq_t(&busy));
        // Earliest ready time among the steps that come next.
        let m = cx.real_var(&format!("s{}.ready", post.index));
        let mut cur = Vec::new();
        let mut bounds = Vec::new();
        let mut hits = Vec::new();
        for i in 0..n {
            for j in 0..s {
                let c = self.current(post, i, j)?;
                let ds = per.ds(i, j);
                bounds.push(c.implies(&m.le(&ds)));
                hits.push(term::and2(&c, &m.eq_t(&ds)));
                cur.push(c);
            }
        }
        let any = term::or(cur);
        cx.assert(any.implies(&term::and2(&term::and(bounds), &term::or(hits))));
        let wake = term::ite(&busy.ge(&m), &busy, &m);
        cx.assert(term::ite(&any, &next.time.eq_t(&wake), &next.time.eq_t(&post.time)));
        Ok(())
    }

    fn done(&self, s: &StateStep) -> Result<Term> {
        let last = format!("st{}", self.cfg.steps - 1);
        Ok(term::and(s.task_col(&last)?))
    }

    fn trace_constraints(&self, cx: &mut Cx<SrptTerms>, tr: &Unrolled) -> Result<()> {
        // Every step starts within the horizon.
        let last = format!("st{}", self.cfg.steps - 1);
        cx.assert(term::and(tr.final_state().task_col(&last)?));
        Ok(())
    }

    fn metric(&self, tr: &Unrolled) -> Result<Term> {
        let w = srpt_terms_of(&self.cfg);
        let per = self.periods(tr.pre(0), &w)?;
        Ok(term::sum((0..self.cfg.n_tasks).map(|i| per.completion(i)), Sort::Real))
    }

    fn freeze_when_done(&self) -> bool {
        false
    }

    fn direct_ideal(&self, p: &mut Problem, w: &SrptTerms, tag: &str) -> Result<Option<Box<dyn IdealSchedule>>> {
        Ok(Some(Box::new(FreeSchedule::build(&self.cfg, p, w, tag))))
    }
}

/// Workload terms by name, for callers that only have the config.
fn srpt_terms_of(cfg: &SrptConfig) -> SrptTerms {
    let (n, s) = (cfg.n_tasks, cfg.steps);
    SrptTerms {
        run: (0..n).map(|i| (0..s).map(|j| Term::var(&format!("w.r.{i}.{j}"), Sort::Real)).collect()).collect(),
        block: (0..n).map(|i| (0..s).map(|j| Term::var(&format!("w.bl.{i}.{j}"), Sort::Real)).collect()).collect(),
    }
}

/// The comparison schedule: any single-processor schedule of the same
/// periods. Steps of a task run in order, each after the previous one has
/// finished blocking, and no two running periods overlap.
pub struct FreeSchedule {
    tag: String,
    completions: Vec<Term>,
}

impl FreeSchedule {
    pub fn build(cfg: &SrptConfig, p: &mut Problem, w: &SrptTerms, tag: &str) -> Self {
        let (n, s) = (cfg.n_tasks, cfg.steps);
        let rs: Vec<Vec<Term>> =
            (0..n).map(|i| (0..s).map(|j| p.real_var(&format!("{tag}.rs{j}.{i}"))).collect()).collect();
        let per = Periods::new(rs, w);
        for i in 0..n {
            p.assert(per.rs[i][0].ge(&Term::real_i(0)));
            for j in 1..s {
                p.assert(per.rs[i][j].ge(&per.bf[i][j - 1]));
            }
        }
        let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..s).map(move |j| (i, j))).collect();
        for (x, &(i, j)) in all.iter().enumerate() {
            for &(l, k) in &all[x + 1..] {
                if i != l {
                    p.assert(term::or2(&per.rf[i][j].le(&per.rs[l][k]), &per.rf[l][k].le(&per.rs[i][j])));
                }
            }
        }
        FreeSchedule { tag: tag.to_string(), completions: (0..n).map(|i| per.completion(i)).collect() }
    }

    pub fn completions(&self) -> &[Term] {
        &self.completions
    }
}

impl IdealSchedule for FreeSchedule {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn metric(&self) -> Term {
        term::sum(self.completions.iter().cloned(), Sort::Real)
    }
}

pub fn build_srpt_trace(cfg: &SrptConfig) -> Result<TraceSpec<Srpt>> {
    cfg.validate()?;
    Ok(TraceSpec::new(Srpt::new(cfg.clone())))
}

/// SRPT copy `h` and free copy `i` over one workload.
pub fn srpt_dual(cfg: &SrptConfig) -> Result<GapProblem<SrptTerms>> {
    build_gap(&build_srpt_trace(cfg)?, IdealMode::Direct)
}

fn completion_terms(cfg: &SrptConfig, tag: &str) -> Vec<Term> {
    let w = srpt_terms_of(cfg);
    let rs = (0..cfg.n_tasks)
        .map(|i| (0..cfg.steps).map(|j| Term::var(&format!("{tag}.rs{j}.{i}"), Sort::Real)).collect())
        .collect();
    let per = Periods::new(rs, &w);
    (0..cfg.n_tasks).map(|i| per.completion(i)).collect()
}

/// Outcome of an SRPT query with its decoded dual schedules.
pub struct SrptOutcome {
    pub status: &'static str,
    pub wall_time: f64,
    pub witness: Option<Assignment>,
    pub srpt: Option<ScheduleTrace>,
    pub query: Option<ScheduleTrace>,
}

fn finish(cfg: &SrptConfig, gp: &GapProblem<SrptTerms>, status: SolverStatus, wall_time: f64, verdict: &str) -> Result<SrptOutcome> {
    let label = status.label();
    match status {
        SolverStatus::Sat(a) => {
            let srpt = Some(decode_schedule(cfg, &a, Some(&gp.heuristic), "h", "heuristic", verdict)?);
            let query = Some(decode_schedule(cfg, &a, None, gp.ideal.tag(), "ideal", verdict)?);
            Ok(SrptOutcome { status: label, wall_time, witness: Some(a), srpt, query })
        }
        _ => Ok(SrptOutcome { status: label, wall_time, witness: None, srpt: None, query: None }),
    }
}

/// Goal for the average query: SRPT's total completion is exactly `q` times
/// the free schedule's.
pub fn avg_goal(gp: &GapProblem<SrptTerms>, q: &Rat) -> Result<Term> {
    if !q.is_positive() {
        return Err(Error::config("q must be positive"));
    }
    Ok(gp.num.eq_t(&gp.den.scale(q)))
}

pub fn srpt_avg_ratio_query(solver: &Solver, cfg: &SrptConfig, q: &Rat) -> Result<SrptOutcome> {
    let gp = srpt_dual(cfg)?;
    let goal = avg_goal(&gp, q)?;
    let v = solver.check(&gp.problem, Some(&goal))?;
    finish(cfg, &gp, v.status, v.wall_time, "avg")
}

/// Largest ratio of SRPT's total completion time over the free schedule's.
pub fn srpt_avg_optimize(solver: &Solver, cfg: &SrptConfig, hi: Option<Rat>, tol: &Rat) -> Result<(RatioOutcome, Option<SrptOutcome>)> {
    let gp = srpt_dual(cfg)?;
    let hi = hi.unwrap_or_else(|| rational::int(cfg.n_tasks as i64));
    let out = maximize_ratio(solver, &gp.problem, &gp.num, &gp.den, &Rat::one(), &hi, tol)?;
    let dual = match &out.witness {
        Some(a) => Some(finish(cfg, &gp, SolverStatus::Sat(a.clone()), 0.0, out.status.label())?),
        None => None,
    };
    Ok((out, dual))
}

/// Goal for the deadline query. With `deadline = None` the deadline is a
/// solver-chosen `G >= 0`.
pub fn deadline_goal(p: &mut Problem, cfg: &SrptConfig, deadline: Option<&Rat>, a_srpt: usize, a_query: usize) -> Result<Term> {
    if a_srpt > cfg.n_tasks || a_query > cfg.n_tasks {
        return Err(Error::config(format!("task counts must not exceed n_tasks = {}", cfg.n_tasks)));
    }
    let g = match deadline {
        Some(d) => Term::real(d.clone()),
        None => {
            let g = p.real_var("G");
            p.assert(g.ge(&Term::real_i(0)));
            g
        }
    };
    let by = |tag: &str| term::count(&completion_terms(cfg, tag).iter().map(|c| c.le(&g)).collect::<Vec<_>>());
    Ok(term::and2(&by("h").eq_t(&Term::int(a_srpt as i64)), &by("i").eq_t(&Term::int(a_query as i64))))
}

pub fn srpt_deadline_query(
    solver: &Solver,
    cfg: &SrptConfig,
    deadline: Option<&Rat>,
    a_srpt: usize,
    a_query: usize,
) -> Result<SrptOutcome> {
    let (gp, goal) = srpt_deadline_problem(cfg, deadline, a_srpt, a_query)?;
    let v = solver.check(&gp.problem, Some(&goal))?;
    finish(cfg, &gp, v.status, v.wall_time, "deadline")
}

/// The dual problem and goal a deadline query solves.
pub fn srpt_deadline_problem(
    cfg: &SrptConfig,
    deadline: Option<&Rat>,
    a_srpt: usize,
    a_query: usize,
) -> Result<(GapProblem<SrptTerms>, Term)> {
    let mut gp = srpt_dual(cfg)?;
    let deadline = deadline.or(cfg.deadline.as_ref());
    let goal = deadline_goal(&mut gp.problem, cfg, deadline, a_srpt, a_query)?;
    Ok((gp, goal))
}

/// Run starts `[task][step]` of copy `tag`.
pub fn run_starts(a: &Assignment, cfg: &SrptConfig, tag: &str) -> Result<Vec<Vec<Rat>>> {
    (0..cfg.n_tasks)
        .map(|i| {
            (0..cfg.steps)
                .map(|j| match a.get(&format!("{tag}.rs{j}.{i}")) {
                    Some(Value::Num(r)) => Ok(r.clone()),
                    _ => Err(Error::Decode(format!("assignment has no value for `{tag}.rs{j}.{i}`"))),
                })
                .collect()
        })
        .collect()
}

fn segments(w: &SrptWorkload, rs: &[Vec<Rat>]) -> Vec<Segment> {
    let mut out = Vec::new();
    for (i, row) in rs.iter().enumerate() {
        let mut ready = Rat::zero();
        for (j, start) in row.iter().enumerate() {
            let name = format!("T{}", i + 1);
            if start > &ready {
                out.push(Segment { row: name.clone(), start: ready.clone(), end: start.clone(), kind: SegmentKind::Wait, label: String::new() });
            }
            let rf = start + &w.run[i][j];
            out.push(Segment { row: name.clone(), start: start.clone(), end: rf.clone(), kind: SegmentKind::Run, label: format!("s{}", j + 1) });
            let bf = &rf + &w.block[i][j];
            if bf > rf {
                out.push(Segment { row: name, start: rf, end: bf.clone(), kind: SegmentKind::Block, label: String::new() });
            }
            ready = bf;
        }
    }
    out
}

fn decode_schedule(
    cfg: &SrptConfig,
    a: &Assignment,
    tr: Option<&Unrolled>,
    tag: &str,
    label: &str,
    verdict: &str,
) -> Result<ScheduleTrace> {
    let w = SrptWorkload::from_assignment(a, cfg.n_tasks, cfg.steps)?;
    let rs = run_starts(a, cfg, tag)?;
    let steps = match tr {
        Some(tr) => crate::framework::decode_trace(a, tr, &Srpt::new(cfg.clone()).schema)?,
        None => Vec::new(),
    };
    Ok(ScheduleTrace {
        model: "srpt".into(),
        label: label.into(),
        verdict: verdict.into(),
        params: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
        steps,
        segments: segments(&w, &rs),
        workload: a.iter().filter(|(k, _)| k.starts_with("w.")).map(|(k, v)| (k.clone(), v.clone())).collect(),
        assignment: scoped_values(a, tag),
    })
}

/// Non-preemptive SRPT run directly on concrete durations. Returns run
/// starts `[task][step]`; ties on remaining time go to the smaller index.
pub fn simulate_srpt(w: &SrptWorkload) -> Vec<Vec<Rat>> {
    let n = w.run.len();
    let s = w.run.first().map_or(0, |r| r.len());
    let mut next_step = vec![0usize; n];
    let mut ready_at = vec![Rat::zero(); n];
    let mut done_run = vec![Rat::zero(); n];
    let mut rs = vec![vec![Rat::zero(); s]; n];
    let mut free_at = Rat::zero();
    for _ in 0..n * s {
        let pending: Vec<usize> = (0..n).filter(|&i| next_step[i] < s).collect();
        let Some(earliest) = pending.iter().map(|&i| ready_at[i].clone()).min() else { break };
        let now = if free_at > earliest { free_at.clone() } else { earliest };
        let pick = pending
            .iter()
            .copied()
            .filter(|&i| ready_at[i] <= now)
            .min_by(|&a, &b| (w.length(a) - &done_run[a], a).cmp(&(w.length(b) - &done_run[b], b)))
            .expect("some step is ready at the chosen time");
        let j = next_step[pick];
        rs[pick][j] = now.clone();
        free_at = &now + &w.run[pick][j];
        done_run[pick] += &w.run[pick][j];
        ready_at[pick] = &free_at + &w.block[pick][j];
        next_step[pick] += 1;
    }
    rs
}

/// Completion times of a schedule after checking the period constraints:
/// steps in order, each ready after the previous block, and no two running
/// periods of different tasks overlapping.
pub fn check_schedule(w: &SrptWorkload, rs: &[Vec<Rat>]) -> Result<Vec<Rat>> {
    let n = w.run.len();
    let mut runs = Vec::new();
    let mut comp = Vec::with_capacity(n);
    for i in 0..n {
        let mut ready = Rat::zero();
        for (j, start) in rs[i].iter().enumerate() {
            if start < &ready {
                return Err(Error::replay(format!("T{} step {} starts at {} before it is ready at {}", i + 1, j + 1, start, ready)));
            }
            let rf = start + &w.run[i][j];
            runs.push((i, start.clone(), rf.clone()));
            ready = &rf + &w.block[i][j];
        }
        comp.push(ready);
    }
    for (x, (i, s1, f1)) in runs.iter().enumerate() {
        for (l, s2, f2) in &runs[x + 1..] {
            if i != l && !(f1 <= s2 || f2 <= s1) {
                return Err(Error::replay(format!("running periods of T{} and T{} overlap", i + 1, l + 1)));
            }
        }
    }
    Ok(comp)
}

/// Checks the SRPT copy of a witness against the simulator and the query
/// copy against the period constraints; returns both completion vectors.
pub fn replay_dual(cfg: &SrptConfig, a: &Assignment) -> Result<(Vec<Rat>, Vec<Rat>)> {
    let w = SrptWorkload::from_assignment(a, cfg.n_tasks, cfg.steps)?;
    let h = run_starts(a, cfg, "h")?;
    let sim = simulate_srpt(&w);
    for i in 0..cfg.n_tasks {
        for j in 0..cfg.steps {
            if h[i][j] != sim[i][j] {
                return Err(Error::replay(format!(
                    "T{} step {}: trace starts at {}, SRPT starts it at {}",
                    i + 1,
                    j + 1,
                    rational::to_exact(&h[i][j]),
                    rational::to_exact(&sim[i][j])
                )));
            }
        }
    }
    let ch = check_schedule(&w, &h)?;
    let cq = check_schedule(&w, &run_starts(a, cfg, "i")?)?;
    if let Some(alpha) = &cfg.alpha.0 {
        let min_run = w.run.iter().flatten().min().cloned().unwrap_or_else(Rat::zero);
        if w.block.iter().flatten().any(|b| b > &(alpha * &min_run)) {
            return Err(Error::replay("a blocking period exceeds alpha times the shortest run"));
        }
    }
    Ok((ch, cq))
}

/// Named completion times of both copies, for reports.
pub fn completions(a: &Assignment, cfg: &SrptConfig) -> Result<BTreeMap<&'static str, Vec<Rat>>> {
    let w = SrptWorkload::from_assignment(a, cfg.n_tasks, cfg.steps)?;
    let mut m = BTreeMap::new();
    m.insert("srpt", check_schedule(&w, &run_starts(a, cfg, "h")?)?);
    m.insert("query", check_schedule(&w, &run_starts(a, cfg, "i")?)?);
    Ok(m)
}
