//! Single-stage packet schedulers: FIFO, strict priority and round robin.
//!
//! Invocation `t` dequeues one packet at time `t + 1`. Before it, up to
//! `k_arrivals` packets may arrive at each input queue during `(t, t + 1)`;
//! their timestamps are fixed by slot, so the solver only chooses which
//! slots carry a packet. A packet arriving at a full queue is dropped.
//! Arrivals of one interval happen before that interval's dequeue.

use crate::error::{Error, Result};
use crate::framework::{
    build_check, decode::scoped_values, run_check, CheckOutcome, CheckProblem, Cx, Field, ScheduleTrace, Segment, SegmentKind,
    StateSchema, StateStep, TraceSpec, TransitionSpec, Verdict,
};
use crate::rational::{self, Rat};
use crate::smt::{build_argmin_lex, term, Assignment, Problem, Solver, Sort, Term, Value};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    Fifo,
    Priority,
    #[serde(alias = "rr", alias = "round-robin")]
    RoundRobin,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PktConfig {
    pub scheduler: Scheduler,
    #[serde(alias = "queues", default = "one")]
    pub n_queues: usize,
    #[serde(alias = "capacity", default = "two")]
    pub queue_capacity: usize,
    #[serde(default = "one")]
    pub k_arrivals: usize,
    /// Invocations.
    pub horizon: usize,
    /// Pins arrivals: `arrivals[t][q]` packets reach queue `q` before
    /// invocation `t`.
    #[serde(default)]
    pub arrivals: Option<Vec<Vec<usize>>>,
}

impl PktConfig {
    pub fn new(scheduler: Scheduler, n_queues: usize, horizon: usize) -> Self {
        PktConfig { scheduler, n_queues, queue_capacity: 2, k_arrivals: 1, horizon, arrivals: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_queues == 0 || self.queue_capacity == 0 || self.horizon == 0 {
            return Err(Error::config("n_queues, queue_capacity and horizon must be at least 1"));
        }
        if let Some(arr) = &self.arrivals {
            if arr.len() != self.horizon || arr.iter().any(|r| r.len() != self.n_queues) {
                return Err(Error::config(format!("arrivals must be {} x {}", self.horizon, self.n_queues)));
            }
            if arr.iter().flatten().any(|&a| a > self.k_arrivals) {
                return Err(Error::config("arrivals exceed k_arrivals"));
            }
        }
        Ok(())
    }

    pub fn n_packets(&self) -> usize {
        self.horizon * self.n_queues * self.k_arrivals
    }

    /// Packet id of slot `k` of queue `q` in interval `t`.
    pub fn packet(&self, t: usize, q: usize, k: usize) -> usize {
        (t * self.n_queues + q) * self.k_arrivals + k
    }

    /// `(interval, queue, slot)` of a packet id.
    pub fn slot(&self, p: usize) -> (usize, usize, usize) {
        let k = p % self.k_arrivals;
        let rest = p / self.k_arrivals;
        (rest / self.n_queues, rest % self.n_queues, k)
    }

    pub fn arrival_time(&self, p: usize) -> Rat {
        let (t, _, k) = self.slot(p);
        rational::int(t as i64) + rational::ratio(k as i64 + 1, self.k_arrivals as i64 + 1)
    }

    /// Location codes: input queues `0..N`, then output, dropped, absent.
    pub fn output(&self) -> i64 {
        self.n_queues as i64
    }

    pub fn dropped(&self) -> i64 {
        self.n_queues as i64 + 1
    }

    pub fn absent(&self) -> i64 {
        -1
    }
}

pub struct PktSched {
    pub cfg: PktConfig,
    pub schema: StateSchema,
}

/// Arrival flags `[interval][queue][slot]`.
pub struct Arrivals(pub Vec<Vec<Vec<Term>>>);

impl PktSched {
    pub fn new(cfg: PktConfig) -> Self {
        let mut schema = StateSchema::new(cfg.n_packets(), cfg.n_queues);
        schema.task_fields.push(Field::step("loc", Sort::Int));
        schema.queue_fields.push(Field::step("occ", Sort::Int));
        schema.queue_fields.push(Field::step("tally", Sort::Int));
        schema.global_fields.push(Field::step("served", Sort::Int));
        PktSched { cfg, schema }
    }

    fn define_occ(&self, cx: &mut Cx<Arrivals>, s: &StateStep) -> Result<()> {
        let loc = s.task_col("loc")?;
        for q in 0..self.cfg.n_queues {
            let here: Vec<Term> = loc.iter().map(|l| l.eq_t(&Term::int(q as i64))).collect();
            cx.assert(s.queue(q, "occ")?.eq_t(&term::count(&here)));
        }
        Ok(())
    }

    /// Locations after interval `t`'s arrivals, given locations before.
    fn arrive(&self, cx: &mut Cx<Arrivals>, t: usize, before: &StateStep, after: &StateStep) -> Result<()> {
        let c = &self.cfg;
        let w = cx.w;
        let mut fresh = vec![false; c.n_packets()];
        for q in 0..c.n_queues {
            let mut occ = before.queue(q, "occ")?.clone();
            for k in 0..c.k_arrivals {
                let p = c.packet(t, q, k);
                fresh[p] = true;
                let arr = w.0[t][q][k].clone();
                let fits = occ.lt(&Term::int(c.queue_capacity as i64));
                let loc = term::ite(
                    &arr,
                    &term::ite(&fits, &Term::int(q as i64), &Term::int(c.dropped())),
                    &Term::int(c.absent()),
                );
                cx.assert(after.task(p, "loc")?.eq_t(&loc));
                occ = &occ + &term::ite(&term::and2(&arr, &fits), &Term::int(1), &Term::int(0));
            }
        }
        for (p, is_fresh) in fresh.iter().enumerate() {
            if !is_fresh {
                cx.assert(after.task(p, "loc")?.eq_t(before.task(p, "loc")?));
            }
        }
        Ok(())
    }

    /// Packets of queue `q` in arrival order.
    fn queue_order(&self, q: usize) -> Vec<usize> {
        let c = &self.cfg;
        (0..c.horizon).flat_map(|t| (0..c.k_arrivals).map(move |k| (t, k))).map(|(t, k)| c.packet(t, q, k)).collect()
    }

    /// Static service order for schedulers whose choice only depends on
    /// which packets are queued.
    fn static_order(&self) -> Vec<usize> {
        let c = &self.cfg;
        let mut ps: Vec<usize> = (0..c.n_packets()).collect();
        match c.scheduler {
            Scheduler::Fifo => ps.sort_by_key(|&p| (c.arrival_time(p), c.slot(p).1)),
            _ => ps.sort_by_key(|&p| (c.slot(p).1, c.arrival_time(p))),
        }
        ps
    }
}

/// `flags[i]` and no earlier flag.
fn first_of(flags: &[Term]) -> Vec<Term> {
    (0..flags.len()).map(|i| term::and(flags[..i].iter().map(|f| f.not()).chain([flags[i].clone()]))).collect()
}

impl TransitionSpec for PktSched {
    type Workload = Arrivals;

    fn name(&self) -> &str {
        "pktsched"
    }

    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn declare_workload(&self, p: &mut Problem) -> Result<Arrivals> {
        let c = &self.cfg;
        let mut arr = Vec::new();
        for t in 0..c.horizon {
            let mut per_q = Vec::new();
            for q in 0..c.n_queues {
                let flags: Vec<Term> = (0..c.k_arrivals).map(|k| p.bool_var(&format!("w.arr.{t}.{q}.{k}"))).collect();
                // Used slots come first.
                for k in 1..flags.len() {
                    p.assert(flags[k].implies(&flags[k - 1]));
                }
                if let Some(pinned) = &c.arrivals {
                    for (k, f) in flags.iter().enumerate() {
                        p.assert(if k < pinned[t][q] { f.clone() } else { f.not() });
                    }
                }
                per_q.push(flags);
            }
            arr.push(per_q);
        }
        Ok(Arrivals(arr))
    }

    fn initial(&self, cx: &mut Cx<Arrivals>, s0: &StateStep) -> Result<()> {
        cx.assert(s0.time.eq_t(&Term::real_i(1)));
        for q in 0..self.cfg.n_queues {
            cx.assert(s0.queue(q, "tally")?.eq_t(&Term::int(0)));
        }
        cx.assert(s0.global("served")?.eq_t(&Term::int(-1)));
        // Interval 0 arrives into empty queues.
        let c = &self.cfg;
        for q in 0..c.n_queues {
            let mut accepted = 0usize;
            for k in 0..c.k_arrivals {
                let p = c.packet(0, q, k);
                let code = if accepted < c.queue_capacity { q as i64 } else { c.dropped() };
                let arr = cx.w.0[0][q][k].clone();
                cx.assert(s0.task(p, "loc")?.eq_t(&term::ite(&arr, &Term::int(code), &Term::int(c.absent()))));
                accepted += 1;
            }
        }
        for p in 0..c.n_packets() {
            if c.slot(p).0 > 0 {
                cx.assert(s0.task(p, "loc")?.eq_t(&Term::int(c.absent())));
            }
        }
        self.define_occ(cx, s0)
    }

    fn algorithm(&self, cx: &mut Cx<Arrivals>, pre: &StateStep, post: &StateStep) -> Result<()> {
        let c = &self.cfg;
        let n = c.n_packets();
        let queued: Vec<Term> =
            (0..n).map(|p| pre.task(p, "loc").map(|l| l.eq_t(&Term::int(c.slot(p).1 as i64)))).collect::<Result<_>>()?;
        let mut pick = vec![Term::bool(false); n];
        match c.scheduler {
            Scheduler::Fifo | Scheduler::Priority => {
                let order = self.static_order();
                let flags: Vec<Term> = order.iter().map(|&p| queued[p].clone()).collect();
                for (x, sel) in first_of(&flags).into_iter().enumerate() {
                    pick[order[x]] = sel;
                }
            }
            Scheduler::RoundRobin => {
                let keys: Vec<Vec<Term>> = (0..c.n_queues)
                    .map(|q| Ok(vec![pre.queue(q, "tally")?.clone(), Term::int(q as i64)]))
                    .collect::<Result<_>>()?;
                let nonempty: Vec<Term> =
                    (0..c.n_queues).map(|q| pre.queue(q, "occ").map(|o| o.gt(&Term::int(0)))).collect::<Result<_>>()?;
                let prefix = cx.name(&format!("s{}.rr", pre.index));
                let (chosen, side) = build_argmin_lex(cx.p, &prefix, &keys, &nonempty)?;
                cx.assert_all(side);
                let any = term::or(nonempty.iter().cloned());
                for q in 0..c.n_queues {
                    let order = self.queue_order(q);
                    let flags: Vec<Term> = order.iter().map(|&p| queued[p].clone()).collect();
                    for (x, sel) in first_of(&flags).into_iter().enumerate() {
                        pick[order[x]] = term::and2(&chosen[q], &sel);
                    }
                    // Polled this round: served, or skipped as empty ahead of
                    // the served queue.
                    let ahead = term::or((0..c.n_queues).filter(|&r| r != q).map(|r| {
                        term::and2(&chosen[r], &crate::smt::lex_lt(&keys[q], &keys[r]))
                    }));
                    let polled = term::and2(&any, &term::or2(&chosen[q], &ahead));
                    let tally = pre.queue(q, "tally")?;
                    cx.assert(post.queue(q, "tally")?.eq_t(&term::ite(&polled, &(tally + &Term::int(1)), tally)));
                }
            }
        }
        if c.scheduler != Scheduler::RoundRobin {
            for q in 0..c.n_queues {
                cx.assert(post.queue(q, "tally")?.eq_t(pre.queue(q, "tally")?));
            }
        }
        let mut served = Term::int(-1);
        for p in (0..n).rev() {
            served = term::ite(&pick[p], &Term::int(c.slot(p).1 as i64), &served);
            let loc = pre.task(p, "loc")?;
            cx.assert(post.task(p, "loc")?.eq_t(&term::ite(&pick[p], &Term::int(c.output()), loc)));
        }
        cx.assert(post.global("served")?.eq_t(&served));
        self.define_occ(cx, post)
    }

    fn system(&self, cx: &mut Cx<Arrivals>, post: &StateStep, next: &StateStep) -> Result<()> {
        cx.assert(next.time.eq_t(&(&post.time + &Term::real_i(1))));
        for q in 0..self.cfg.n_queues {
            cx.assert(next.queue(q, "tally")?.eq_t(post.queue(q, "tally")?));
        }
        cx.assert(next.global("served")?.eq_t(&Term::int(-1)));
        let t = next.index;
        if t < self.cfg.horizon {
            self.arrive(cx, t, post, next)?;
        } else {
            for p in 0..self.cfg.n_packets() {
                cx.assert(next.task(p, "loc")?.eq_t(post.task(p, "loc")?));
            }
        }
        self.define_occ(cx, next)
    }

    /// Every packet that arrived has left the input queues.
    fn done(&self, s: &StateStep) -> Result<Term> {
        let c = &self.cfg;
        Ok(term::and((0..c.n_packets()).map(|p| {
            s.task(p, "loc").map(|l| l.ne(&Term::int(c.slot(p).1 as i64))).unwrap_or_else(|_| Term::bool(false))
        })))
    }

    fn freeze_when_done(&self) -> bool {
        false
    }
}

pub fn build_pkt_trace(cfg: &PktConfig) -> Result<TraceSpec<PktSched>> {
    cfg.validate()?;
    Ok(TraceSpec::new(PktSched::new(cfg.clone())))
}

pub struct PktOutcome {
    pub verdict: Verdict,
    pub status: &'static str,
    pub wall_time: f64,
    pub witness: Option<Assignment>,
    pub trace: Option<ScheduleTrace>,
}

fn finish(cfg: &PktConfig, out: CheckOutcome, label: &str) -> Result<PktOutcome> {
    let trace = match (&out.counterexample, out.steps) {
        (Some(a), Some(steps)) => Some(ScheduleTrace {
            model: "pktsched".into(),
            label: label.into(),
            verdict: out.verdict.label().into(),
            params: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
            steps,
            segments: segments(cfg, a)?,
            workload: a.iter().filter(|(k, _)| k.starts_with("w.")).map(|(k, v)| (k.clone(), v.clone())).collect(),
            assignment: scoped_values(a, "h"),
        }),
        _ => None,
    };
    Ok(PktOutcome { verdict: out.verdict, status: out.solver_status, wall_time: out.wall_time, witness: out.counterexample, trace })
}

/// Is there an arrival pattern under which queue `victim` (1-based) stays
/// nonempty and unserved for `n_invocations` consecutive invocations?
pub fn pkt_starvation_query(solver: &Solver, cfg: &PktConfig, victim: usize, n_invocations: usize) -> Result<PktOutcome> {
    let spec = build_pkt_trace(cfg)?;
    let cp = pkt_starvation_problem(cfg, victim, n_invocations)?;
    finish(cfg, run_check(solver, &spec, cp)?, "starvation")
}

pub fn pkt_starvation_problem(cfg: &PktConfig, victim: usize, n_invocations: usize) -> Result<CheckProblem<Arrivals>> {
    if victim == 0 || victim > cfg.n_queues {
        return Err(Error::config(format!("victim queue must lie in 1..={}", cfg.n_queues)));
    }
    if n_invocations == 0 || n_invocations > cfg.horizon {
        return Err(Error::config(format!("n_invocations must lie in 1..={}", cfg.horizon)));
    }
    let spec = build_pkt_trace(cfg)?;
    let v = victim - 1;
    build_check(&spec, |_, tr| {
        let mut windows = Vec::new();
        for s in 0..=tr.horizon() - n_invocations {
            let mut w = Vec::new();
            for t in s..s + n_invocations {
                w.push(tr.pre(t).queue(v, "occ")?.gt(&Term::int(0)));
                w.push(tr.post(t).global("served")?.ne(&Term::int(v as i64)));
            }
            windows.push(term::and(w));
        }
        Ok(term::or(windows))
    })
}

/// Arrivals `[interval][queue]` read from a model.
pub fn arrivals_of(a: &Assignment, cfg: &PktConfig) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for t in 0..cfg.horizon {
        let mut row = Vec::new();
        for q in 0..cfg.n_queues {
            let mut n = 0;
            for k in 0..cfg.k_arrivals {
                match a.get(&format!("w.arr.{t}.{q}.{k}")) {
                    Some(Value::Bool(true)) => n += 1,
                    Some(Value::Bool(false)) => {}
                    _ => return Err(Error::Decode(format!("assignment has no value for `w.arr.{t}.{q}.{k}`"))),
                }
            }
            row.push(n);
        }
        out.push(row);
    }
    Ok(out)
}

/// Queue served by each invocation of copy `tag`, `None` when idle.
pub fn served_of(a: &Assignment, cfg: &PktConfig, tag: &str) -> Result<Vec<Option<usize>>> {
    (0..cfg.horizon)
        .map(|t| match a.get(&format!("{tag}.s{t}p.served")) {
            Some(Value::Num(r)) if r.is_integer() => {
                let v: i64 = r.to_integer().try_into().map_err(|_| Error::Decode("served out of range".into()))?;
                Ok(usize::try_from(v).ok())
            }
            _ => Err(Error::Decode(format!("assignment has no value for `{tag}.s{t}p.served`"))),
        })
        .collect()
}

/// Result of running a scheduler directly.
#[derive(Clone, Debug, PartialEq)]
pub struct PktRun {
    /// Queue served per invocation.
    pub served: Vec<Option<usize>>,
    /// Packet ids in output order.
    pub output: Vec<usize>,
    pub dropped: Vec<usize>,
    /// Occupancy per queue before each invocation.
    pub occupancy: Vec<Vec<usize>>,
}

pub fn simulate_pkt(cfg: &PktConfig, arrivals: &[Vec<usize>]) -> Result<PktRun> {
    cfg.validate()?;
    let nq = cfg.n_queues;
    let mut queues: Vec<std::collections::VecDeque<usize>> = vec![Default::default(); nq];
    let mut tally = vec![0u64; nq];
    let mut run = PktRun { served: vec![], output: vec![], dropped: vec![], occupancy: vec![] };
    for t in 0..cfg.horizon {
        for q in 0..nq {
            for k in 0..arrivals[t][q] {
                let p = cfg.packet(t, q, k);
                if queues[q].len() < cfg.queue_capacity {
                    queues[q].push_back(p);
                } else {
                    run.dropped.push(p);
                }
            }
        }
        run.occupancy.push(queues.iter().map(|x| x.len()).collect());
        let choice = match cfg.scheduler {
            Scheduler::Priority => (0..nq).find(|&q| !queues[q].is_empty()),
            Scheduler::Fifo => (0..nq)
                .filter(|&q| !queues[q].is_empty())
                .min_by_key(|&q| (cfg.arrival_time(*queues[q].front().unwrap()), q)),
            Scheduler::RoundRobin => {
                let c = (0..nq).filter(|&q| !queues[q].is_empty()).min_by_key(|&q| (tally[q], q));
                if let Some(c) = c {
                    let key = (tally[c], c);
                    for q in 0..nq {
                        if q == c || (tally[q], q) < key {
                            tally[q] += 1;
                        }
                    }
                }
                c
            }
        };
        if let Some(q) = choice {
            run.output.push(queues[q].pop_front().unwrap());
        }
        run.served.push(choice);
    }
    Ok(run)
}

/// Replays copy `tag` on its own arrivals and compares service decisions
/// and every packet's final location.
pub fn replay_pkt(cfg: &PktConfig, a: &Assignment, tag: &str) -> Result<PktRun> {
    let arr = arrivals_of(a, cfg)?;
    let run = simulate_pkt(cfg, &arr)?;
    let served = served_of(a, cfg, tag)?;
    if served != run.served {
        return Err(Error::replay(format!("trace serves {served:?}, scheduler serves {:?}", run.served)));
    }
    let last = cfg.horizon;
    for p in 0..cfg.n_packets() {
        let want = if run.output.contains(&p) {
            cfg.output()
        } else if run.dropped.contains(&p) {
            cfg.dropped()
        } else if arr[cfg.slot(p).0][cfg.slot(p).1] > cfg.slot(p).2 {
            cfg.slot(p).1 as i64
        } else {
            cfg.absent()
        };
        match a.get(&format!("{tag}.s{last}.loc.{p}")) {
            Some(Value::Num(r)) if *r == rational::int(want) => {}
            other => return Err(Error::replay(format!("packet {p}: trace location {other:?}, expected {want}"))),
        }
    }
    Ok(run)
}

fn segments(cfg: &PktConfig, a: &Assignment) -> Result<Vec<Segment>> {
    let run = simulate_pkt(cfg, &arrivals_of(a, cfg)?)?;
    let mut out = Vec::new();
    let mut next_out = run.output.iter();
    for t in 0..cfg.horizon {
        let start = rational::int(t as i64);
        let end = rational::int(t as i64 + 1);
        for q in 0..cfg.n_queues {
            let row = format!("Q{}", q + 1);
            if run.served[t] == Some(q) {
                let p = next_out.next().copied().unwrap_or_default();
                let (ti, _, k) = cfg.slot(p);
                out.push(Segment { row, start: start.clone(), end: end.clone(), kind: SegmentKind::Run, label: format!("p{ti}.{k}") });
            } else if run.occupancy[t][q] > 0 {
                out.push(Segment {
                    row,
                    start: start.clone(),
                    end: end.clone(),
                    kind: SegmentKind::Queued,
                    label: run.occupancy[t][q].to_string(),
                });
            }
        }
    }
    Ok(out)
}
