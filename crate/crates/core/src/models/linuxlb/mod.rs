//! Simplified CFS load balancing on four CPUs in two groups of two.
//!
//! Each period runs six balancing calls in a fixed order: every CPU against
//! its sibling, then each group's designated CPU against the other group.
//! Between balancing passes every CPU splits the period evenly among its
//! tasks, and each task's utilization moves toward its share by an EWMA.

mod encode;
mod sim;

pub use encode::{LinuxLb, MigrationType};
pub use sim::{simulate_lb, CallRecord, LbRun, LbState};

use crate::error::{Error, Result};
use crate::framework::{
    build_check, decode::scoped_values, run_check, CheckOutcome, CheckProblem, ScheduleTrace, Segment, SegmentKind, TraceSpec,
    Verdict,
};
use crate::rational::{self, serde_rat, Rat};
use crate::smt::{term, Assignment, Solver, Term, Value};
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

pub const N_CPUS: usize = 4;
/// CPU groups of the top-level domain.
pub const GROUPS: [[usize; 2]; 2] = [[0, 1], [2, 3]];

/// Balancing calls of one period as (local CPUs, busiest CPUs).
pub fn calls() -> Vec<(Vec<usize>, Vec<usize>)> {
    vec![
        (vec![0], vec![1]),
        (vec![1], vec![0]),
        (vec![2], vec![3]),
        (vec![3], vec![2]),
        (GROUPS[0].to_vec(), GROUPS[1].to_vec()),
        (GROUPS[1].to_vec(), GROUPS[0].to_vec()),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LbVersion {
    #[serde(rename = "5.5", alias = "v5_5", alias = "v5.5")]
    V5_5,
    #[serde(rename = "5.7", alias = "v5_7", alias = "v5.7")]
    V5_7,
}

impl LbVersion {
    /// Whether the busiest CPU for utilization balancing must run more than
    /// one task.
    pub fn more_than_one_filter(self) -> bool {
        self == LbVersion::V5_7
    }
}

fn four() -> usize {
    4
}

fn one() -> Rat {
    Rat::one()
}

fn half() -> Rat {
    rational::half()
}

fn imbalance_pct() -> Rat {
    rational::ratio(117, 100)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbConfig {
    pub version: LbVersion,
    pub n_tasks: usize,
    /// Balancing periods.
    #[serde(default = "four", alias = "horizon")]
    pub periods: usize,
    #[serde(with = "serde_rat", default = "one")]
    pub balance_period: Rat,
    #[serde(with = "serde_rat", default = "half", alias = "lambda")]
    pub ewma_lambda: Rat,
    /// A group is overloaded when it has more tasks than CPUs and its
    /// utilization times this factor exceeds its capacity.
    #[serde(with = "serde_rat", default = "imbalance_pct")]
    pub imbalance_pct: Rat,
    /// Pins the initial placement and utilizations.
    #[serde(default)]
    pub initial: Option<LbState>,
    /// Pins only the number of tasks on each CPU at the start.
    #[serde(default)]
    pub initial_counts: Option<Vec<usize>>,
}

impl LbConfig {
    pub fn new(version: LbVersion, n_tasks: usize, periods: usize) -> Self {
        LbConfig {
            version,
            n_tasks,
            periods,
            balance_period: one(),
            ewma_lambda: half(),
            imbalance_pct: imbalance_pct(),
            initial: None,
            initial_counts: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tasks == 0 || self.periods == 0 {
            return Err(Error::config("n_tasks and periods must be at least 1"));
        }
        if !self.balance_period.is_positive() {
            return Err(Error::config("balance_period must be positive"));
        }
        if !self.ewma_lambda.is_positive() || self.ewma_lambda >= Rat::one() {
            return Err(Error::config("ewma_lambda must lie in (0, 1)"));
        }
        if self.imbalance_pct < Rat::one() {
            return Err(Error::config("imbalance_pct must be at least 1"));
        }
        if let Some(s) = &self.initial {
            s.validate(self.n_tasks)?;
        }
        if let Some(c) = &self.initial_counts {
            if c.len() != N_CPUS || c.iter().sum::<usize>() != self.n_tasks {
                return Err(Error::config(format!("initial_counts must list {N_CPUS} CPUs summing to n_tasks")));
            }
        }
        Ok(())
    }
}

pub fn build_lb_trace(cfg: &LbConfig) -> Result<TraceSpec<LinuxLb>> {
    cfg.validate()?;
    Ok(TraceSpec::new(LinuxLb::new(cfg.clone())))
}

pub struct LbOutcome {
    pub verdict: Verdict,
    pub status: &'static str,
    pub wall_time: f64,
    pub witness: Option<Assignment>,
    pub trace: Option<ScheduleTrace>,
}

fn finish(cfg: &LbConfig, out: CheckOutcome, label: &str) -> Result<LbOutcome> {
    let trace = match (&out.counterexample, out.steps) {
        (Some(a), Some(steps)) => Some(ScheduleTrace {
            model: "linuxlb".into(),
            label: label.into(),
            verdict: out.verdict.label().into(),
            params: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
            steps,
            segments: segments(cfg, a)?,
            workload: Default::default(),
            assignment: scoped_values(a, "h"),
        }),
        _ => None,
    };
    Ok(LbOutcome { verdict: out.verdict, status: out.solver_status, wall_time: out.wall_time, witness: out.counterexample, trace })
}

/// Some CPU is idle after balancing while another holds at least two tasks.
/// With `util_only`, the idle CPU must itself have pulled with
/// `MIGRATE_UTIL` in that period.
pub fn lb_work_conservation_query(solver: &Solver, cfg: &LbConfig, util_only: bool) -> Result<LbOutcome> {
    let spec = build_lb_trace(cfg)?;
    let cp = lb_work_conservation_problem(cfg, util_only)?;
    finish(cfg, run_check(solver, &spec, cp)?, "work-conservation")
}

pub fn lb_work_conservation_problem(cfg: &LbConfig, util_only: bool) -> Result<CheckProblem<()>> {
    if cfg.n_tasks <= N_CPUS {
        return Err(Error::config(format!("work conservation needs more than {N_CPUS} tasks")));
    }
    let spec = build_lb_trace(cfg)?;
    let n_calls = calls().len();
    build_check(&spec, |_, tr| {
        let mut bad = Vec::new();
        for t in 0..tr.horizon() {
            let post = tr.post(t);
            for c in 0..N_CPUS {
                let idle = post.queue(c, "nr")?.eq_t(&Term::int(0));
                let crowded = term::or((0..N_CPUS).filter(|&d| d != c).map(|d| post.queue(d, "nr").map(|n| n.ge(&Term::int(2)))).collect::<Result<Vec<_>>>()?);
                let mut v = vec![idle, crowded];
                if util_only {
                    v.push(term::or((0..n_calls).map(|k| {
                        let mt = Term::var(&format!("h.s{t}.lb{k}.mt"), crate::smt::Sort::Int);
                        let dst = Term::var(&format!("h.s{t}.lb{k}.dst"), crate::smt::Sort::Int);
                        term::and2(&mt.eq_t(&Term::int(MigrationType::Util.code())), &dst.eq_t(&Term::int(c as i64)))
                    })));
                }
                bad.push(term::and(v));
            }
        }
        Ok(term::or(bad))
    })
}

/// Some task has received less than `threshold` times another task's CPU
/// time by the end of the horizon.
pub fn lb_fairness_query(solver: &Solver, cfg: &LbConfig, threshold: &Rat) -> Result<LbOutcome> {
    let spec = build_lb_trace(cfg)?;
    let cp = lb_fairness_problem(cfg, threshold)?;
    finish(cfg, run_check(solver, &spec, cp)?, "fairness")
}

pub fn lb_fairness_problem(cfg: &LbConfig, threshold: &Rat) -> Result<CheckProblem<()>> {
    if threshold.is_negative() || *threshold >= Rat::one() {
        return Err(Error::config("threshold must lie in [0, 1)"));
    }
    if cfg.periods < 4 {
        return Err(Error::config("fairness needs at least 4 balancing periods"));
    }
    let spec = build_lb_trace(cfg)?;
    let n = cfg.n_tasks;
    build_check(&spec, |_, tr| {
        let last = tr.final_state();
        let recv = last.task_col("recv")?;
        let mut bad = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    bad.push(recv[i].lt(&recv[j].scale(threshold)));
                }
            }
        }
        Ok(term::or(bad))
    })
}

/// Smallest horizon in `4..=max_periods` at which the fairness query is
/// violated, if any.
pub fn minimal_unfair_horizon(solver: &Solver, cfg: &LbConfig, threshold: &Rat, max_periods: usize) -> Result<Option<usize>> {
    for k in 4..=max_periods {
        let mut c = cfg.clone();
        c.periods = k;
        match lb_fairness_query(solver, &c, threshold)?.verdict {
            Verdict::Violated => return Ok(Some(k)),
            Verdict::Holds => {}
            Verdict::Inconclusive => return Err(Error::Inconclusive(format!("fairness query at {k} periods was inconclusive"))),
        }
    }
    Ok(None)
}

fn num(a: &Assignment, name: &str) -> Result<Rat> {
    match a.get(name) {
        Some(Value::Num(r)) => Ok(r.clone()),
        _ => Err(Error::Decode(format!("assignment has no value for `{name}`"))),
    }
}

fn cpu_of(a: &Assignment, name: &str) -> Result<usize> {
    let r = num(a, name)?;
    if !r.is_integer() || r.is_negative() || r.to_integer() >= (N_CPUS as i64).into() {
        return Err(Error::Decode(format!("`{name}` is not a CPU index")));
    }
    Ok(r.to_integer().try_into().expect("small CPU index"))
}

/// Initial state of copy `tag`.
pub fn initial_state(a: &Assignment, cfg: &LbConfig, tag: &str) -> Result<LbState> {
    let n = cfg.n_tasks;
    Ok(LbState {
        cpu: (0..n).map(|i| cpu_of(a, &format!("{tag}.s0.cpu.{i}"))).collect::<Result<_>>()?,
        util: (0..n).map(|i| num(a, &format!("{tag}.s0.util.{i}"))).collect::<Result<_>>()?,
        runnable: (0..n).map(|i| num(a, &format!("{tag}.s0.runnable.{i}"))).collect::<Result<_>>()?,
    })
}

/// Post-balancing placement of period `t` in copy `tag`.
pub fn placement_after(a: &Assignment, cfg: &LbConfig, tag: &str, t: usize) -> Result<Vec<usize>> {
    (0..cfg.n_tasks).map(|i| cpu_of(a, &format!("{tag}.s{t}p.cpu.{i}"))).collect()
}

/// Replays copy `tag` through the simulator and compares every balancing
/// call, every post-balancing placement and the final received times.
pub fn replay_lb(cfg: &LbConfig, a: &Assignment, tag: &str) -> Result<LbRun> {
    let run = simulate_lb(cfg, &initial_state(a, cfg, tag)?)?;
    for (t, period) in run.periods.iter().enumerate() {
        for (k, call) in period.calls.iter().enumerate() {
            let mt = num(a, &format!("{tag}.s{t}.lb{k}.mt"))?;
            let src = num(a, &format!("{tag}.s{t}.lb{k}.src"))?;
            let dst = num(a, &format!("{tag}.s{t}.lb{k}.dst"))?;
            let want_src = call.src.map_or(-1, |s| s as i64);
            if mt != rational::int(call.mt.code()) || src != rational::int(want_src) || dst != rational::int(call.dst as i64) {
                return Err(Error::replay(format!(
                    "period {t} call {k}: trace has type {mt} src {src} dst {dst}, simulator has {:?} src {want_src} dst {}",
                    call.mt, call.dst
                )));
            }
        }
        let got = placement_after(a, cfg, tag, t)?;
        if got != period.placement {
            return Err(Error::replay(format!("period {t}: trace places tasks on {got:?}, simulator on {:?}", period.placement)));
        }
    }
    let h = cfg.periods;
    for i in 0..cfg.n_tasks {
        let recv = num(a, &format!("{tag}.s{h}.recv.{i}"))?;
        if recv != run.received[i] {
            return Err(Error::replay(format!(
                "task {i} received {} in the trace, {} in the simulator",
                rational::to_exact(&recv),
                rational::to_exact(&run.received[i])
            )));
        }
    }
    Ok(run)
}

/// One row per task: a run segment per period on the CPU it shared.
fn segments(cfg: &LbConfig, a: &Assignment) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for t in 0..cfg.periods {
        let place = placement_after(a, cfg, "h", t)?;
        let start = &cfg.balance_period * rational::int(t as i64);
        let end = &start + &cfg.balance_period;
        for (i, c) in place.iter().enumerate() {
            let n = place.iter().filter(|x| *x == c).count();
            out.push(Segment {
                row: format!("T{}", i + 1),
                start: start.clone(),
                end: end.clone(),
                kind: SegmentKind::Run,
                label: if n == 1 { format!("CPU{}", c + 1) } else { format!("CPU{} 1/{n}", c + 1) },
            });
        }
    }
    Ok(out)
}

impl LbState {
    fn validate(&self, n: usize) -> Result<()> {
        if self.cpu.len() != n || self.util.len() != n || self.runnable.len() != n {
            return Err(Error::config(format!("initial state must cover {n} tasks")));
        }
        if self.cpu.iter().any(|&c| c >= N_CPUS) {
            return Err(Error::config("initial CPU out of range"));
        }
        for (u, r) in self.util.iter().zip(&self.runnable) {
            if u.is_negative() || u > r || *r > Rat::one() {
                return Err(Error::config("need 0 <= util <= runnable <= 1"));
            }
        }
        Ok(())
    }
}
