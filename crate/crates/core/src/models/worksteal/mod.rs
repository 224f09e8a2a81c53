//! Work stealing over a DAG of tasks with per-task switching costs and
//! thread affinity.
//!
//! A resource that frees up pops the back of its own queue; if that queue is
//! empty it steals the oldest enqueued task elsewhere (ties: smaller queue
//! index, then smaller position). A task is enqueued on the resource that ran
//! its last-finishing parent; roots start on solver-chosen queues.
//!
//! Decisions happen only at task completions, so each step jumps straight to
//! the next completion. Start time, paid cost, enqueue time, queue, position
//! and resource of a task are written once and live at trace level.

mod encode;
mod ideal;
mod sim;

pub use encode::WorkSteal;
pub use ideal::{check_ideal_schedule, DirectIdeal};
pub use sim::{replay_heuristic, simulate, SimSchedule, TieBreaks};

use crate::error::{Error, Result};
use crate::framework::{
    build_gap, optimal_gap, GapOutcome, Ideal, IdealMode, ScheduleTrace, Segment, SegmentKind, TraceSpec, Unrolled,
};
use crate::rational::{self, serde_rat, Rat};
use crate::smt::{Assignment, RatioStatus, Solver, Term, Value};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn zero() -> Rat {
    Rat::zero()
}

fn one() -> Rat {
    Rat::one()
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkStealConfig {
    pub n_resources: usize,
    pub n_tasks: usize,
    /// Switching costs are at most `k` times the shortest task.
    #[serde(with = "serde_rat", default = "zero")]
    pub k: Rat,
    /// Switching costs differ by at most a factor `c`.
    #[serde(with = "serde_rat", default = "one")]
    pub c: Rat,
    /// A resource's first task pays its switching cost.
    #[serde(default = "yes")]
    pub charge_first_switch: bool,
    /// Upper-triangular DAG and nondecreasing heuristic start times instead
    /// of rank variables. Ignored when the workload is pinned.
    #[serde(default = "yes")]
    pub symmetry_breaking: bool,
    /// Decision steps; defaults to `n_tasks`.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Pins the workload to concrete values.
    #[serde(default)]
    pub workload: Option<ConcreteWorkload>,
}

/// Concrete workload values, as pinned in a config or read back from a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcreteWorkload {
    #[serde(with = "serde_rat::vec")]
    pub lengths: Vec<Rat>,
    #[serde(with = "serde_rat::vec")]
    pub switch_costs: Vec<Rat>,
    pub threads: Vec<i64>,
    /// Edges `(parent, child)`.
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
}

impl ConcreteWorkload {
    pub fn n_tasks(&self) -> usize {
        self.lengths.len()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.contains(&(parent, child))
    }

    pub fn parents(&self, child: usize) -> Vec<usize> {
        let mut ps: Vec<usize> = self.edges.iter().filter(|e| e.1 == child).map(|e| e.0).collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }

    pub fn is_acyclic(&self) -> bool {
        let n = self.n_tasks();
        let mut indeg = vec![0usize; n];
        for &(_, j) in &self.edges {
            indeg[j] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = stack.pop() {
            seen += 1;
            for &(a, b) in &self.edges {
                if a == i {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        stack.push(b);
                    }
                }
            }
        }
        seen == n
    }

    /// Reads `w.*` values from a model.
    pub fn from_assignment(a: &Assignment, n_tasks: usize) -> Result<Self> {
        let num = |name: String| -> Result<Rat> {
            match a.get(&name) {
                Some(Value::Num(r)) => Ok(r.clone()),
                _ => Err(Error::Decode(format!("assignment has no numeric value for `{name}`"))),
            }
        };
        let mut w = ConcreteWorkload { lengths: vec![], switch_costs: vec![], threads: vec![], edges: vec![] };
        for i in 0..n_tasks {
            w.lengths.push(num(format!("w.len.{i}"))?);
            w.switch_costs.push(num(format!("w.sc.{i}"))?);
            let th = num(format!("w.th.{i}"))?;
            if !th.is_integer() {
                return Err(Error::Decode(format!("thread id of task {i} is not an integer")));
            }
            w.threads.push(th.to_integer().try_into().map_err(|_| Error::Decode("thread id out of range".into()))?);
            for j in 0..n_tasks {
                if let Some(Value::Bool(true)) = a.get(&format!("w.dag.{i}.{j}")) {
                    w.edges.push((i, j));
                }
            }
        }
        Ok(w)
    }
}

impl WorkStealConfig {
    pub fn new(n_resources: usize, n_tasks: usize, k: Rat, c: Rat) -> Self {
        WorkStealConfig {
            n_resources,
            n_tasks,
            k,
            c,
            charge_first_switch: true,
            symmetry_breaking: true,
            horizon: None,
            workload: None,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or(self.n_tasks)
    }

    pub(crate) fn symmetric(&self) -> bool {
        self.symmetry_breaking && self.workload.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_resources == 0 || self.n_tasks == 0 {
            return Err(Error::config("n_resources and n_tasks must be at least 1"));
        }
        if self.k.is_negative() {
            return Err(Error::config("k must be non-negative"));
        }
        if self.c < Rat::one() {
            return Err(Error::config("c must be at least 1"));
        }
        if self.horizon == Some(0) {
            return Err(Error::config("horizon must be at least 1"));
        }
        if let Some(w) = &self.workload {
            let n = self.n_tasks;
            if w.lengths.len() != n || w.switch_costs.len() != n || w.threads.len() != n {
                return Err(Error::config(format!("pinned workload must describe exactly {n} tasks")));
            }
            if w.lengths.iter().any(|l| !l.is_positive() || *l > Rat::one()) {
                return Err(Error::config("task lengths must lie in (0, 1]"));
            }
            if w.switch_costs.iter().any(|s| s.is_negative()) {
                return Err(Error::config("switching costs must be non-negative"));
            }
            if w.threads.iter().any(|&t| t < 0 || t as usize >= n) {
                return Err(Error::config("thread ids must lie in [0, n_tasks)"));
            }
            if w.edges.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
                return Err(Error::config("edges must join two distinct existing tasks"));
            }
            if !w.is_acyclic() {
                return Err(Error::config("pinned DAG has a cycle"));
            }
            let lmin = w.lengths.iter().min().unwrap();
            let (smin, smax) = (w.switch_costs.iter().min().unwrap(), w.switch_costs.iter().max().unwrap());
            if *smax > &self.k * lmin || *smax > &self.c * smin {
                return Err(Error::config("pinned switching costs violate the k or c cap"));
            }
        }
        Ok(())
    }

    /// A ratio no witness can reach. The heuristic never idles every
    /// resource while work is enqueued, so its makespan is at most the
    /// total work including paid costs. Against an ideal of at least
    /// sum(L)/N_R (and at least one cost under `charge_first_switch`)
    /// this gives the bounds below; without switching costs it is
    /// Graham's 2 - 1/N_R.
    pub fn default_hi(&self) -> Rat {
        if self.k.is_zero() {
            return rational::int(2);
        }
        let nr = rational::int(self.n_resources as i64);
        let by_k = &nr * (Rat::one() + &self.k);
        if self.charge_first_switch {
            let by_c = &nr + &self.c * rational::int(self.n_tasks as i64);
            by_k.min(by_c)
        } else {
            by_k
        }
    }
}

/// Builds the transition system for `cfg`.
pub fn build_ws_trace(cfg: &WorkStealConfig) -> Result<TraceSpec<WorkSteal>> {
    cfg.validate()?;
    Ok(TraceSpec::new(WorkSteal::new(cfg.clone())))
}

/// Result of one gap search.
pub struct WsGap {
    pub config: WorkStealConfig,
    pub bound: Rat,
    pub status: RatioStatus,
    pub probes: Vec<crate::smt::ProbeRecord>,
    pub heuristic: Option<ScheduleTrace>,
    pub ideal: Option<ScheduleTrace>,
    pub wall_time: f64,
}

/// Largest makespan ratio of work stealing over an ideal schedule.
pub fn ws_gap(solver: &Solver, cfg: &WorkStealConfig, mode: IdealMode, hi: Option<Rat>, tol: &Rat) -> Result<WsGap> {
    let spec = build_ws_trace(cfg)?;
    let hi = hi.unwrap_or_else(|| cfg.default_hi());
    let started = std::time::Instant::now();
    let out: GapOutcome = optimal_gap(solver, &spec, mode, &Rat::one(), &hi, tol)?;
    let wall_time = started.elapsed().as_secs_f64();
    let (heuristic, ideal) = match &out.ratio.witness {
        Some(a) => {
            let label = out.ratio.status.label();
            let h = heuristic_schedule(cfg, a, &out.heuristic, label)?;
            let i = ideal_schedule(cfg, a, &out.ideal, label)?;
            (Some(h), Some(i))
        }
        None => (None, None),
    };
    Ok(WsGap {
        config: cfg.clone(),
        bound: out.ratio.bound,
        status: out.ratio.status,
        probes: out.ratio.probes,
        heuristic,
        ideal,
        wall_time,
    })
}

/// The gap problem for `cfg`, for probing or emitting.
pub fn ws_gap_problem(cfg: &WorkStealConfig, mode: IdealMode) -> Result<crate::framework::GapProblem<encode::WsWorkload>> {
    build_gap(&build_ws_trace(cfg)?, mode)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_resources: usize,
    pub n_tasks: usize,
    #[serde(with = "serde_rat")]
    pub k: Rat,
    #[serde(with = "serde_rat")]
    pub c: Rat,
    #[serde(with = "serde_rat")]
    pub bound: Rat,
    pub status: String,
    pub wall_time: f64,
}

impl SweepRow {
    pub fn from_gap(g: &WsGap) -> Self {
        SweepRow {
            n_resources: g.config.n_resources,
            n_tasks: g.config.n_tasks,
            k: g.config.k.clone(),
            c: g.config.c.clone(),
            bound: g.bound.clone(),
            status: g.status.label().to_string(),
            wall_time: g.wall_time,
        }
    }

    pub const CSV_HEADER: &'static str = "n_resources,n_tasks,k,c,bound,bound_decimal,status,wall_time";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3}",
            self.n_resources,
            self.n_tasks,
            rational::to_exact(&self.k),
            rational::to_exact(&self.c),
            rational::to_exact(&self.bound),
            rational::to_decimal(&self.bound, 6),
            self.status,
            self.wall_time
        )
    }
}

/// One gap search per grid point, on up to `jobs` threads. `on_row` sees
/// each row as soon as it is done; the returned table is in grid order.
pub fn ws_sweep(
    solver: &Solver,
    grid: &[WorkStealConfig],
    tol: &Rat,
    jobs: usize,
    on_row: &(dyn Fn(&SweepRow) + Sync),
) -> Result<Vec<SweepRow>> {
    for cfg in grid {
        cfg.validate()?;
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: std::sync::Mutex<Vec<Option<Result<SweepRow>>>> =
        std::sync::Mutex::new((0..grid.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(grid.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= grid.len() {
                    break;
                }
                let row = ws_gap(solver, &grid[i], IdealMode::Auto, None, tol).map(|g| SweepRow::from_gap(&g));
                if let Ok(r) = &row {
                    on_row(r);
                }
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every point ran")).collect()
}

fn num(a: &Assignment, name: &str) -> Result<Rat> {
    match a.get(name) {
        Some(Value::Num(r)) => Ok(r.clone()),
        _ => Err(Error::Decode(format!("assignment has no numeric value for `{name}`"))),
    }
}

fn flag(a: &Assignment, name: &str) -> Result<bool> {
    match a.get(name) {
        Some(Value::Bool(b)) => Ok(*b),
        _ => Err(Error::Decode(format!("assignment has no Boolean value for `{name}`"))),
    }
}

/// Start, paid cost and resource of every task of copy `tag`.
pub fn placements(a: &Assignment, cfg: &WorkStealConfig, tag: &str) -> Result<Vec<(Rat, Rat, usize)>> {
    (0..cfg.n_tasks)
        .map(|i| {
            let b = num(a, &format!("{tag}.b.{i}"))?;
            let cost = num(a, &format!("{tag}.cost.{i}"))?;
            let mut on = None;
            for r in 0..cfg.n_resources {
                if flag(a, &format!("{tag}.on{r}.{i}"))? {
                    on = Some(r);
                }
            }
            let r = on.ok_or_else(|| Error::Decode(format!("task {i} of `{tag}` has no resource")))?;
            Ok((b, cost, r))
        })
        .collect()
}

fn segments(w: &ConcreteWorkload, place: &[(Rat, Rat, usize)]) -> Vec<Segment> {
    let mut segs = Vec::new();
    for (i, (b, cost, r)) in place.iter().enumerate() {
        let row = format!("P{r}");
        let run_start = b + cost;
        if cost.is_positive() {
            segs.push(Segment {
                row: row.clone(),
                start: b.clone(),
                end: run_start.clone(),
                kind: SegmentKind::Switch,
                label: format!("sw T{i}"),
            });
        }
        segs.push(Segment {
            row,
            end: &run_start + &w.lengths[i],
            start: run_start,
            kind: SegmentKind::Run,
            label: format!("T{i} (th {})", w.threads[i]),
        });
    }
    segs.sort_by(|x, y| (x.row.as_str(), &x.start).cmp(&(y.row.as_str(), &y.start)));
    segs
}

fn workload_values(a: &Assignment) -> BTreeMap<String, Value> {
    a.iter().filter(|(k, _)| k.starts_with("w.")).map(|(k, v)| (k.clone(), v.clone())).collect()
}

fn params(cfg: &WorkStealConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

/// Decodes the heuristic copy of a model.
pub fn heuristic_schedule(cfg: &WorkStealConfig, a: &Assignment, tr: &Unrolled, verdict: &str) -> Result<ScheduleTrace> {
    let w = ConcreteWorkload::from_assignment(a, cfg.n_tasks)?;
    let spec = build_ws_trace(cfg)?;
    let steps = crate::framework::decode_trace(a, tr, &spec.model.schema)?;
    let place = placements(a, cfg, &tr.tag)?;
    Ok(ScheduleTrace {
        model: "worksteal".into(),
        label: "heuristic".into(),
        verdict: verdict.to_string(),
        params: params(cfg),
        steps,
        segments: segments(&w, &place),
        workload: workload_values(a),
        assignment: crate::framework::decode::scoped_values(a, &tr.tag),
    })
}

/// Decodes the ideal copy of a model.
pub fn ideal_schedule(cfg: &WorkStealConfig, a: &Assignment, ideal: &Ideal, verdict: &str) -> Result<ScheduleTrace> {
    let w = ConcreteWorkload::from_assignment(a, cfg.n_tasks)?;
    let tag = ideal.tag().to_string();
    let steps = match ideal.as_trace() {
        Some(tr) => crate::framework::decode_trace(a, tr, &build_ws_trace(cfg)?.model.schema)?,
        None => Vec::new(),
    };
    let place = placements(a, cfg, &tag)?;
    Ok(ScheduleTrace {
        model: "worksteal".into(),
        label: "ideal".into(),
        verdict: verdict.to_string(),
        params: params(cfg),
        steps,
        segments: segments(&w, &place),
        workload: workload_values(a),
        assignment: crate::framework::decode::scoped_values(a, &tag),
    })
}

/// Makespan recorded for copy `tag`.
pub fn makespan(a: &Assignment, tag: &str) -> Result<Rat> {
    num(a, &format!("{tag}.makespan"))
}

pub(crate) fn makespan_var(tag: &str) -> Term {
    Term::var(&format!("{tag}.makespan"), crate::smt::Sort::Real)
}
