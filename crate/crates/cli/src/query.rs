//! Model/query dispatch shared by every subcommand.

use serde::Deserialize;
use serde_json::{Map, Value as Json};
use std::time::Instant;
use virelay::framework::{IdealMode, Verdict};
use virelay::models::linuxlb::{self, LbConfig};
use virelay::models::pktsched::{self, PktConfig};
use virelay::models::srpt::{self, SrptConfig};
use virelay::models::worksteal::{self, ConcreteWorkload, WorkStealConfig};
use virelay::rational::{self, serde_rat, Rat};
use virelay::smt::{emit_smtlib, RatioStatus, SolverStatus};
use virelay::{Error, Problem, Result, Solver, Term, TraceFileV1};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Worksteal,
    Srpt,
    Linuxlb,
    Pktsched,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Worksteal => "worksteal",
            ModelKind::Srpt => "srpt",
            ModelKind::Linuxlb => "linuxlb",
            ModelKind::Pktsched => "pktsched",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "worksteal" => Ok(ModelKind::Worksteal),
            "srpt" => Ok(ModelKind::Srpt),
            "linuxlb" => Ok(ModelKind::Linuxlb),
            "pktsched" => Ok(ModelKind::Pktsched),
            other => Err(Error::config(format!("unknown model `{other}`"))),
        }
    }

    /// Query used when `--query` is omitted.
    pub fn default_query(self) -> &'static str {
        match self {
            ModelKind::Worksteal => "gap",
            ModelKind::Srpt => "avg",
            ModelKind::Linuxlb => "work-conservation",
            ModelKind::Pktsched => "starvation",
        }
    }
}

/// What to run: a model, one of its queries, and a JSON object holding both
/// the model's configuration keys and the query's arguments.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelKind,
    pub query: String,
    pub params: Json,
}

/// Query arguments that live next to the model keys in `params`.
#[derive(Debug, Default, Deserialize)]
struct QueryArgs {
    #[serde(default, with = "serde_rat::option")]
    q: Option<Rat>,
    #[serde(default, with = "serde_rat::option")]
    threshold: Option<Rat>,
    #[serde(default, with = "serde_rat::option")]
    hi: Option<Rat>,
    victim: Option<usize>,
    #[serde(alias = "n_invocations")]
    invocations: Option<usize>,
    #[serde(default)]
    util_only: bool,
    a_srpt: Option<usize>,
    a_query: Option<usize>,
    ideal: Option<String>,
}

fn need<T>(v: Option<T>, key: &str, query: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(format!("query `{query}` needs parameter `{key}`")))
}

impl RunConfig {
    pub fn new(model: ModelKind, query: Option<&str>, params: Json) -> Result<Self> {
        if !params.is_object() {
            return Err(Error::config("params must be a JSON object"));
        }
        let cfg = RunConfig { model, query: query.unwrap_or(model.default_query()).to_string(), params };
        cfg.kind()?;
        Ok(cfg)
    }

    fn args(&self) -> Result<QueryArgs> {
        Ok(serde_json::from_value(self.params.clone())?)
    }

    fn model_cfg<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_json::from_value(self.params.clone()).map_err(|e| Error::config(format!("{} params: {e}", self.model.name())))
    }

    fn kind(&self) -> Result<QueryKind> {
        use ModelKind::*;
        Ok(match (self.model, self.query.as_str()) {
            (Worksteal, "gap") => QueryKind::WsGap,
            (Worksteal, "ratio") => QueryKind::WsRatio,
            (Srpt, "avg") => QueryKind::SrptAvg,
            (Srpt, "deadline") => QueryKind::SrptDeadline,
            (Linuxlb, "work-conservation") => QueryKind::LbWork,
            (Linuxlb, "fairness") => QueryKind::LbFair,
            (Pktsched, "starvation") => QueryKind::PktStarve,
            (m, q) => return Err(Error::config(format!("model `{}` has no query `{q}`", m.name()))),
        })
    }

    fn ideal_mode(&self) -> Result<IdealMode> {
        match self.args()?.ideal.as_deref() {
            None | Some("auto") => Ok(IdealMode::Auto),
            Some("direct") => Ok(IdealMode::Direct),
            Some("trace") => Ok(IdealMode::Trace),
            Some(o) => Err(Error::config(format!("unknown ideal mode `{o}`"))),
        }
    }

    /// User params with the model's defaults filled in.
    fn effective_params<T: serde::Serialize>(&self, cfg: &T) -> Json {
        let mut m: Map<String, Json> = self.params.as_object().cloned().unwrap_or_default();
        if let Ok(Json::Object(c)) = serde_json::to_value(cfg) {
            for (k, v) in c {
                if !v.is_null() {
                    m.insert(k, v);
                }
            }
        }
        Json::Object(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum QueryKind {
    WsGap,
    WsRatio,
    SrptAvg,
    SrptDeadline,
    LbWork,
    LbFair,
    PktStarve,
}

pub struct CheckReport {
    pub verdict: Verdict,
    pub status: String,
    pub wall_time: f64,
    pub file: Option<TraceFileV1>,
}

fn verdict_of(status: &str) -> Verdict {
    match status {
        "sat" => Verdict::Violated,
        "unsat" => Verdict::Holds,
        _ => Verdict::Inconclusive,
    }
}

/// Runs an invariant or fixed-ratio query. `Violated` means the solver found
/// a trace, which is returned as a trace file.
pub fn check(rc: &RunConfig, solver: &Solver) -> Result<CheckReport> {
    let args = rc.args()?;
    let q = &rc.query;
    let file = |params: Json, verdict: Verdict, charts: Vec<virelay::ScheduleTrace>| {
        (!charts.is_empty()).then(|| TraceFileV1::new(rc.model.name(), q, params, verdict.label(), None, charts))
    };
    match rc.kind()? {
        QueryKind::WsRatio | QueryKind::WsGap => {
            let cfg: WorkStealConfig = rc.model_cfg()?;
            let ratio = need(args.q.clone(), "q", q)?;
            let gp = worksteal::ws_gap_problem(&cfg, rc.ideal_mode()?)?;
            let goal = gp.num.ge(&gp.den.scale(&ratio));
            let v = solver.check(&gp.problem, Some(&goal))?;
            let verdict = Verdict::of(&v.status);
            let charts = match &v.status {
                SolverStatus::Sat(a) => vec![
                    worksteal::heuristic_schedule(&cfg, a, &gp.heuristic, "sat")?,
                    worksteal::ideal_schedule(&cfg, a, &gp.ideal, "sat")?,
                ],
                _ => vec![],
            };
            Ok(CheckReport {
                verdict,
                status: v.status.label().into(),
                wall_time: v.wall_time,
                file: file(rc.effective_params(&cfg), verdict, charts),
            })
        }
        QueryKind::SrptAvg | QueryKind::SrptDeadline => {
            let cfg: SrptConfig = rc.model_cfg()?;
            let out = if rc.kind()? == QueryKind::SrptAvg {
                srpt::srpt_avg_ratio_query(solver, &cfg, &need(args.q.clone(), "q", q)?)?
            } else {
                srpt::srpt_deadline_query(solver, &cfg, None, need(args.a_srpt, "a_srpt", q)?, need(args.a_query, "a_query", q)?)?
            };
            let verdict = verdict_of(out.status);
            let charts: Vec<_> = out.srpt.into_iter().chain(out.query).collect();
            Ok(CheckReport {
                verdict,
                status: out.status.into(),
                wall_time: out.wall_time,
                file: file(rc.effective_params(&cfg), verdict, charts),
            })
        }
        QueryKind::LbWork | QueryKind::LbFair => {
            let cfg: LbConfig = rc.model_cfg()?;
            let out = if rc.kind()? == QueryKind::LbWork {
                linuxlb::lb_work_conservation_query(solver, &cfg, args.util_only)?
            } else {
                linuxlb::lb_fairness_query(solver, &cfg, &need(args.threshold.clone(), "threshold", q)?)?
            };
            Ok(CheckReport {
                verdict: out.verdict,
                status: out.status.into(),
                wall_time: out.wall_time,
                file: file(rc.effective_params(&cfg), out.verdict, out.trace.into_iter().collect()),
            })
        }
        QueryKind::PktStarve => {
            let cfg: PktConfig = rc.model_cfg()?;
            let out = pktsched::pkt_starvation_query(
                solver,
                &cfg,
                need(args.victim, "victim", q)?,
                need(args.invocations, "invocations", q)?,
            )?;
            Ok(CheckReport {
                verdict: out.verdict,
                status: out.status.into(),
                wall_time: out.wall_time,
                file: file(rc.effective_params(&cfg), out.verdict, out.trace.into_iter().collect()),
            })
        }
    }
}

pub struct OptimizeReport {
    pub bound: Rat,
    pub status: RatioStatus,
    pub probes: usize,
    pub wall_time: f64,
    pub file: Option<TraceFileV1>,
}

impl OptimizeReport {
    pub fn converged(&self) -> bool {
        self.status == RatioStatus::Converged
    }

    /// `bound = p/q (~d)`, or the open bracket when the search stopped early.
    pub fn describe(&self) -> String {
        let show = |r: &Rat| format!("{} (~{})", rational::to_exact(r), rational::to_decimal(r, 6));
        match &self.status {
            RatioStatus::Converged => format!("bound = {}", show(&self.bound)),
            RatioStatus::Inconclusive { last_sat, first_unknown } => {
                format!("bound in [{}, {}] (inconclusive)", show(last_sat), show(first_unknown))
            }
            RatioStatus::AtLeastHi => format!("bound >= {} (search ceiling reached)", show(&self.bound)),
            RatioStatus::BelowLo => format!("bound < {} (no witness at the floor)", show(&self.bound)),
        }
    }
}

/// Largest heuristic/ideal ratio, searched to within `tol`.
pub fn optimize(rc: &RunConfig, solver: &Solver, tol: &Rat) -> Result<OptimizeReport> {
    let args = rc.args()?;
    let started = Instant::now();
    match rc.kind()? {
        QueryKind::WsGap => {
            let cfg: WorkStealConfig = rc.model_cfg()?;
            let g = worksteal::ws_gap(solver, &cfg, rc.ideal_mode()?, args.hi.clone(), tol)?;
            let charts: Vec<_> = g.heuristic.into_iter().chain(g.ideal).collect();
            let file = (!charts.is_empty()).then(|| {
                TraceFileV1::new("worksteal", "gap", rc.effective_params(&cfg), g.status.label(), Some(g.bound.clone()), charts)
            });
            Ok(OptimizeReport { bound: g.bound, status: g.status, probes: g.probes.len(), wall_time: g.wall_time, file })
        }
        QueryKind::SrptAvg => {
            let cfg: SrptConfig = rc.model_cfg()?;
            let (out, dual) = srpt::srpt_avg_optimize(solver, &cfg, args.hi.clone(), tol)?;
            let charts: Vec<_> = dual.into_iter().flat_map(|d| d.srpt.into_iter().chain(d.query)).collect();
            let file = (!charts.is_empty()).then(|| {
                TraceFileV1::new("srpt", "avg", rc.effective_params(&cfg), out.status.label(), Some(out.bound.clone()), charts)
            });
            Ok(OptimizeReport {
                bound: out.bound,
                status: out.status,
                probes: out.probes.len(),
                wall_time: started.elapsed().as_secs_f64(),
                file,
            })
        }
        _ => Err(Error::Unsupported(format!(
            "`{}` on `{}` is not a gap query (use worksteal/gap or srpt/avg)",
            rc.query,
            rc.model.name()
        ))),
    }
}

/// The exact script a query hands to the solver. Gap queries are emitted as
/// the probe at `q` (default 1).
pub fn emit(rc: &RunConfig) -> Result<String> {
    let (p, goal) = problem_of(rc)?;
    Ok(emit_smtlib(&p, Some(&goal)))
}

fn problem_of(rc: &RunConfig) -> Result<(Problem, Term)> {
    let args = rc.args()?;
    let q = &rc.query;
    let probe = args.q.clone().unwrap_or_else(|| rational::int(1));
    Ok(match rc.kind()? {
        QueryKind::WsGap | QueryKind::WsRatio => {
            let cfg: WorkStealConfig = rc.model_cfg()?;
            let gp = worksteal::ws_gap_problem(&cfg, rc.ideal_mode()?)?;
            let goal = gp.num.ge(&gp.den.scale(&probe));
            (gp.problem, goal)
        }
        QueryKind::SrptAvg => {
            let cfg: SrptConfig = rc.model_cfg()?;
            let gp = srpt::srpt_dual(&cfg)?;
            let goal = srpt::avg_goal(&gp, &probe)?;
            (gp.problem, goal)
        }
        QueryKind::SrptDeadline => {
            let cfg: SrptConfig = rc.model_cfg()?;
            let (gp, goal) =
                srpt::srpt_deadline_problem(&cfg, None, need(args.a_srpt, "a_srpt", q)?, need(args.a_query, "a_query", q)?)?;
            (gp.problem, goal)
        }
        QueryKind::LbWork => {
            let cp = linuxlb::lb_work_conservation_problem(&rc.model_cfg()?, args.util_only)?;
            (cp.problem, cp.goal)
        }
        QueryKind::LbFair => {
            let cp = linuxlb::lb_fairness_problem(&rc.model_cfg()?, &need(args.threshold, "threshold", q)?)?;
            (cp.problem, cp.goal)
        }
        QueryKind::PktStarve => {
            let cp = pktsched::pkt_starvation_problem(
                &rc.model_cfg()?,
                need(args.victim, "victim", q)?,
                need(args.invocations, "invocations", q)?,
            )?;
            (cp.problem, cp.goal)
        }
    })
}

/// Re-runs the concrete semantics of the file's model over its recorded
/// values and fails on the first disagreement.
pub fn replay_file(f: &TraceFileV1) -> Result<()> {
    let a = f.assignment();
    let params = f.params.clone();
    let cfg_of = |what: &str| Error::config(format!("trace params are not a valid {what} config"));
    match ModelKind::parse(&f.model)? {
        ModelKind::Worksteal => {
            let cfg: WorkStealConfig = serde_json::from_value(params).map_err(|_| cfg_of("worksteal"))?;
            let h = worksteal::replay_heuristic(&cfg, &a, "h")?;
            if f.chart("ideal").is_some() {
                let w = ConcreteWorkload::from_assignment(&a, cfg.n_tasks)?;
                let place = worksteal::placements(&a, &cfg, "i")?;
                let ideal = worksteal::check_ideal_schedule(&cfg, &w, &place)?;
                if let Some(b) = &f.bound {
                    if h.makespan < b * &ideal {
                        return Err(Error::replay("heuristic makespan is below bound times the ideal one"));
                    }
                }
            }
        }
        ModelKind::Srpt => {
            let cfg: SrptConfig = serde_json::from_value(params).map_err(|_| cfg_of("srpt"))?;
            srpt::replay_dual(&cfg, &a)?;
        }
        ModelKind::Linuxlb => {
            let cfg: LbConfig = serde_json::from_value(params).map_err(|_| cfg_of("linuxlb"))?;
            linuxlb::replay_lb(&cfg, &a, "h")?;
        }
        ModelKind::Pktsched => {
            let cfg: PktConfig = serde_json::from_value(params).map_err(|_| cfg_of("pktsched"))?;
            pktsched::replay_pkt(&cfg, &a, "h")?;
        }
    }
    Ok(())
}
