//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! `cargo test --test acceptance -- 4 7` runs only criteria 4 and 7.

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::{Duration, Instant};
use virelay::framework::{build_check, probe_gap, run_check, IdealMode, Verdict};
use virelay::models::linuxlb::{self, LbConfig, MigrationType};
use virelay::models::worksteal::{self, replay_heuristic, simulate, ConcreteWorkload, TieBreaks, WorkStealConfig};
use virelay::rational::{self, int, ratio, Rat};
use virelay::render::{render_ascii, render_svg};
use virelay::smt::sexp::{self, Sexp};
use virelay::smt::RatioStatus;
use virelay::{Solver, Term, TraceFileV1};
use virelay_cli::query::{self, ModelKind, OptimizeReport, RunConfig};

/// Per-call solver limit; criteria are stated against 30-minute budgets.
const CALL_LIMIT: Duration = Duration::from_secs(1800);

struct Outcome {
    pass: bool,
    detail: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, detail: Vec::new() }
    }

    fn note(&mut self, ok: bool, msg: impl Into<String>) {
        let msg = msg.into();
        self.pass &= ok;
        self.detail.push(if ok { msg } else { format!("{msg} [x]") });
    }
}

#[derive(Clone)]
struct Bound {
    bound: Rat,
    status: RatioStatus,
    secs: f64,
}

impl Bound {
    fn show(&self) -> String {
        match &self.status {
            RatioStatus::Converged => format!("{} ({:.0}s)", rational::to_decimal(&self.bound, 4), self.secs),
            other => format!("{} at {} ({:.0}s)", other.label(), rational::to_decimal(&self.bound, 4), self.secs),
        }
    }
}

struct Ctx {
    solver: Solver,
    traces: Vec<TraceFileV1>,
    ws: BTreeMap<(usize, usize, String), Option<Bound>>,
}

fn rc(model: ModelKind, query: &str, params: Json) -> RunConfig {
    RunConfig::new(model, Some(query), params).expect("valid run config")
}

impl Ctx {
    fn keep(&mut self, f: Option<TraceFileV1>) {
        self.traces.extend(f);
    }

    fn optimize(&mut self, r: &RunConfig, tol: &Rat) -> Option<Bound> {
        match query::optimize(r, &self.solver, tol) {
            Ok(OptimizeReport { bound, status, wall_time, file, .. }) => {
                self.keep(file);
                Some(Bound { bound, status, secs: wall_time })
            }
            Err(e) => {
                eprintln!("optimize failed: {e}");
                None
            }
        }
    }

    /// Work-stealing gap at `(n_resources, n_tasks, k)` with c = 1, cached.
    fn ws(&mut self, nr: usize, nt: usize, k: &str, tol: &Rat) -> Option<Bound> {
        let key = (nr, nt, k.to_string());
        if let Some(b) = self.ws.get(&key) {
            return b.clone();
        }
        let r = rc(ModelKind::Worksteal, "gap", json!({"n_resources": nr, "n_tasks": nt, "k": k, "c": 1}));
        let b = self.optimize(&r, tol);
        self.ws.insert(key, b.clone());
        b
    }

    fn check(&mut self, r: &RunConfig) -> Option<(Verdict, f64)> {
        match query::check(r, &self.solver) {
            Ok(rep) => {
                self.keep(rep.file);
                Some((rep.verdict, rep.wall_time))
            }
            Err(e) => {
                eprintln!("check failed: {e}");
                None
            }
        }
    }

    fn expect(&mut self, o: &mut Outcome, label: &str, r: &RunConfig, want: Verdict) {
        match self.check(r) {
            Some((v, t)) => o.note(v == want, format!("{label}: {} ({t:.1}s)", v.label())),
            None => o.note(false, format!("{label}: error")),
        }
    }
}

fn within(b: &Rat, target: &Rat, tol: &Rat) -> bool {
    (b - target).abs() <= *tol
}

fn c1_graham(cx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let tol = ratio(1, 1024);
    for nr in [2usize, 3] {
        let target = int(2) - ratio(1, nr as i64);
        for nt in [4usize, 5, 6] {
            match cx.ws(nr, nt, "0", &tol) {
                Some(b) => {
                    let ok = b.status == RatioStatus::Converged && within(&b.bound, &target, &tol);
                    o.note(ok, format!("N_R={nr} N_T={nt}: {}", b.show()));
                }
                None => o.note(false, format!("N_R={nr} N_T={nt}: error")),
            }
        }
    }
    o
}

fn c2_ws_k10(cx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let tol = ratio(1, 1024);
    let band = ratio(1, 20);
    let mut completed = 0;
    for (nr, nt, target) in [(2, 5, ratio(3333, 1000)), (2, 6, ratio(3894, 1000)), (3, 5, ratio(270, 100))] {
        match cx.ws(nr, nt, "10", &tol) {
            Some(b) if b.status == RatioStatus::Converged => {
                completed += 1;
                o.note(within(&b.bound, &target, &band), format!("N_R={nr} N_T={nt} k=10: {}", b.show()));
            }
            // Timeouts only count against the criterion when nothing completes.
            Some(b) => o.detail.push(format!("N_R={nr} N_T={nt} k=10: {}", b.show())),
            None => o.note(false, format!("N_R={nr} N_T={nt} k=10: error")),
        }
    }
    if completed == 0 {
        o.note(false, "no point completed");
    }
    o
}

fn c3_ws_trend(cx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let tol = ratio(1, 1024);
    let band = ratio(1, 20);
    let mut series = Vec::new();
    for k in ["0", "1/10", "1", "10"] {
        let b = cx.ws(2, 6, k, &tol);
        match &b {
            Some(b) => o.detail.push(format!("k={k}: {}", b.show())),
            None => o.note(false, format!("k={k}: error")),
        }
        series.push(b);
    }
    let at = |i: usize| series[i].as_ref().filter(|b| b.status == RatioStatus::Converged).map(|b| b.bound.clone());
    match at(0) {
        Some(b) => o.note(within(&b, &ratio(3, 2), &band), "bound(k=0) = 1.5 ± 0.05"),
        None => o.note(false, "bound(k=0) missing"),
    }
    match at(3) {
        Some(b) => o.note(within(&b, &ratio(3894, 1000), &band), "bound(k=10) = 3.894 ± 0.05"),
        None => o.note(false, "bound(k=10) missing"),
    }
    let pts: Vec<Rat> = (0..4).filter_map(at).collect();
    let monotone = pts.len() == 4 && pts.windows(2).all(|w| w[1] >= &w[0] - &tol);
    o.note(monotone, "nondecreasing in k");
    o
}

fn c4_srpt_avg(cx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    for (q, want) in [("2", Verdict::Violated), ("29/10", Verdict::Violated), ("3", Verdict::Holds)] {
        let r = rc(ModelKind::Srpt, "avg", json!({"n_tasks": 3, "steps": 2, "alpha": "inf", "q": q}));
        cx.expect(&mut o, &format!("q={q}"), &r, want);
    }
    o
}

fn c5_srpt_deadline(cx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let cases = [
        ("inf", 1, 5, Verdict::Violated),
        ("2", 1, 2, Verdict::Violated),
        ("2", 1, 3, Verdict::Holds),
        ("3", 1, 3, Verdict::Violated),
    ];
    for (alpha, a_srpt, a_query, want) in cases {
        let r = rc(
            ModelKind::Srpt,
            "deadline",
            json!({"n_tasks": 5, "steps": 2, "alpha": alpha, "a_srpt": a_srpt, "a_query": a_query}),
        );
        let want_s = if want == Verdict::Violated { "sat" } else { "unsat" };
        cx.expect(&mut o, &format!("α={alpha} ({a_srpt},{a_query}) want {want_s}"), &r, want);
    }
    o
}

/// Does some MIGRATE_UTIL call in the replayed run pick a single-task CPU as
/// busiest, move nothing, and leave its destination idle at period end?
fn util_shape(cfg: &LbConfig, f: &TraceFileV1) -> virelay::Result<bool> {
    let a = f.assignment();
    let init = linuxlb::initial_state(&a, cfg, "h")?;
    let run = linuxlb::simulate_lb(cfg, &init)?;
    let mut cpu = init.cpu.clone();
    for p in &run.periods {
        let mut hit = Vec::new();
        for call in &p.calls {
            let nr = |c: usize| cpu.iter().filter(|&&x| x == c).count();
            if call.mt == MigrationType::Util && call.migrated.is_empty() {
                if let Some(src) = call.src {
                    if nr(src) == 1 && nr(call.dst) == 0 {
                        hit.push(call.dst);
                    }
                }
            }
            for &i in &call.migrated {
                cpu[i] = call.dst;
            }
        }
        if hit.iter().any(|&d| !p.placement.contains(&d)) {
            return Ok(true);
        }
        cpu = p.placement.clone();
    }
    Ok(false)
}

fn c6_linuxlb(cx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let plain = rc(ModelKind::Linuxlb, "work-conservation", json!({"version": "5.5", "n_tasks": 5, "periods": 2}));
    cx.expect(&mut o, "v5.5 work conservation", &plain, Verdict::Violated);

    // One CPU with three tasks, one single-task CPU, one idle CPU.
    let shape = |v: &str| json!({"version": v, "n_tasks": 5, "periods": 1, "initial_counts": [3, 1, 0, 1], "util_only": true});
    let old = rc(ModelKind::Linuxlb, "work-conservation", shape("5.5"));
    match query::check(&old, &cx.solver) {
        Ok(rep) => {
            o.note(rep.verdict == Verdict::Violated, format!("v5.5 MIGRATE_UTIL scenario: {}", rep.verdict.label()));
            if let Some(f) = rep.file {
                let cfg: LbConfig = serde_json::from_value(f.params.clone()).expect("lb params");
                match util_shape(&cfg, &f) {
                    Ok(ok) => o.note(ok, "witness: single-task CPU picked as busiest, idle CPU stays idle"),
                    Err(e) => o.note(false, format!("witness replay: {e}")),
                }
                cx.traces.push(f);
            }
        }
        Err(e) => o.note(false, format!("v5.5 MIGRATE_UTIL scenario: {e}")),
    }
    let new = rc(ModelKind::Linuxlb, "work-conservation", shape("5.7"));
    cx.expect(&mut o, "v5.7 same scenario", &new, Verdict::Holds);

    let fair = rc(ModelKind::Linuxlb, "fairness", json!({"version": "5.5", "n_tasks": 5, "periods": 4, "threshold": "0.4"}));
    cx.expect(&mut o, "v5.5 fairness 0.4 at K=4", &fair, Verdict::Violated);
    o
}

fn c7_pktsched(cx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let base = |victim: usize| {
        json!({"scheduler": "priority", "n_queues": 3, "horizon": 5, "victim": victim, "invocations": 5})
    };
    cx.expect(&mut o, "victim=3", &rc(ModelKind::Pktsched, "starvation", base(3)), Verdict::Violated);
    cx.expect(&mut o, "victim=1", &rc(ModelKind::Pktsched, "starvation", base(1)), Verdict::Holds);
    o
}

fn random_workload(rng: &mut ChaCha8Rng, nt: usize) -> ConcreteWorkload {
    let mut edges = Vec::new();
    for i in 0..nt {
        for j in i + 1..nt {
            if rng.gen_bool(0.4) {
                edges.push((i, j));
            }
        }
    }
    ConcreteWorkload {
        lengths: (0..nt).map(|_| ratio(rng.gen_range(1..=8), 8)).collect(),
        switch_costs: vec![Rat::from_integer(0.into()); nt],
        threads: (0..nt).map(|_| rng.gen_range(0..nt as i64)).collect(),
        edges,
    }
}

/// `(* a b)` with two non-constant factors, or a non-constant divisor.
fn nonlinear(s: &Sexp) -> bool {
    fn constant(s: &Sexp) -> bool {
        match s {
            Sexp::Atom(a) => a.parse::<f64>().is_ok(),
            Sexp::List(l) => match l.first().and_then(Sexp::atom) {
                Some("-") | Some("/") => l[1..].iter().all(constant),
                _ => false,
            },
        }
    }
    match s {
        Sexp::Atom(_) => false,
        Sexp::List(l) => {
            let bad = match l.first().and_then(Sexp::atom) {
                Some("*") => l[1..].iter().filter(|x| !constant(x)).count() > 1,
                Some("/") => !l[2..].iter().all(constant),
                _ => false,
            };
            bad || l.iter().any(nonlinear)
        }
    }
}

fn c8_properties(cx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();

    // (a) concrete replay of every trace file, after a disk round trip.
    // Small witnesses stand in for models no earlier criterion covered.
    let fallbacks = [
        rc(ModelKind::Worksteal, "ratio", json!({"n_resources": 2, "n_tasks": 3, "k": 0, "q": "5/4"})),
        rc(ModelKind::Srpt, "avg", json!({"n_tasks": 2, "steps": 2, "q": "5/4"})),
        rc(
            ModelKind::Linuxlb,
            "work-conservation",
            json!({"version": "5.5", "n_tasks": 5, "periods": 1, "initial_counts": [3, 1, 0, 1], "util_only": true}),
        ),
        rc(ModelKind::Pktsched, "starvation", json!({"scheduler": "priority", "n_queues": 3, "horizon": 5, "victim": 3, "invocations": 5})),
    ];
    for r in &fallbacks {
        if !cx.traces.iter().any(|f| f.model == r.model.name()) {
            cx.check(r);
        }
    }
    let dir = tempfile::tempdir().expect("temp dir");
    let mut models = BTreeSet::new();
    let mut replay_failures = Vec::new();
    for (i, f) in cx.traces.iter().enumerate() {
        let path = dir.path().join(format!("{i}.json"));
        let back = f.write(&path).and_then(|_| TraceFileV1::read(&path));
        match back.and_then(|b| query::replay_file(&b).map(|_| b)) {
            Ok(b) => {
                models.insert(b.model.clone());
            }
            Err(e) => replay_failures.push(format!("{} {}: {e}", f.model, f.query)),
        }
    }
    let all_models = ["linuxlb", "pktsched", "srpt", "worksteal"].iter().all(|m| models.contains(*m));
    o.note(
        replay_failures.is_empty() && all_models,
        format!("(a) replayed {}/{} traces over {:?}", cx.traces.len() - replay_failures.len(), cx.traces.len(), models),
    );
    for e in replay_failures.iter().take(3) {
        o.detail.push(format!("    {e}"));
    }

    // (b) decoded heuristic vs the discrete-event simulator.
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut agree = 0;
    for round in 0..20 {
        let nt = rng.gen_range(1..=4);
        let mut cfg = WorkStealConfig::new(2, nt, int(0), int(1));
        cfg.workload = Some(random_workload(&mut rng, nt));
        let spec = worksteal::build_ws_trace(&cfg).expect("valid config");
        let cp = build_check(&spec, |_, _| Ok(Term::bool(true))).expect("builds");
        let ok = match run_check(&cx.solver, &spec, cp) {
            Ok(out) => match out.counterexample {
                Some(a) => {
                    let decoded = replay_heuristic(&cfg, &a, "h");
                    let ties = TieBreaks::from_assignment(&a, &cfg, "h");
                    match (decoded, ties) {
                        (Ok(d), Ok(t)) => simulate(&cfg, cfg.workload.as_ref().unwrap(), &t, true).map(|s| s == d).unwrap_or(false),
                        _ => false,
                    }
                }
                None => false,
            },
            Err(_) => false,
        };
        if ok {
            agree += 1;
        } else {
            o.detail.push(format!("    oracle mismatch in round {round}"));
        }
    }
    o.note(agree == 20, format!("(b) oracle agrees on {agree}/20 workloads"));

    // (c) emitted scripts stay linear.
    let scripts = [
        rc(ModelKind::Worksteal, "gap", json!({"n_resources": 2, "n_tasks": 3, "k": 10, "q": "3/2"})),
        rc(ModelKind::Srpt, "avg", json!({"n_tasks": 3, "alpha": "2", "q": 2})),
        rc(ModelKind::Srpt, "deadline", json!({"n_tasks": 3, "a_srpt": 1, "a_query": 2})),
        rc(ModelKind::Linuxlb, "work-conservation", json!({"version": "5.7", "n_tasks": 5, "periods": 2})),
        rc(ModelKind::Linuxlb, "fairness", json!({"version": "5.5", "n_tasks": 5, "periods": 4, "threshold": "2/5"})),
        rc(ModelKind::Pktsched, "starvation", json!({"scheduler": "rr", "n_queues": 3, "horizon": 4, "victim": 2, "invocations": 2})),
    ];
    let mut linear = 0;
    for r in &scripts {
        let ok = query::emit(r)
            .ok()
            .and_then(|s| sexp::parse_all(&s).ok())
            .map(|forms| !forms.iter().any(nonlinear))
            .unwrap_or(false);
        if ok {
            linear += 1;
        } else {
            o.detail.push(format!("    nonlinear or unparsable: {} {}", r.model.name(), r.query));
        }
    }
    o.note(linear == scripts.len(), format!("(c) {linear}/{} scripts linear", scripts.len()));

    // (d) write, read, re-render.
    let mut lossless = 0;
    for f in &cx.traces {
        let back = f.to_json().and_then(|t| TraceFileV1::from_json(&t));
        if let Ok(b) = back {
            if &b == f && render_ascii(&b, 60) == render_ascii(f, 60) && render_svg(&b) == render_svg(f) {
                lossless += 1;
            }
        }
    }
    o.note(
        lossless == cx.traces.len() && !cx.traces.is_empty(),
        format!("(d) {lossless}/{} files round-trip", cx.traces.len()),
    );

    // (e) probes below the bound are sat, above are unsat.
    let cfg = WorkStealConfig::new(2, 3, int(0), int(1));
    let gp = worksteal::ws_gap_problem(&cfg, IdealMode::Auto).expect("builds");
    let mut answers = Vec::new();
    for q in [ratio(5, 4), ratio(3, 2), ratio(7, 4)] {
        let a = probe_gap(&cx.solver, &gp, &q).map(|v| v.status.label()).unwrap_or("error");
        answers.push((q, a));
    }
    let expected = ["sat", "sat", "unsat"];
    let monotone = answers.iter().zip(expected).all(|((_, a), e)| *a == e);
    let shown: Vec<String> = answers.iter().map(|(q, a)| format!("{}:{a}", rational::to_exact(q))).collect();
    o.note(monotone, format!("(e) probes {}", shown.join(" ")));
    o
}

type Criterion = fn(&mut Ctx) -> Outcome;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let wanted: BTreeSet<u32> = filters.iter().filter_map(|a| a.parse().ok()).collect();
    let named = filters.iter().any(|a| a.parse::<u32>().is_err());
    if named && !filters.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }

    let solver = match Solver::resolve(None, CALL_LIMIT) {
        Ok(s) => s,
        Err(e) => {
            println!("acceptance: cannot run, {e}");
            std::process::exit(1);
        }
    };
    let mut cx = Ctx { solver, traces: Vec::new(), ws: BTreeMap::new() };
    let criteria: [(u32, &str, Criterion); 8] = [
        (1, "Graham bound 2 - 1/N_R at k=0", c1_graham),
        (2, "work stealing gaps at k=10", c2_ws_k10),
        (3, "work stealing gap grows with k", c3_ws_trend),
        (4, "SRPT average completion, N_T=3", c4_srpt_avg),
        (5, "SRPT deadline and alpha frontier, N_T=5", c5_srpt_deadline),
        (6, "Linux LB bug and fix", c6_linuxlb),
        (7, "priority starvation", c7_pktsched),
        (8, "property suites", c8_properties),
    ];
    let mut failed = Vec::new();
    for (id, title, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let out = run(&mut cx);
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {verdict}: {title} ({:.0}s)", t.elapsed().as_secs_f64());
        for d in &out.detail {
            println!("    {d}");
        }
        let _ = std::io::stdout().flush();
        if !out.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
