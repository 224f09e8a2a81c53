use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Duration;
use virelay::framework::{build_check, check_invariant, run_check, Verdict};
use virelay::models::linuxlb::{
    build_lb_trace, lb_fairness_query, lb_work_conservation_query, replay_lb, simulate_lb, LbConfig, LbState,
    LbVersion, MigrationType,
};
use virelay::rational::{int, ratio, Rat};
use virelay::smt::{term, Sort, Term};
use virelay::Solver;

fn solver() -> Solver {
    Solver::resolve(None, Duration::from_secs(600)).expect("z3 on PATH or VIRELAY_SOLVER")
}

fn state(cpu: &[usize], util: &[Rat]) -> LbState {
    LbState { cpu: cpu.to_vec(), util: util.to_vec(), runnable: vec![Rat::one(); cpu.len()] }
}

/// Three light tasks on CPU1, one heavy task on CPU2, CPU3 idle, one task
/// on CPU4.
fn crowded_group() -> LbState {
    let light = ratio(3, 10);
    state(&[0, 0, 0, 1, 3], &[light.clone(), light.clone(), light, Rat::one(), ratio(1, 2)])
}

fn pinned(version: LbVersion, periods: usize, init: LbState) -> LbConfig {
    let mut c = LbConfig::new(version, init.cpu.len(), periods);
    c.initial = Some(init);
    c
}

fn trace_of(cfg: &LbConfig) -> virelay::Assignment {
    let spec = build_lb_trace(cfg).unwrap();
    let cp = build_check(&spec, |_, _| Ok(Term::bool(true))).unwrap();
    run_check(&solver(), &spec, cp).unwrap().counterexample.expect("a trace exists")
}

#[test]
fn even_spread_never_migrates() {
    let cfg = pinned(LbVersion::V5_5, 3, state(&[0, 1, 2, 3], &vec![ratio(1, 2); 4]));
    let run = simulate_lb(&cfg, cfg.initial.as_ref().unwrap()).unwrap();
    assert!(run.periods.iter().all(|p| p.calls.iter().all(|c| c.migrated.is_empty())));
    assert_eq!(run.received, vec![int(3); 4]);
    replay_lb(&cfg, &trace_of(&cfg), "h").unwrap();
}

#[test]
fn old_rules_leave_cpu3_idle() {
    let cfg = pinned(LbVersion::V5_5, 1, crowded_group());
    let run = simulate_lb(&cfg, &crowded_group()).unwrap();
    let top = &run.periods[0].calls[5];
    assert_eq!(top.mt, MigrationType::Util);
    assert_eq!(top.dst, 2);
    assert_eq!(top.src, Some(1));
    assert!(top.migrated.is_empty());
    assert_eq!(run.periods[0].placement, vec![0, 0, 0, 1, 3]);
    replay_lb(&cfg, &trace_of(&cfg), "h").unwrap();
}

#[test]
fn new_rules_steal_from_cpu1() {
    let cfg = pinned(LbVersion::V5_7, 1, crowded_group());
    let run = simulate_lb(&cfg, &crowded_group()).unwrap();
    let top = &run.periods[0].calls[5];
    assert_eq!(top.mt, MigrationType::Util);
    assert_eq!(top.src, Some(0));
    assert!(!top.migrated.is_empty());
    assert!(run.periods[0].placement.contains(&2));
    assert_ne!(run.periods[0].placement, simulate_lb(&pinned(LbVersion::V5_5, 1, crowded_group()), &crowded_group()).unwrap().periods[0].placement);
    replay_lb(&cfg, &trace_of(&cfg), "h").unwrap();
}

#[test]
fn random_pinned_states_replay() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1b);
    for round in 0..10 {
        let n = rng.gen_range(4..=6);
        let cpu: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let util: Vec<Rat> = (0..n).map(|_| ratio(rng.gen_range(0..=10), 10)).collect();
        let version = if round % 2 == 0 { LbVersion::V5_5 } else { LbVersion::V5_7 };
        let cfg = pinned(version, 2, state(&cpu, &util));
        replay_lb(&cfg, &trace_of(&cfg), "h").unwrap_or_else(|e| panic!("round {round}: {e}"));
    }
}

#[test]
fn work_conservation_fails_on_old_rules() {
    let cfg = LbConfig::new(LbVersion::V5_5, 5, 2);
    let out = lb_work_conservation_query(&solver(), &cfg, false).unwrap();
    assert_eq!(out.verdict, Verdict::Violated);
    replay_lb(&cfg, out.witness.as_ref().unwrap(), "h").unwrap();
}

#[test]
fn utilization_pulls_stay_idle_only_on_old_rules() {
    let old = lb_work_conservation_query(&solver(), &LbConfig::new(LbVersion::V5_5, 5, 2), true).unwrap();
    assert_eq!(old.verdict, Verdict::Violated);
    let new = lb_work_conservation_query(&solver(), &LbConfig::new(LbVersion::V5_7, 5, 2), true).unwrap();
    assert_eq!(new.verdict, Verdict::Holds);
}

#[test]
fn work_conservation_needs_more_tasks_than_cpus() {
    assert!(lb_work_conservation_query(&solver(), &LbConfig::new(LbVersion::V5_5, 4, 2), false).is_err());
}

#[test]
fn fairness_fails_on_old_rules() {
    let cfg = LbConfig::new(LbVersion::V5_5, 5, 4);
    let out = lb_fairness_query(&solver(), &cfg, &ratio(2, 5)).unwrap();
    assert_eq!(out.verdict, Verdict::Violated);
    let run = replay_lb(&cfg, out.witness.as_ref().unwrap(), "h").unwrap();
    let lo = run.received.iter().min().unwrap();
    let hi = run.received.iter().max().unwrap();
    assert!(lo < &(hi * ratio(2, 5)));
}

#[test]
fn zero_threshold_is_never_violated() {
    let out = lb_fairness_query(&solver(), &LbConfig::new(LbVersion::V5_5, 5, 4), &Rat::zero()).unwrap();
    assert_eq!(out.verdict, Verdict::Holds);
}

#[test]
fn busy_cpus_hand_out_whole_periods() {
    let cfg = LbConfig::new(LbVersion::V5_5, 5, 2);
    let spec = build_lb_trace(&cfg).unwrap();
    let out = check_invariant(&solver(), &spec, |_, tr| {
        let mut bad = Vec::new();
        for t in 0..tr.horizon() {
            let post = tr.post(t);
            let next = tr.pre(t + 1);
            let gained = term::sum(
                (0..5).map(|i| term::sub(next.task(i, "recv").unwrap(), post.task(i, "recv").unwrap())),
                Sort::Real,
            );
            let busy = term::sum(
                (0..4).map(|c| term::ite(&post.queue(c, "nr").unwrap().gt(&Term::int(0)), &Term::real_i(1), &Term::real_i(0))),
                Sort::Real,
            );
            bad.push(gained.ne(&busy.scale(&cfg.balance_period)));
        }
        Ok(term::or(bad))
    })
    .unwrap();
    assert_eq!(out.verdict, Verdict::Holds);
}

#[test]
fn balancing_never_empties_a_cpu() {
    let spec = build_lb_trace(&LbConfig::new(LbVersion::V5_7, 5, 2)).unwrap();
    let out = check_invariant(&solver(), &spec, |_, tr| {
        let mut bad = Vec::new();
        for t in 0..tr.horizon() {
            for c in 0..4 {
                bad.push(term::and2(
                    &tr.pre(t).queue(c, "nr")?.gt(&Term::int(0)),
                    &tr.post(t).queue(c, "nr")?.eq_t(&Term::int(0)),
                ));
            }
        }
        Ok(term::or(bad))
    })
    .unwrap();
    assert_eq!(out.verdict, Verdict::Holds);
}
