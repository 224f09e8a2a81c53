use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Duration;
use virelay::framework::{build_check, check_invariant, run_check, Verdict};
use virelay::models::pktsched::{
    build_pkt_trace, pkt_starvation_query, replay_pkt, simulate_pkt, PktConfig, Scheduler,
};
use virelay::smt::{term, Term};
use virelay::Solver;

fn solver() -> Solver {
    Solver::resolve(None, Duration::from_secs(600)).expect("z3 on PATH or VIRELAY_SOLVER")
}

fn pinned(s: Scheduler, arrivals: Vec<Vec<usize>>, capacity: usize, k: usize) -> PktConfig {
    let mut c = PktConfig::new(s, arrivals[0].len(), arrivals.len());
    c.queue_capacity = capacity;
    c.k_arrivals = k;
    c.arrivals = Some(arrivals);
    c
}

fn trace_of(cfg: &PktConfig) -> virelay::Assignment {
    let spec = build_pkt_trace(cfg).unwrap();
    let cp = build_check(&spec, |_, _| Ok(Term::bool(true))).unwrap();
    run_check(&solver(), &spec, cp).unwrap().counterexample.expect("a trace exists")
}

#[test]
fn fifo_outputs_in_arrival_order() {
    let cfg = pinned(Scheduler::Fifo, vec![vec![3], vec![0], vec![0]], 3, 3);
    let run = replay_pkt(&cfg, &trace_of(&cfg), "h").unwrap();
    assert_eq!(run.output, vec![0, 1, 2]);
    assert!(run.dropped.is_empty());
}

#[test]
fn full_queue_drops_arrivals() {
    let cfg = pinned(Scheduler::Fifo, vec![vec![3], vec![2], vec![0]], 2, 3);
    let run = replay_pkt(&cfg, &trace_of(&cfg), "h").unwrap();
    // Third packet of the first burst finds two queued; after one dequeue,
    // one of the next two fits.
    assert_eq!(run.dropped, vec![2, 4]);
    assert_eq!(run.output, vec![0, 1, 3]);
}

#[test]
fn priority_serves_busy_top_queue() {
    let arrivals = vec![vec![1, 1, 1]; 4];
    let cfg = pinned(Scheduler::Priority, arrivals, 4, 1);
    let run = replay_pkt(&cfg, &trace_of(&cfg), "h").unwrap();
    assert_eq!(run.served, vec![Some(0); 4]);
}

#[test]
fn round_robin_cycles_through_busy_queues() {
    let n = 3;
    let mut arrivals = vec![vec![0; n]; 2 * n];
    arrivals[0] = vec![2; n];
    arrivals[1] = vec![2; n];
    let cfg = pinned(Scheduler::RoundRobin, arrivals, 4, 2);
    let run = replay_pkt(&cfg, &trace_of(&cfg), "h").unwrap();
    assert_eq!(run.served, (0..2 * n).map(|t| Some(t % n)).collect::<Vec<_>>());
}

#[test]
fn round_robin_skips_empty_queues() {
    let cfg = pinned(Scheduler::RoundRobin, vec![vec![1, 0, 1], vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 0]], 2, 1);
    let run = simulate_pkt(&cfg, cfg.arrivals.as_ref().unwrap()).unwrap();
    assert_eq!(run.served, vec![Some(0), Some(1), Some(2), Some(0)]);
    replay_pkt(&cfg, &trace_of(&cfg), "h").unwrap();
}

#[test]
fn random_arrivals_replay() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfe);
    for round in 0..12 {
        let s = [Scheduler::Fifo, Scheduler::Priority, Scheduler::RoundRobin][round % 3];
        let nq = rng.gen_range(1..=3);
        let h = rng.gen_range(2..=5);
        let arrivals: Vec<Vec<usize>> = (0..h).map(|_| (0..nq).map(|_| rng.gen_range(0..=2)).collect()).collect();
        let cfg = pinned(s, arrivals, rng.gen_range(1..=3), 2);
        replay_pkt(&cfg, &trace_of(&cfg), "h").unwrap_or_else(|e| panic!("round {round}: {e}"));
    }
}

#[test]
fn priority_starves_third_queue() {
    let mut cfg = PktConfig::new(Scheduler::Priority, 3, 5);
    cfg.queue_capacity = 2;
    let out = pkt_starvation_query(&solver(), &cfg, 3, 5).unwrap();
    assert_eq!(out.verdict, Verdict::Violated);
    let run = replay_pkt(&cfg, out.witness.as_ref().unwrap(), "h").unwrap();
    assert!(run.served.iter().all(|s| *s != Some(2)));
    assert!(run.occupancy.iter().all(|o| o[2] > 0));
}

#[test]
fn priority_never_starves_top_queue() {
    let out = pkt_starvation_query(&solver(), &PktConfig::new(Scheduler::Priority, 3, 5), 1, 1).unwrap();
    assert_eq!(out.verdict, Verdict::Holds);
}

#[test]
fn round_robin_never_starves() {
    let mut cfg = PktConfig::new(Scheduler::RoundRobin, 3, 5);
    cfg.k_arrivals = 2;
    let out = pkt_starvation_query(&solver(), &cfg, 3, 5).unwrap();
    assert_eq!(out.verdict, Verdict::Holds);
}

#[test]
fn starvation_arguments_are_checked() {
    let cfg = PktConfig::new(Scheduler::Priority, 3, 5);
    assert!(pkt_starvation_query(&solver(), &cfg, 4, 5).is_err());
    assert!(pkt_starvation_query(&solver(), &cfg, 3, 6).is_err());
}

#[test]
fn scheduler_is_work_conserving() {
    for s in [Scheduler::Fifo, Scheduler::Priority, Scheduler::RoundRobin] {
        let mut cfg = PktConfig::new(s, 2, 4);
        cfg.k_arrivals = 2;
        let spec = build_pkt_trace(&cfg).unwrap();
        let out = check_invariant(&solver(), &spec, |_, tr| {
            let mut bad = Vec::new();
            for t in 0..tr.horizon() {
                let busy = term::or((0..2).map(|q| tr.pre(t).queue(q, "occ").unwrap().gt(&Term::int(0))));
                bad.push(term::and2(&busy, &tr.post(t).global("served")?.eq_t(&Term::int(-1))));
            }
            Ok(term::or(bad))
        })
        .unwrap();
        assert_eq!(out.verdict, Verdict::Holds, "{s:?}");
    }
}

#[test]
fn lower_priority_waits_for_empty_higher_queues() {
    let mut cfg = PktConfig::new(Scheduler::Priority, 3, 4);
    cfg.k_arrivals = 2;
    let spec = build_pkt_trace(&cfg).unwrap();
    let out = check_invariant(&solver(), &spec, |_, tr| {
        let mut bad = Vec::new();
        for t in 0..tr.horizon() {
            for q in 1..3 {
                for hi in 0..q {
                    bad.push(term::and2(
                        &tr.post(t).global("served")?.eq_t(&Term::int(q as i64)),
                        &tr.pre(t).queue(hi, "occ")?.gt(&Term::int(0)),
                    ));
                }
            }
        }
        Ok(term::or(bad))
    })
    .unwrap();
    assert_eq!(out.verdict, Verdict::Holds);
}

#[test]
fn drops_happen_only_at_full_queues() {
    let mut cfg = PktConfig::new(Scheduler::Fifo, 1, 4);
    cfg.k_arrivals = 3;
    cfg.queue_capacity = 2;
    let spec = build_pkt_trace(&cfg).unwrap();
    let dropped = cfg.dropped();
    let out = check_invariant(&solver(), &spec, |_, tr| {
        // A dropped packet of interval t means the queue is full right after
        // interval t's arrivals.
        let mut bad = Vec::new();
        for t in 0..tr.horizon() {
            for k in 0..3 {
                let p = cfg.packet(t, 0, k);
                bad.push(term::and2(
                    &tr.pre(t).task(p, "loc")?.eq_t(&Term::int(dropped)),
                    &tr.pre(t).queue(0, "occ")?.lt(&Term::int(2)),
                ));
            }
        }
        Ok(term::or(bad))
    })
    .unwrap();
    assert_eq!(out.verdict, Verdict::Holds);
}
