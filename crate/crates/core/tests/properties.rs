//! Randomized invariants of the simulators, rationals and trace files.

use num_traits::Signed;
use proptest::prelude::*;
use std::collections::BTreeMap;
use virelay::framework::{ScheduleTrace, Segment, SegmentKind};
use virelay::models::linuxlb::{simulate_lb, LbConfig, LbState, LbVersion, MigrationType};
use virelay::models::pktsched::{simulate_pkt, PktConfig, Scheduler};
use virelay::models::worksteal::{simulate, ConcreteWorkload, TieBreaks, WorkStealConfig};
use virelay::rational::{self, int, ratio, Rat};
use virelay::render::{render_ascii, render_svg};
use virelay::TraceFileV1;

fn rat() -> impl Strategy<Value = Rat> {
    (-10_000i64..10_000, 1i64..500).prop_map(|(n, d)| ratio(n, d))
}

fn workload(max_tasks: usize) -> impl Strategy<Value = ConcreteWorkload> {
    (1..=max_tasks)
        .prop_flat_map(|nt| {
            (
                prop::collection::vec(1i64..=16, nt),
                prop::collection::vec(0i64..nt as i64, nt),
                prop::collection::vec(any::<bool>(), nt * nt),
            )
        })
        .prop_map(|(lens, threads, mask)| {
            let nt = lens.len();
            let edges = (0..nt).flat_map(|i| (i + 1..nt).map(move |j| (i, j))).filter(|&(i, j)| mask[i * nt + j]).collect();
            ConcreteWorkload {
                lengths: lens.into_iter().map(|l| ratio(l, 16)).collect(),
                switch_costs: vec![int(0); nt],
                threads,
                edges,
            }
        })
}

proptest! {
    #[test]
    fn exact_strings_round_trip(r in rat()) {
        prop_assert_eq!(rational::parse(&rational::to_exact(&r)).unwrap(), r);
    }

    #[test]
    fn decimals_are_close(r in rat(), places in 1usize..8) {
        let back = rational::parse(&rational::to_decimal(&r, places)).unwrap();
        let step = ratio(1, 10i64.pow(places as u32));
        prop_assert!((back - r).abs() <= step);
    }

    #[test]
    fn work_stealing_respects_precedence_and_resources(
        w in workload(6),
        nr in 1usize..=3,
        k in 0i64..=4,
    ) {
        let mut cfg = WorkStealConfig::new(nr, w.n_tasks(), int(k), int(1));
        cfg.workload = Some(w.clone());
        let s = simulate(&cfg, &w, &TieBreaks::natural(&cfg), false).unwrap();
        let nt = w.n_tasks();
        for &(p, c) in &w.edges {
            prop_assert!(s.start[c] >= s.end(&w, p), "child {} starts before parent {} ends", c, p);
        }
        for i in 0..nt {
            prop_assert!(s.resource[i] < nr);
            prop_assert!(s.cost[i] >= int(0));
            for j in i + 1..nt {
                if s.resource[i] == s.resource[j] {
                    let apart = s.end(&w, i) <= s.start[j] || s.end(&w, j) <= s.start[i];
                    prop_assert!(apart, "tasks {} and {} overlap", i, j);
                }
            }
        }
        let last = (0..nt).map(|i| s.end(&w, i)).max().unwrap();
        prop_assert_eq!(&s.makespan, &last);
        let work: Rat = w.lengths.iter().sum();
        prop_assert!(&s.makespan * int(nr as i64) >= work);
    }

    #[test]
    fn packets_are_conserved(
        sched in prop_oneof![Just(Scheduler::Priority), Just(Scheduler::Fifo), Just(Scheduler::RoundRobin)],
        nq in 1usize..=3,
        horizon in 1usize..=6,
        seed in prop::collection::vec(0usize..=2, 18),
    ) {
        let mut cfg = PktConfig::new(sched, nq, horizon);
        cfg.k_arrivals = 2;
        let arrivals: Vec<Vec<usize>> = (0..horizon).map(|t| (0..nq).map(|q| seed[(t * 3 + q) % seed.len()]).collect()).collect();
        let run = simulate_pkt(&cfg, &arrivals).unwrap();
        let arrived: usize = arrivals.iter().flatten().sum();
        // Whatever sat in the queues at the last invocation, minus what it served.
        let last = horizon - 1;
        let queued = run.occupancy[last].iter().sum::<usize>() - usize::from(run.served[last].is_some());
        prop_assert_eq!(run.output.len() + run.dropped.len() + queued, arrived);
        prop_assert_eq!(run.output.len(), run.served.iter().flatten().count());
        for t in 0..horizon {
            let busy = run.occupancy[t].iter().any(|&o| o > 0);
            prop_assert_eq!(run.served[t].is_some(), busy, "idle while packets wait at {}", t);
            prop_assert!(run.occupancy[t].iter().all(|&o| o <= cfg.queue_capacity));
            if sched == Scheduler::Priority {
                prop_assert_eq!(run.served[t], run.occupancy[t].iter().position(|&o| o > 0));
            }
        }
    }

    #[test]
    fn balancing_keeps_every_task_placed(
        v57 in any::<bool>(),
        cpus in prop::collection::vec(0usize..4, 1..=6),
        utils in prop::collection::vec((1i64..=8, 0i64..=8), 6),
        periods in 1usize..=4,
    ) {
        let n = cpus.len();
        let version = if v57 { LbVersion::V5_7 } else { LbVersion::V5_5 };
        let cfg = LbConfig::new(version, n, periods);
        let util: Vec<Rat> = utils[..n].iter().map(|&(u, _)| ratio(u, 8)).collect();
        let runnable: Vec<Rat> = utils[..n].iter().map(|&(u, extra)| ratio((u + extra).min(8), 8)).collect();
        let init = LbState { cpu: cpus.clone(), util, runnable };
        let run = simulate_lb(&cfg, &init).unwrap();
        prop_assert_eq!(run.periods.len(), periods);

        let mut cpu = cpus;
        for p in &run.periods {
            for call in &p.calls {
                let on = |c: usize| cpu.iter().filter(|&&x| x == c).count();
                // The later kernel never picks a lone task's CPU as busiest.
                if v57 && call.mt == MigrationType::Util {
                    if let Some(src) = call.src {
                        prop_assert!(on(src) != 1 || call.migrated.is_empty());
                    }
                }
                for &i in &call.migrated {
                    prop_assert_eq!(Some(cpu[i]), call.src);
                    cpu[i] = call.dst;
                }
            }
            prop_assert_eq!(&cpu, &p.placement);
            prop_assert!(cpu.iter().all(|&c| c < 4));
        }
        let busy: usize = run.periods.iter().map(|p| (0..4).filter(|c| p.placement.contains(c)).count()).sum();
        let received: Rat = run.received.iter().sum();
        prop_assert_eq!(received, &cfg.balance_period * int(busy as i64));
    }

    #[test]
    fn trace_files_round_trip_and_render_stably(
        bars in prop::collection::vec((0usize..4, 0i64..40, 1i64..20, 0usize..6), 0..12),
        width in 10usize..100,
    ) {
        let kinds = [SegmentKind::Run, SegmentKind::Switch, SegmentKind::Wait, SegmentKind::Block, SegmentKind::Queued, SegmentKind::Idle];
        let segments: Vec<Segment> = bars
            .iter()
            .map(|&(row, s, len, kind)| Segment {
                row: format!("R{row}"),
                start: ratio(s, 3),
                end: ratio(s + len, 3),
                kind: kinds[kind],
                label: format!("T{row}"),
            })
            .collect();
        let chart = ScheduleTrace {
            model: "worksteal".into(),
            label: "heuristic".into(),
            verdict: "sat".into(),
            params: serde_json::json!({}),
            steps: vec![],
            segments,
            workload: BTreeMap::new(),
            assignment: BTreeMap::new(),
        };
        let f = TraceFileV1::new("worksteal", "gap", serde_json::json!({"n_tasks": 3}), "sat", Some(ratio(7, 5)), vec![chart]);
        let back = TraceFileV1::from_json(&f.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &f);
        let text = render_ascii(&back, width);
        prop_assert_eq!(&text, &render_ascii(&f, width));
        prop_assert_eq!(render_svg(&back), render_svg(&f));
        for line in text.lines().filter(|l| l.trim_start().starts_with('R') && l.contains('|')) {
            let cells = line.split('|').nth(1).unwrap();
            prop_assert_eq!(cells.chars().count(), width);
        }
    }
}
