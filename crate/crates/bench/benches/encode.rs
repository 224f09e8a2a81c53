use criterion::{black_box, criterion_group, criterion_main, Criterion};
use virelay::framework::IdealMode;
use virelay::models::worksteal::{self, simulate, TieBreaks};
use virelay::smt::{emit_smtlib, sexp};
use virelay_bench::{fan, ws_config};

fn encoding(c: &mut Criterion) {
    let mut g = c.benchmark_group("worksteal");
    for nt in [3usize, 5] {
        let cfg = ws_config(2, nt, 10);
        g.bench_function(format!("gap_problem_{nt}"), |b| {
            b.iter(|| worksteal::ws_gap_problem(black_box(&cfg), IdealMode::Auto).unwrap())
        });
        let gp = worksteal::ws_gap_problem(&cfg, IdealMode::Auto).unwrap();
        g.bench_function(format!("emit_{nt}"), |b| b.iter(|| emit_smtlib(black_box(&gp.problem), None)));
        let script = emit_smtlib(&gp.problem, None);
        g.bench_function(format!("parse_{nt}"), |b| b.iter(|| sexp::parse_all(black_box(&script)).unwrap()));
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let w = fan(12);
    let mut cfg = ws_config(3, 12, 1);
    cfg.workload = Some(w.clone());
    let ties = TieBreaks::natural(&cfg);
    c.bench_function("simulate_fan_12", |b| b.iter(|| simulate(&cfg, black_box(&w), &ties, false).unwrap()));
}

criterion_group!(benches, encoding, simulation);
criterion_main!(benches);
