use super::{calls, LbConfig, N_CPUS};
use crate::error::Result;
use crate::framework::{Cx, Field, StateSchema, StateStep, TransitionSpec};
use crate::rational::{self, Rat};
use crate::smt::{term, Problem, Sort, Term};
use num_traits::One;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MigrationType {
    /// No balancing: the local group is busy or not below average.
    None,
    Util,
    Task,
}

impl MigrationType {
    pub fn code(self) -> i64 {
        match self {
            MigrationType::None => 0,
            MigrationType::Util => 1,
            MigrationType::Task => 2,
        }
    }
}

pub struct LinuxLb {
    pub cfg: LbConfig,
    pub schema: StateSchema,
}

impl LinuxLb {
    pub fn new(cfg: LbConfig) -> Self {
        let mut schema = StateSchema::new(cfg.n_tasks, N_CPUS);
        schema.task_fields.push(Field::step("cpu", Sort::Int));
        schema.task_fields.push(Field::step("util", Sort::Real));
        schema.task_fields.push(Field::step("runnable", Sort::Real));
        schema.task_fields.push(Field::step("recv", Sort::Real));
        schema.queue_fields.push(Field::step("nr", Sort::Int));
        schema.queue_fields.push(Field::step("load", Sort::Real));
        LinuxLb { cfg, schema }
    }

    fn define_stats(&self, cx: &mut Cx<()>, s: &StateStep) -> Result<()> {
        let cpu = s.task_col("cpu")?;
        let util = s.task_col("util")?;
        for c in 0..N_CPUS {
            let (nr, load) = stats(&cpu, &util, c);
            cx.assert(s.queue(c, "nr")?.eq_t(&nr));
            cx.assert(s.queue(c, "load")?.eq_t(&load));
        }
        Ok(())
    }

    /// One balancing call pulling into `local` from `busiest`. Returns the
    /// placement afterwards.
    fn balance(&self, cx: &mut Cx<()>, name: &str, cpu: &[Term], util: &[Term], local: &[usize], busiest: &[usize]) -> Vec<Term> {
        let n = cpu.len();
        let nr: Vec<Term> = (0..N_CPUS).map(|c| stats(cpu, util, c).0).collect();
        let load: Vec<Term> = (0..N_CPUS).map(|c| stats(cpu, util, c).1).collect();
        let group_nr = |g: &[usize]| term::sum(g.iter().map(|&c| nr[c].clone()), Sort::Int);
        let group_load = |g: &[usize]| term::sum(g.iter().map(|&c| load[c].clone()), Sort::Real);
        let idle_count = |g: &[usize]| term::count(&g.iter().map(|&c| nr[c].eq_t(&Term::int(0))).collect::<Vec<_>>());
        let width = |g: &[usize]| rational::int(g.len() as i64);

        // The first idle CPU of the local group balances, else its first CPU.
        let mut dst = Term::int(local[0] as i64);
        for &c in local.iter().skip(1).rev() {
            let earlier_busy = term::and(local.iter().take_while(|&&x| x != c).map(|&x| nr[x].ne(&Term::int(0))));
            dst = term::ite(&term::and2(&earlier_busy, &nr[c].eq_t(&Term::int(0))), &Term::int(c as i64), &dst);
        }
        let dst = fix(cx, &format!("{name}.dst"), &dst);
        let idle = term::or(local.iter().map(|&c| nr[c].eq_t(&Term::int(0))));

        let domain: Vec<usize> = local.iter().chain(busiest).copied().collect();
        let below_avg = group_load(local).scale(&width(&domain)).lt(&group_load(&domain).scale(&width(local)));
        let spare = term::or2(&idle, &group_load(local).lt(&Term::real(width(local))));
        let overloaded = term::and2(
            &group_nr(busiest).gt(&Term::int(busiest.len() as i64)),
            &group_load(busiest).scale(&self.cfg.imbalance_pct).gt(&Term::real(width(busiest))),
        );
        let has_cap = Term::real(width(local)).gt(&group_load(local));
        let balancing = term::and2(&below_avg, &spare);
        let is_util = term::and([balancing.clone(), overloaded.clone(), term::or2(&idle.not(), &has_cap)]);
        let mt = term::ite(
            &balancing,
            &term::ite(&is_util, &Term::int(MigrationType::Util.code()), &Term::int(MigrationType::Task.code())),
            &Term::int(MigrationType::None.code()),
        );
        let mt = fix(cx, &format!("{name}.mt"), &mt);
        let util_mode = mt.eq_t(&Term::int(MigrationType::Util.code()));
        let task_mode = mt.eq_t(&Term::int(MigrationType::Task.code()));

        // Busiest CPU: highest load (optionally among CPUs with more than
        // one task) for utilization balancing, most tasks otherwise.
        let eligible: Vec<Term> = busiest
            .iter()
            .map(|&c| if self.cfg.version.more_than_one_filter() { nr[c].gt(&Term::int(1)) } else { Term::bool(true) })
            .collect();
        let by_load = argmax(&busiest.iter().map(|&c| load[c].clone()).collect::<Vec<_>>(), &eligible);
        let by_nr = argmax(&busiest.iter().map(|&c| nr[c].clone()).collect::<Vec<_>>(), &vec![Term::bool(true); busiest.len()]);
        let pick: Vec<Term> = (0..busiest.len())
            .map(|k| term::or2(&term::and2(&util_mode, &by_load[k]), &term::and2(&task_mode, &by_nr[k])))
            .collect();
        let mut src = Term::int(-1);
        for (k, &c) in busiest.iter().enumerate().rev() {
            src = term::ite(&pick[k], &Term::int(c as i64), &src);
        }
        let src = fix(cx, &format!("{name}.src"), &src);
        let src_nr = term::sum(busiest.iter().enumerate().map(|(k, &c)| term::ite(&pick[k], &nr[c], &Term::int(0))), Sort::Int);

        let idle_gap = term::sub(&idle_count(local), &idle_count(busiest));
        let halved = term::sum(
            (1..=local.len() / 2).map(|h| term::ite(&idle_gap.ge(&Term::int(2 * h as i64)), &Term::real_i(1), &Term::real_i(0))),
            Sort::Real,
        );
        let task_imb = term::ite(&overloaded, &Term::real_i(1), &halved);
        let util_imb = term::sub(&Term::real(width(local)), &group_load(local));
        let imb0 = term::ite(&util_mode, &util_imb, &term::ite(&task_mode, &task_imb, &Term::real_i(0)));
        let mut imb = fix(cx, &format!("{name}.imb"), &imb0);
        let mut cnt = Term::int(0);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let val = term::ite(&util_mode, &util[i], &Term::real_i(1));
            let on_src = cpu[i].eq_t(&src);
            let go = term::and([
                on_src,
                imb.gt(&Term::real_i(0)),
                val.le(&imb.scale(&rational::int(2))),
                (&cnt + &Term::int(1)).lt(&src_nr),
            ]);
            let go = fix(cx, &format!("{name}.mig.{i}"), &go);
            out.push(fix(cx, &format!("{name}.cpu.{i}"), &term::ite(&go, &dst, &cpu[i])));
            if i + 1 < n {
                imb = cx.define(&format!("{name}.imb.{}", i + 1), &term::ite(&go, &term::sub(&imb, &val), &imb));
                cnt = cx.define(&format!("{name}.cnt.{}", i + 1), &term::ite(&go, &(&cnt + &Term::int(1)), &cnt));
            }
        }
        out
    }
}

/// A named variable pinned to `t`, kept even when `t` is constant so that
/// replay can always read it.
fn fix(cx: &mut Cx<()>, name: &str, t: &Term) -> Term {
    let v = cx.var(name, t.sort());
    cx.assert(v.eq_t(t));
    v
}

/// Task count and summed utilization of CPU `c`.
fn stats(cpu: &[Term], util: &[Term], c: usize) -> (Term, Term) {
    let here: Vec<Term> = cpu.iter().map(|x| x.eq_t(&Term::int(c as i64))).collect();
    let load = term::sum(here.iter().zip(util).map(|(h, u)| term::ite(h, u, &Term::real_i(0))), Sort::Real);
    (term::count(&here), load)
}

/// One flag per position: valid and maximal, first position on ties.
fn argmax(vals: &[Term], valid: &[Term]) -> Vec<Term> {
    (0..vals.len())
        .map(|k| {
            let mut cs = vec![valid[k].clone()];
            for l in 0..vals.len() {
                if l < k {
                    cs.push(term::or2(&valid[l].not(), &vals[l].lt(&vals[k])));
                } else if l > k {
                    cs.push(term::or2(&valid[l].not(), &vals[l].le(&vals[k])));
                }
            }
            term::and(cs)
        })
        .collect()
}

/// `1/n` for `n` in `1..=max`, zero otherwise.
fn share(n: &Term, max: usize) -> Term {
    let mut t = Term::real_i(0);
    for k in (1..=max).rev() {
        t = term::ite(&n.eq_t(&Term::int(k as i64)), &Term::real(rational::ratio(1, k as i64)), &t);
    }
    t
}

impl TransitionSpec for LinuxLb {
    type Workload = ();

    fn name(&self) -> &str {
        "linuxlb"
    }

    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn horizon(&self) -> usize {
        self.cfg.periods
    }

    fn declare_workload(&self, _p: &mut Problem) -> Result<()> {
        Ok(())
    }

    fn initial(&self, cx: &mut Cx<()>, s0: &StateStep) -> Result<()> {
        cx.assert(s0.time.eq_t(&Term::real_i(0)));
        for i in 0..self.cfg.n_tasks {
            let cpu = s0.task(i, "cpu")?.clone();
            let util = s0.task(i, "util")?.clone();
            let runnable = s0.task(i, "runnable")?.clone();
            cx.assert(cpu.ge(&Term::int(0)));
            cx.assert(cpu.lt(&Term::int(N_CPUS as i64)));
            cx.assert(util.ge(&Term::real_i(0)));
            cx.assert(util.le(&runnable));
            cx.assert(runnable.le(&Term::real_i(1)));
            cx.assert(s0.task(i, "recv")?.eq_t(&Term::real_i(0)));
            if let Some(init) = &self.cfg.initial {
                cx.assert(cpu.eq_t(&Term::int(init.cpu[i] as i64)));
                cx.assert(util.eq_t(&Term::real(init.util[i].clone())));
                cx.assert(runnable.eq_t(&Term::real(init.runnable[i].clone())));
            }
        }
        self.define_stats(cx, s0)?;
        if let Some(counts) = &self.cfg.initial_counts {
            for (c, &n) in counts.iter().enumerate() {
                cx.assert(s0.queue(c, "nr")?.eq_t(&Term::int(n as i64)));
            }
        }
        Ok(())
    }

    fn algorithm(&self, cx: &mut Cx<()>, pre: &StateStep, post: &StateStep) -> Result<()> {
        let util = pre.task_col("util")?;
        let mut cpu = pre.task_col("cpu")?;
        for (k, (local, busiest)) in calls().iter().enumerate() {
            cpu = self.balance(cx, &format!("s{}.lb{k}", pre.index), &cpu, &util, local, busiest);
        }
        for i in 0..self.cfg.n_tasks {
            cx.assert(post.task(i, "cpu")?.eq_t(&cpu[i]));
            for f in ["util", "runnable", "recv"] {
                cx.assert(post.task(i, f)?.eq_t(pre.task(i, f)?));
            }
        }
        self.define_stats(cx, post)
    }

    fn system(&self, cx: &mut Cx<()>, post: &StateStep, next: &StateStep) -> Result<()> {
        let p = &self.cfg.balance_period;
        let lambda = &self.cfg.ewma_lambda;
        let rest = Rat::one() - lambda;
        cx.assert(next.time.eq_t(&(&post.time + &Term::real(p.clone()))));
        let cpu = post.task_col("cpu")?;
        for i in 0..self.cfg.n_tasks {
            let nr = term::sum(
                (0..N_CPUS).map(|c| term::ite(&cpu[i].eq_t(&Term::int(c as i64)), post.queue(c, "nr").unwrap(), &Term::int(0))),
                Sort::Int,
            );
            let sh = share(&nr, self.cfg.n_tasks);
            cx.assert(next.task(i, "cpu")?.eq_t(&cpu[i]));
            cx.assert(next.task(i, "recv")?.eq_t(&(post.task(i, "recv")? + &sh.scale(p))));
            cx.assert(next.task(i, "util")?.eq_t(&(&post.task(i, "util")?.scale(lambda) + &sh.scale(&rest))));
            cx.assert(next.task(i, "runnable")?.eq_t(&(&post.task(i, "runnable")?.scale(lambda) + &Term::real(rest.clone()))));
        }
        self.define_stats(cx, next)
    }

    fn done(&self, _s: &StateStep) -> Result<Term> {
        Ok(Term::bool(false))
    }

    fn freeze_when_done(&self) -> bool {
        false
    }
}
