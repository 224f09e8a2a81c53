use super::encode::WsWorkload;
use super::{ConcreteWorkload, WorkStealConfig};
use crate::error::{Error, Result};
use crate::framework::IdealSchedule;
use crate::rational::Rat;
use crate::smt::{term, Problem, Term};
use num_traits::{Signed, Zero};

/// An ideal schedule stated directly: each task gets a resource and a start;
/// tasks on one resource do not overlap, children start after parents end,
/// and a task pays its switching cost unless it directly follows a task of
/// the same thread on its resource.
pub struct DirectIdeal {
    tag: String,
    makespan: Term,
}

impl DirectIdeal {
    pub fn build(cfg: &WorkStealConfig, p: &mut Problem, w: &WsWorkload, tag: &str) -> Result<Self> {
        let (nt, nr) = (cfg.n_tasks, cfg.n_resources);
        let on: Vec<Vec<Term>> =
            (0..nr).map(|r| (0..nt).map(|i| p.bool_var(&format!("{tag}.on{r}.{i}"))).collect()).collect();
        let b: Vec<Term> = (0..nt).map(|i| p.real_var(&format!("{tag}.b.{i}"))).collect();
        let cost: Vec<Term> = (0..nt).map(|i| p.real_var(&format!("{tag}.cost.{i}"))).collect();
        let end: Vec<Term> = (0..nt).map(|i| term::sum([b[i].clone(), cost[i].clone(), w.len[i].clone()], crate::smt::Sort::Real)).collect();
        let m = p.real_var(&format!("{tag}.makespan"));
        let zero = Term::real_i(0);
        let same = |i: usize, j: usize| term::or((0..nr).map(|r| term::and2(&on[r][i], &on[r][j])));
        for i in 0..nt {
            let col: Vec<Term> = (0..nr).map(|r| on[r][i].clone()).collect();
            p.assert(term::exactly_one(&col));
            p.assert(b[i].ge(&zero));
            p.assert(cost[i].ge(&zero));
            p.assert(cost[i].le(&w.sc[i]));
            p.assert(m.ge(&end[i]));
            for j in 0..nt {
                if i != j {
                    p.assert(w.dag[i][j].implies(&end[i].le(&b[j])));
                }
            }
            for j in i + 1..nt {
                p.assert(same(i, j).implies(&term::or2(&end[i].le(&b[j]), &end[j].le(&b[i]))));
            }
        }
        p.assert(term::or(end.iter().map(|e| m.eq_t(e))));
        for j in 0..nt {
            let mut follows = Vec::new();
            for i in 0..nt {
                if i == j {
                    continue;
                }
                let nothing_between = term::and(
                    (0..nt)
                        .filter(|&k| k != i && k != j)
                        .map(|k| same(k, j).implies(&term::or2(&end[k].le(&b[i]), &b[k].ge(&b[j])))),
                );
                follows.push(term::and([same(i, j), w.th[i].eq_t(&w.th[j]), end[i].le(&b[j]), nothing_between]));
            }
            let mut excuses = vec![cost[j].eq_t(&w.sc[j]), term::or(follows)];
            if !cfg.charge_first_switch {
                excuses.push(term::and((0..nt).filter(|&i| i != j).map(|i| same(i, j).implies(&b[i].gt(&b[j])))));
            }
            p.assert(term::or(excuses));
        }
        Ok(DirectIdeal { tag: tag.to_string(), makespan: m })
    }
}

impl IdealSchedule for DirectIdeal {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn metric(&self) -> Term {
        self.makespan.clone()
    }
}

/// Checks a concrete ideal schedule by direct evaluation: one resource per
/// task, precedence, no overlap, and every waived switching cost justified.
/// Returns the makespan.
pub fn check_ideal_schedule(
    cfg: &WorkStealConfig,
    w: &ConcreteWorkload,
    place: &[(Rat, Rat, usize)],
) -> Result<Rat> {
    let nt = w.n_tasks();
    if place.len() != nt {
        return Err(Error::replay("schedule and workload disagree on the task count"));
    }
    let end: Vec<Rat> = (0..nt).map(|i| &place[i].0 + &place[i].1 + &w.lengths[i]).collect();
    for i in 0..nt {
        let (b, cost, r) = &place[i];
        if b.is_negative() || *r >= cfg.n_resources {
            return Err(Error::replay(format!("task {i} has a negative start or unknown resource")));
        }
        if cost.is_negative() || *cost > w.switch_costs[i] {
            return Err(Error::replay(format!("task {i} pays a cost outside [0, its switching cost]")));
        }
        for &(a, c) in &w.edges {
            if a == i && end[i] > place[c].0 {
                return Err(Error::replay(format!("task {c} starts before its parent {i} ends")));
            }
        }
        for j in i + 1..nt {
            if place[j].2 == *r && !(end[i] <= place[j].0 || end[j] <= *b) {
                return Err(Error::replay(format!("tasks {i} and {j} overlap on P{r}")));
            }
        }
    }
    for j in 0..nt {
        if place[j].1 >= w.switch_costs[j] {
            continue;
        }
        let r = place[j].2;
        let prev = (0..nt)
            .filter(|&i| i != j && place[i].2 == r && end[i] <= place[j].0)
            .max_by(|&x, &y| end[x].cmp(&end[y]));
        let ok = match prev {
            Some(i) => w.threads[i] == w.threads[j],
            None => !cfg.charge_first_switch,
        };
        if !ok {
            return Err(Error::replay(format!("task {j} skips its switching cost without a same-thread predecessor")));
        }
    }
    Ok(end.into_iter().fold(Rat::zero(), |a, e| if e > a { e } else { a }))
}
