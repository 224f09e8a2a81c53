//! Discrete-event work-stealing simulator, written independently of the
//! constraint encoding.

use super::{placements, ConcreteWorkload, WorkStealConfig};
use crate::error::{Error, Result};
use crate::rational::{self, Rat};
use crate::smt::{Assignment, Value};
use num_traits::Zero;

/// Choices the model leaves to the adversary: the queue of each task (roots
/// anywhere, others on some last-finishing parent's resource) and queue
/// positions.
#[derive(Clone, Debug, PartialEq)]
pub struct TieBreaks {
    pub queue: Vec<usize>,
    pub pos: Vec<Rat>,
}

impl TieBreaks {
    /// Root `i` on queue `i mod N_R`, children on their parent's resource,
    /// positions by task index.
    pub fn natural(cfg: &WorkStealConfig) -> Self {
        TieBreaks {
            queue: (0..cfg.n_tasks).map(|i| i % cfg.n_resources).collect(),
            pos: (0..cfg.n_tasks).map(|i| rational::int(i as i64)).collect(),
        }
    }

    pub fn from_assignment(a: &Assignment, cfg: &WorkStealConfig, tag: &str) -> Result<Self> {
        let mut queue = Vec::new();
        let mut pos = Vec::new();
        for i in 0..cfg.n_tasks {
            let q = (0..cfg.n_resources).find(|r| a.get(&format!("{tag}.inq{r}.{i}")) == Some(&Value::Bool(true)));
            queue.push(q.ok_or_else(|| Error::Decode(format!("task {i} of `{tag}` has no queue")))?);
            match a.get(&format!("{tag}.pos.{i}")) {
                Some(Value::Num(p)) => pos.push(p.clone()),
                _ => return Err(Error::Decode(format!("task {i} of `{tag}` has no position"))),
            }
        }
        Ok(TieBreaks { queue, pos })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSchedule {
    pub start: Vec<Rat>,
    pub cost: Vec<Rat>,
    pub resource: Vec<usize>,
    pub enqueued_at: Vec<Rat>,
    pub queue: Vec<usize>,
    pub makespan: Rat,
}

impl SimSchedule {
    pub fn end(&self, w: &ConcreteWorkload, i: usize) -> Rat {
        &self.start[i] + &self.cost[i] + &w.lengths[i]
    }
}

/// Runs work stealing on a concrete workload. With `strict_queues`, a child
/// whose requested queue is not the resource of a last-finishing parent is
/// an error; otherwise such a child goes to the resource of its
/// smallest-index last-finishing parent.
pub fn simulate(cfg: &WorkStealConfig, w: &ConcreteWorkload, ties: &TieBreaks, strict_queues: bool) -> Result<SimSchedule> {
    let (nt, nr) = (w.n_tasks(), cfg.n_resources);
    if ties.queue.len() != nt || ties.pos.len() != nt {
        return Err(Error::config("tie-breaks must cover every task"));
    }
    let parents: Vec<Vec<usize>> = (0..nt).map(|i| w.parents(i)).collect();
    let mut start: Vec<Option<Rat>> = vec![None; nt];
    let mut cost = vec![Rat::zero(); nt];
    let mut resource = vec![usize::MAX; nt];
    let mut enq: Vec<Option<(Rat, usize)>> = vec![None; nt];
    let mut last_thread: Vec<Option<i64>> = vec![None; nr];
    let end_of = |i: usize, start: &[Option<Rat>], cost: &[Rat]| start[i].as_ref().map(|b| b + &cost[i] + &w.lengths[i]);
    let mut now = Rat::zero();
    for _round in 0..=2 * nt + 1 {
        // Enqueue every task whose parents have all finished by now.
        for i in 0..nt {
            if enq[i].is_some() || start[i].is_some() {
                continue;
            }
            let ends: Option<Vec<Rat>> = parents[i].iter().map(|&j| end_of(j, &start, &cost)).collect();
            let Some(ends) = ends else { continue };
            let e = ends.iter().cloned().fold(Rat::zero(), |a, x| if x > a { x } else { a });
            if e > now {
                continue;
            }
            let q = if parents[i].is_empty() {
                ties.queue[i]
            } else {
                let last: Vec<usize> = parents[i].iter().copied().filter(|&j| end_of(j, &start, &cost).as_ref() == Some(&e)).collect();
                let allowed: Vec<usize> = last.iter().map(|&j| resource[j]).collect();
                if allowed.contains(&ties.queue[i]) {
                    ties.queue[i]
                } else if strict_queues {
                    return Err(Error::replay(format!(
                        "task {i} sits on queue {} but its last-finishing parents ran on {allowed:?}",
                        ties.queue[i]
                    )));
                } else {
                    allowed[0]
                }
            };
            enq[i] = Some((e, q));
        }
        if (0..nt).all(|i| end_of(i, &start, &cost).is_some_and(|e| e <= now)) {
            let makespan = (0..nt).map(|i| end_of(i, &start, &cost).unwrap()).max().unwrap_or_else(Rat::zero);
            return Ok(SimSchedule {
                start: start.into_iter().map(|b| b.unwrap()).collect(),
                cost,
                resource,
                enqueued_at: enq.iter().map(|e| e.as_ref().map(|x| x.0.clone()).unwrap_or_else(Rat::zero)).collect(),
                queue: enq.iter().map(|e| e.as_ref().map(|x| x.1).unwrap_or(0)).collect(),
                makespan,
            });
        }
        for r in 0..nr {
            if (0..nt).any(|i| resource[i] == r && end_of(i, &start, &cost).is_some_and(|e| e > now)) {
                continue;
            }
            let waiting: Vec<usize> = (0..nt).filter(|&i| start[i].is_none() && enq[i].is_some()).collect();
            let local = waiting.iter().copied().filter(|&i| enq[i].as_ref().unwrap().1 == r).max_by(|&a, &b| ties.pos[a].cmp(&ties.pos[b]));
            let pick = local.or_else(|| {
                waiting.iter().copied().min_by(|&a, &b| {
                    let (ea, qa) = enq[a].as_ref().unwrap();
                    let (eb, qb) = enq[b].as_ref().unwrap();
                    (ea, qa, &ties.pos[a]).cmp(&(eb, qb, &ties.pos[b]))
                })
            });
            if let Some(i) = pick {
                let switch = match last_thread[r] {
                    None => cfg.charge_first_switch,
                    Some(t) => t != w.threads[i],
                };
                cost[i] = if switch { w.switch_costs[i].clone() } else { Rat::zero() };
                start[i] = Some(now.clone());
                resource[i] = r;
                last_thread[r] = Some(w.threads[i]);
            }
        }
        let next = (0..nt).filter_map(|i| end_of(i, &start, &cost)).filter(|e| e > &now).min();
        match next {
            Some(t) => now = t,
            None => return Err(Error::replay("simulation stalled with unfinished tasks")),
        }
    }
    Err(Error::replay("simulation did not finish within 2·N_T + 2 rounds"))
}

/// Replays the heuristic copy `tag` of a model through the simulator with
/// the model's own tie-breaks, and demands identical starts, costs,
/// resources and makespan.
pub fn replay_heuristic(cfg: &WorkStealConfig, a: &Assignment, tag: &str) -> Result<SimSchedule> {
    let w = ConcreteWorkload::from_assignment(a, cfg.n_tasks)?;
    let ties = TieBreaks::from_assignment(a, cfg, tag)?;
    let sim = simulate(cfg, &w, &ties, true)?;
    let place = placements(a, cfg, tag)?;
    for (i, (b, cost, r)) in place.iter().enumerate() {
        if *b != sim.start[i] || *cost != sim.cost[i] || *r != sim.resource[i] {
            return Err(Error::replay(format!(
                "task {i}: trace has start {} cost {} on P{r}, simulator has start {} cost {} on P{}",
                rational::to_exact(b),
                rational::to_exact(cost),
                rational::to_exact(&sim.start[i]),
                rational::to_exact(&sim.cost[i]),
                sim.resource[i]
            )));
        }
    }
    let m = super::makespan(a, tag)?;
    if m != sim.makespan {
        return Err(Error::replay(format!(
            "makespan {} differs from simulated {}",
            rational::to_exact(&m),
            rational::to_exact(&sim.makespan)
        )));
    }
    Ok(sim)
}
