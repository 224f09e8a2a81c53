//! Direct execution of the balancing rules on concrete values.

use super::{calls, LbConfig, MigrationType, N_CPUS};
use crate::error::Result;
use crate::rational::{self, serde_rat, Rat};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbState {
    pub cpu: Vec<usize>,
    #[serde(with = "serde_rat::vec")]
    pub util: Vec<Rat>,
    #[serde(with = "serde_rat::vec")]
    pub runnable: Vec<Rat>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CallRecord {
    pub mt: MigrationType,
    pub src: Option<usize>,
    pub dst: usize,
    pub imbalance: Rat,
    pub migrated: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbPeriod {
    pub calls: Vec<CallRecord>,
    /// Placement after balancing.
    pub placement: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbRun {
    pub periods: Vec<LbPeriod>,
    pub received: Vec<Rat>,
    pub final_state: LbState,
}

fn count(cpu: &[usize], c: usize) -> usize {
    cpu.iter().filter(|&&x| x == c).count()
}

fn load(cpu: &[usize], util: &[Rat], c: usize) -> Rat {
    cpu.iter().zip(util).filter(|(x, _)| **x == c).fold(Rat::zero(), |a, (_, u)| a + u)
}

fn call(cfg: &LbConfig, cpu: &mut [usize], util: &[Rat], local: &[usize], busiest: &[usize]) -> CallRecord {
    let nr: Vec<usize> = (0..N_CPUS).map(|c| count(cpu, c)).collect();
    let ld: Vec<Rat> = (0..N_CPUS).map(|c| load(cpu, util, c)).collect();
    let g_nr = |g: &[usize]| g.iter().map(|&c| nr[c]).sum::<usize>();
    let g_load = |g: &[usize]| g.iter().fold(Rat::zero(), |a, &c| a + &ld[c]);
    let g_idle = |g: &[usize]| g.iter().filter(|&&c| nr[c] == 0).count() as i64;
    let w = |g: &[usize]| rational::int(g.len() as i64);

    let dst = local.iter().copied().find(|&c| nr[c] == 0).unwrap_or(local[0]);
    let idle = nr[dst] == 0;
    let domain: Vec<usize> = local.iter().chain(busiest).copied().collect();
    let below_avg = g_load(local) * w(&domain) < g_load(&domain) * w(local);
    let spare = g_idle(local) > 0 || g_load(local) < w(local);
    let overloaded = g_nr(busiest) > busiest.len() && g_load(busiest) * &cfg.imbalance_pct > w(busiest);
    let mt = if !(below_avg && spare) {
        MigrationType::None
    } else if overloaded && (!idle || w(local) > g_load(local)) {
        MigrationType::Util
    } else {
        MigrationType::Task
    };
    let mut best: Option<usize> = None;
    for &c in busiest {
        let better = match (mt, best) {
            (MigrationType::None, _) => false,
            (MigrationType::Util, _) if cfg.version.more_than_one_filter() && nr[c] <= 1 => false,
            (_, None) => true,
            (MigrationType::Util, Some(b)) => ld[c] > ld[b],
            (MigrationType::Task, Some(b)) => nr[c] > nr[b],
        };
        if better {
            best = Some(c);
        }
    }
    let imbalance = match mt {
        MigrationType::None => Rat::zero(),
        MigrationType::Util => w(local) - g_load(local),
        MigrationType::Task if overloaded => Rat::one(),
        MigrationType::Task => rational::int((g_idle(local) - g_idle(busiest)).max(0) / 2),
    };
    let mut migrated = Vec::new();
    if let Some(src) = best {
        let mut imb = imbalance.clone();
        for i in 0..cpu.len() {
            if cpu[i] != src {
                continue;
            }
            let val = if mt == MigrationType::Util { util[i].clone() } else { Rat::one() };
            if imb > Rat::zero() && val <= &imb * rational::int(2) && migrated.len() + 1 < nr[src] {
                cpu[i] = dst;
                imb -= val;
                migrated.push(i);
            }
        }
    }
    CallRecord { mt, src: best, dst, imbalance, migrated }
}

pub fn simulate_lb(cfg: &LbConfig, init: &LbState) -> Result<LbRun> {
    cfg.validate()?;
    let mut s = init.clone();
    let mut received = vec![Rat::zero(); cfg.n_tasks];
    let mut periods = Vec::new();
    let lambda = &cfg.ewma_lambda;
    for _ in 0..cfg.periods {
        let records = calls().iter().map(|(l, b)| call(cfg, &mut s.cpu, &s.util, l, b)).collect();
        periods.push(LbPeriod { calls: records, placement: s.cpu.clone() });
        for i in 0..cfg.n_tasks {
            let share = Rat::one() / rational::int(count(&s.cpu, s.cpu[i]) as i64);
            received[i] += &cfg.balance_period * &share;
            s.util[i] = &s.util[i] * lambda + (Rat::one() - lambda) * share;
            s.runnable[i] = &s.runnable[i] * lambda + (Rat::one() - lambda);
        }
    }
    Ok(LbRun { periods, received, final_state: s })
}
