//! Ratio maximization by constant probes.
//!
//! Each probe asserts `num >= q * den` with `q` a literal, so the problem stays
//! linear. After a satisfiable probe the lower end jumps to the ratio the
//! witness actually achieves.

use super::{eval_num, Assignment, Problem, SmtError, Solver, SolverStatus, SolverVerdict, Term};
use crate::rational::{self, Rat};
use num_traits::Signed;

#[derive(Clone, Debug, PartialEq)]
pub enum RatioStatus {
    /// Bracket narrowed to `tol`.
    Converged,
    /// The probe at `lo` was unsatisfiable: the ratio never reaches `lo`.
    BelowLo,
    /// A witness reached `hi`; the true supremum may be larger.
    AtLeastHi,
    /// A probe returned unknown or timed out.
    Inconclusive { last_sat: Rat, first_unknown: Rat },
}

impl RatioStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RatioStatus::Converged => "converged",
            RatioStatus::BelowLo => "below_lo",
            RatioStatus::AtLeastHi => "at_least_hi",
            RatioStatus::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeRecord {
    pub q: Rat,
    pub status: &'static str,
    pub wall_time: f64,
    pub witness_ratio: Option<Rat>,
}

#[derive(Clone, Debug)]
pub struct RatioOutcome {
    pub bound: Rat,
    pub witness: Option<Assignment>,
    pub status: RatioStatus,
    pub probes: Vec<ProbeRecord>,
}

/// One probe: is `num >= q * den` satisfiable together with `base`?
pub fn probe_ratio(
    solver: &Solver,
    base: &Problem,
    num: &Term,
    den: &Term,
    q: &Rat,
) -> Result<SolverVerdict, SmtError> {
    let goal = num.ge(&den.scale(q));
    solver.check(base, Some(&goal))
}

fn achieved(a: &Assignment, num: &Term, den: &Term) -> Result<Rat, SmtError> {
    let d = eval_num(den, a)?;
    if !d.is_positive() {
        return Err(SmtError::Eval(format!(
            "denominator evaluated to {} in a witness; it must be entailed positive",
            rational::to_exact(&d)
        )));
    }
    Ok(eval_num(num, a)? / d)
}

pub fn maximize_ratio(
    solver: &Solver,
    base: &Problem,
    num: &Term,
    den: &Term,
    lo: &Rat,
    hi: &Rat,
    tol: &Rat,
) -> Result<RatioOutcome, SmtError> {
    if lo >= hi {
        return Err(SmtError::Construction("maximize_ratio: need lo < hi".into()));
    }
    if !tol.is_positive() {
        return Err(SmtError::Construction("maximize_ratio: tol must be positive".into()));
    }
    let mut probes = Vec::new();
    let run = |q: &Rat, probes: &mut Vec<ProbeRecord>| -> Result<SolverStatus, SmtError> {
        let v = probe_ratio(solver, base, num, den, q)?;
        let witness_ratio = match &v.status {
            SolverStatus::Sat(a) => Some(achieved(a, num, den)?),
            _ => None,
        };
        log::info!(
            "probe q={} ({}) -> {} in {:.1}s",
            rational::to_exact(q),
            rational::to_decimal(q, 6),
            v.status.label(),
            v.wall_time
        );
        probes.push(ProbeRecord { q: q.clone(), status: v.status.label(), wall_time: v.wall_time, witness_ratio });
        Ok(v.status)
    };

    let (mut low, mut witness) = match run(lo, &mut probes)? {
        SolverStatus::Sat(a) => {
            let r = achieved(&a, num, den)?;
            ((&r).max(lo).clone(), a)
        }
        SolverStatus::Unsat => {
            return Ok(RatioOutcome { bound: lo.clone(), witness: None, status: RatioStatus::BelowLo, probes })
        }
        _ => {
            return Ok(RatioOutcome {
                bound: lo.clone(),
                witness: None,
                status: RatioStatus::Inconclusive { last_sat: lo.clone(), first_unknown: lo.clone() },
                probes,
            })
        }
    };
    let mut high = hi.clone();
    let two = rational::int(2);
    while &high - &low > *tol {
        if low >= high {
            break;
        }
        let mid = (&low + &high) / &two;
        match run(&mid, &mut probes)? {
            SolverStatus::Sat(a) => {
                let r = achieved(&a, num, den)?;
                low = if r > mid { r } else { mid };
                witness = a;
            }
            SolverStatus::Unsat => high = mid,
            _ => {
                return Ok(RatioOutcome {
                    bound: low.clone(),
                    witness: Some(witness),
                    status: RatioStatus::Inconclusive { last_sat: low, first_unknown: mid },
                    probes,
                })
            }
        }
    }
    let status = if low >= *hi { RatioStatus::AtLeastHi } else { RatioStatus::Converged };
    Ok(RatioOutcome { bound: low, witness: Some(witness), status, probes })
}
