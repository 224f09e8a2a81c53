//! Re-checking a recorded assignment against the constraints that produced it.

use crate::error::{Error, Result};
use crate::smt::{eval_bool, term_to_string, Assignment, Problem, Term};

fn short(t: &Term) -> String {
    let s = term_to_string(t);
    if s.len() > 240 {
        format!("{}...", &s[..s.char_indices().nth(240).map(|(i, _)| i).unwrap_or(s.len())])
    } else {
        s
    }
}

/// Fails with the first assertion (or the goal) that `a` does not satisfy.
pub fn replay_constraints(p: &Problem, goal: Option<&Term>, a: &Assignment) -> Result<()> {
    let mut full = a.clone();
    full.complete(p);
    if let Some(i) = p.first_violation(&full)? {
        return Err(Error::replay(format!("assertion #{i} fails: {}", short(&p.assertions()[i]))));
    }
    if let Some(g) = goal {
        if !eval_bool(g, &full)? {
            return Err(Error::replay(format!("goal fails: {}", short(g))));
        }
    }
    Ok(())
}
