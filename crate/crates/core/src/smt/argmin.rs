//! Selection primitive: argmin over candidates with a validity mask.
//!
//! Invalid candidates behave as +infinity. Ties go to the smallest index.

use super::term::{self, Sort, Term};
use super::{Problem, SmtError};

/// `a <lex b` for equal-length key tuples.
pub fn lex_lt(a: &[Term], b: &[Term]) -> Term {
    lex(a, b, false)
}

/// `a <=lex b` for equal-length key tuples.
pub fn lex_le(a: &[Term], b: &[Term]) -> Term {
    lex(a, b, true)
}

fn lex(a: &[Term], b: &[Term], or_equal: bool) -> Term {
    assert_eq!(a.len(), b.len(), "lexicographic keys of different length");
    assert!(!a.is_empty(), "empty lexicographic key");
    let last = a.len() - 1;
    let mut acc = if or_equal { a[last].le(&b[last]) } else { a[last].lt(&b[last]) };
    for k in (0..last).rev() {
        acc = term::or2(&a[k].lt(&b[k]), &term::and2(&a[k].eq_t(&b[k]), &acc));
    }
    acc
}

/// Argmin over real values. Returns one Bool per candidate plus the side
/// constraints that define them; the caller asserts the constraints.
pub fn build_argmin(
    p: &mut Problem,
    prefix: &str,
    values: &[Term],
    validity: &[Term],
) -> Result<(Vec<Term>, Vec<Term>), SmtError> {
    let keys: Vec<Vec<Term>> = values.iter().map(|v| vec![v.clone()]).collect();
    build_argmin_lex(p, prefix, &keys, validity)
}

/// Argmin over lexicographic key tuples (keys may mix numeric sorts per
/// position as long as each position is consistent).
pub fn build_argmin_lex(
    p: &mut Problem,
    prefix: &str,
    keys: &[Vec<Term>],
    validity: &[Term],
) -> Result<(Vec<Term>, Vec<Term>), SmtError> {
    if keys.is_empty() {
        return Err(SmtError::Construction("argmin over an empty list".into()));
    }
    if keys.len() != validity.len() {
        return Err(SmtError::Construction(format!(
            "argmin: {} values but {} validity flags",
            keys.len(),
            validity.len()
        )));
    }
    let width = keys[0].len();
    if width == 0 || keys.iter().any(|k| k.len() != width) {
        return Err(SmtError::Construction("argmin: keys must be non-empty and of equal length".into()));
    }
    for pos in 0..width {
        let s = keys[0][pos].sort();
        if !s.is_numeric() || keys.iter().any(|k| k[pos].sort() != s) {
            return Err(SmtError::Construction(format!("argmin: key position {pos} has mixed or non-numeric sorts")));
        }
    }
    if validity.iter().any(|v| v.sort() != Sort::Bool) {
        return Err(SmtError::Construction("argmin: validity flags must be Bool".into()));
    }
    let n = keys.len();
    let mut sel = Vec::with_capacity(n);
    let mut side = Vec::with_capacity(n);
    for i in 0..n {
        if validity[i].is_false() {
            sel.push(Term::bool(false));
            continue;
        }
        let mut conj = vec![validity[i].clone()];
        for j in 0..n {
            if j == i || validity[j].is_false() {
                continue;
            }
            let beats = if j < i { lex_lt(&keys[i], &keys[j]) } else { lex_le(&keys[i], &keys[j]) };
            conj.push(term::or2(&validity[j].not(), &beats));
        }
        let v = p.var(&format!("{prefix}_{i}"), Sort::Bool);
        side.push(v.eq_t(&term::and(conj)));
        sel.push(v);
    }
    Ok((sel, side))
}
