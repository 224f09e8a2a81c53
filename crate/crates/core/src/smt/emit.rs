//! SMT-LIB2 text emission.

use super::term::{Node, Op, Sort, Term, Value};
use super::Problem;
use crate::rational::Rat;
use num_traits::Signed;
use std::fmt::Write;

/// Full script: logic, declarations in insertion order, assertions, optional
/// goal, `check-sat` and `get-model`. Output is a pure function of the input.
pub fn emit_smtlib(problem: &Problem, goal: Option<&Term>) -> String {
    let mut out = String::new();
    for (k, v) in &problem.metadata {
        let _ = writeln!(out, "; {k}: {}", v.replace('\n', " "));
    }
    out.push_str("(set-option :produce-models true)\n");
    let logic = if problem.uses_int(goal) { "QF_LIRA" } else { "QF_LRA" };
    let _ = writeln!(out, "(set-logic {logic})");
    for (name, sort) in problem.declarations() {
        let _ = writeln!(out, "(declare-const {} {})", symbol(name), sort.smt_name());
    }
    let mut lets = 0usize;
    for a in problem.assertions() {
        out.push_str("(assert ");
        write_term(&mut out, a, &mut lets);
        out.push_str(")\n");
    }
    if let Some(g) = goal {
        out.push_str("(assert ");
        write_term(&mut out, g, &mut lets);
        out.push_str(")\n");
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

pub fn term_to_string(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t, &mut 0);
    s
}

fn is_simple_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if !c.is_ascii_digit() => {}
        _ => return false,
    }
    s.chars()
        .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c))
}

fn symbol(name: &str) -> String {
    if is_simple_symbol(name) {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn write_num(out: &mut String, r: &Rat, sort: Sort) {
    let neg = r.is_negative();
    let a = r.abs();
    if neg {
        out.push_str("(- ");
    }
    match sort {
        Sort::Int => {
            let _ = write!(out, "{}", a.numer());
        }
        _ if a.is_integer() => {
            let _ = write!(out, "{}.0", a.numer());
        }
        _ => {
            let _ = write!(out, "(/ {}.0 {}.0)", a.numer(), a.denom());
        }
    }
    if neg {
        out.push(')');
    }
}

fn write_term(out: &mut String, t: &Term, lets: &mut usize) {
    match t.node() {
        Node::Const(Value::Bool(b)) => out.push_str(if *b { "true" } else { "false" }),
        Node::Const(Value::Num(r)) => write_num(out, r, t.sort()),
        Node::Var(n) => out.push_str(&symbol(n)),
        Node::App(op @ (Op::Min | Op::Max), kids) => {
            // min/max are not SMT-LIB functions: fold pairwise through `let`
            // so each operand is printed once.
            let cmp = if *op == Op::Min { "<=" } else { ">=" };
            let mut acc = String::new();
            write_term(&mut acc, &kids[0], lets);
            for k in &kids[1..] {
                let (a, b) = (*lets, *lets + 1);
                *lets += 2;
                let mut next = String::new();
                let _ = write!(next, "(let ((m!{a} {acc}) (m!{b} ");
                write_term(&mut next, k, lets);
                let _ = write!(next, ")) (ite ({cmp} m!{a} m!{b}) m!{a} m!{b}))");
                acc = next;
            }
            out.push_str(&acc);
        }
        Node::App(op, kids) => {
            out.push('(');
            out.push_str(op.symbol());
            for k in kids {
                out.push(' ');
                write_term(out, k, lets);
            }
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use crate::smt::term;

    #[test]
    fn declares_and_asserts() {
        let mut p = Problem::new();
        let x = p.real_var("x");
        p.assert(x.gt(&Term::real_i(0)));
        let s = emit_smtlib(&p, None);
        assert!(s.contains("(declare-const x Real)"));
        assert!(s.contains("(assert (> x 0.0))"));
        assert!(s.contains("(set-logic QF_LRA)"));
        assert!(s.ends_with("(check-sat)\n(get-model)\n"));
    }

    #[test]
    fn empty_problem() {
        let s = emit_smtlib(&Problem::new(), None);
        assert!(s.contains("(set-logic QF_LRA)"));
        assert!(s.contains("(check-sat)"));
        assert!(!s.contains("assert"));
        assert!(!s.contains("declare"));
    }

    #[test]
    fn numbers() {
        assert_eq!(term_to_string(&Term::real(ratio(-3, 4))), "(- (/ 3.0 4.0))");
        assert_eq!(term_to_string(&Term::real(int(5))), "5.0");
        assert_eq!(term_to_string(&Term::int(-2)), "(- 2)");
    }

    #[test]
    fn int_switches_logic() {
        let mut p = Problem::new();
        let n = p.int_var("n");
        p.assert(n.ge(&Term::int(1)));
        assert!(emit_smtlib(&p, None).contains("QF_LIRA"));
    }

    #[test]
    fn min_max_use_lets() {
        let a = Term::var("a", Sort::Real);
        let b = Term::var("b", Sort::Real);
        let c = Term::var("c", Sort::Real);
        let s = term_to_string(&term::min_of(&[a, b, c]));
        assert_eq!(s.matches(" a)").count() + s.matches(" a ").count(), 1);
        assert!(s.contains("let"));
    }

    #[test]
    fn odd_names_are_quoted() {
        assert_eq!(symbol("x y"), "|x y|");
        assert_eq!(symbol("3x"), "|3x|");
        assert_eq!(symbol("h_tau_3"), "h_tau_3");
    }
}
