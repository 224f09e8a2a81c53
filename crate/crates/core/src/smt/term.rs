//! Typed symbolic terms.
//!
//! Terms are immutable and cheaply cloned (`Arc`). Construction goes through
//! [`Term::app`], which checks sorts and rejects nonlinear products; the
//! operator helpers below panic on misuse, which is always a bug in model code.

use super::SmtError;
use crate::rational::{self, Rat};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sort {
    Bool,
    Real,
    Int,
}

impl Sort {
    pub fn is_numeric(self) -> bool {
        matches!(self, Sort::Real | Sort::Int)
    }

    pub fn smt_name(self) -> &'static str {
        match self {
            Sort::Bool => "Bool",
            Sort::Real => "Real",
            Sort::Int => "Int",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    And,
    Or,
    Not,
    Implies,
    Ite,
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Min,
    Max,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
            Op::Implies => "=>",
            Op::Ite => "ite",
            Op::Eq => "=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Min => "min",
            Op::Max => "max",
        }
    }
}

/// A concrete value: booleans, or exact rationals for both `Real` and `Int`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Num(Rat),
}

impl Value {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Num(_) => None,
        }
    }

    pub fn as_num(&self) -> Option<&Rat> {
        match self {
            Value::Num(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    pub fn default_for(sort: Sort) -> Value {
        match sort {
            Sort::Bool => Value::Bool(false),
            _ => Value::Num(Rat::zero()),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Num(r) => s.serialize_str(&rational::to_exact(r)),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            B(bool),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::B(b) => Ok(Value::Bool(b)),
            Raw::S(s) => rational::parse(&s).map(Value::Num).map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(r) => write!(f, "{}", rational::to_exact(r)),
        }
    }
}

#[derive(Debug)]
pub enum Node {
    Const(Value),
    Var(Arc<str>),
    App(Op, Vec<Term>),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    sort: Sort,
}

#[derive(Clone)]
pub struct Term(Arc<Inner>);

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", super::emit::term_to_string(self))
    }
}

impl Term {
    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn sort(&self) -> Sort {
        self.0.sort
    }

    /// Pointer identity, used for memoization.
    pub fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    fn mk(node: Node, sort: Sort) -> Term {
        Term(Arc::new(Inner { node, sort }))
    }

    pub fn bool(b: bool) -> Term {
        Term::mk(Node::Const(Value::Bool(b)), Sort::Bool)
    }

    pub fn real(r: Rat) -> Term {
        Term::mk(Node::Const(Value::Num(r)), Sort::Real)
    }

    pub fn real_i(v: i64) -> Term {
        Term::real(rational::int(v))
    }

    pub fn int(v: i64) -> Term {
        Term::mk(Node::Const(Value::Num(rational::int(v))), Sort::Int)
    }

    pub fn num(r: Rat, sort: Sort) -> Term {
        assert!(sort.is_numeric(), "numeric constant with sort {sort:?}");
        assert!(sort == Sort::Real || r.is_integer(), "non-integer Int constant");
        Term::mk(Node::Const(Value::Num(r)), sort)
    }

    /// A variable reference. Declaration is the job of [`super::Problem`].
    pub fn var(name: &str, sort: Sort) -> Term {
        Term::mk(Node::Var(Arc::from(name)), sort)
    }

    pub fn as_const(&self) -> Option<&Value> {
        match self.node() {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool_const(&self) -> Option<bool> {
        self.as_const().and_then(Value::as_bool)
    }

    pub fn var_name(&self) -> Option<&str> {
        match self.node() {
            Node::Var(n) => Some(n),
            _ => None,
        }
    }

    /// Checked construction of an application.
    pub fn app(op: Op, children: Vec<Term>) -> Result<Term, SmtError> {
        let err = |msg: String| Err(SmtError::Construction(format!("{}: {msg}", op.symbol())));
        let all_sort = |s: Sort| children.iter().all(|c| c.sort() == s);
        let sort = match op {
            Op::And | Op::Or => {
                if !all_sort(Sort::Bool) {
                    return err("non-Bool operand".into());
                }
                Sort::Bool
            }
            Op::Not => {
                if children.len() != 1 || !all_sort(Sort::Bool) {
                    return err("expects one Bool operand".into());
                }
                Sort::Bool
            }
            Op::Implies => {
                if children.len() != 2 || !all_sort(Sort::Bool) {
                    return err("expects two Bool operands".into());
                }
                Sort::Bool
            }
            Op::Ite => {
                if children.len() != 3 {
                    return err("expects three operands".into());
                }
                if children[0].sort() != Sort::Bool {
                    return err("condition must be Bool".into());
                }
                if children[1].sort() != children[2].sort() {
                    return err(format!(
                        "branch sorts differ ({:?} vs {:?})",
                        children[1].sort(),
                        children[2].sort()
                    ));
                }
                children[1].sort()
            }
            Op::Eq => {
                if children.len() != 2 || children[0].sort() != children[1].sort() {
                    return err("expects two operands of one sort".into());
                }
                Sort::Bool
            }
            Op::Lt | Op::Le | Op::Gt | Op::Ge => {
                if children.len() != 2
                    || children[0].sort() != children[1].sort()
                    || !children[0].sort().is_numeric()
                {
                    return err("expects two numeric operands of one sort".into());
                }
                Sort::Bool
            }
            Op::Add | Op::Sub | Op::Mul | Op::Min | Op::Max => {
                if children.is_empty() {
                    return err("no operands".into());
                }
                let s = children[0].sort();
                if !s.is_numeric() || !all_sort(s) {
                    return err("operands must share one numeric sort".into());
                }
                if op == Op::Mul && children.iter().filter(|c| c.as_const().is_none()).count() > 1 {
                    return Err(SmtError::Nonlinear(format!(
                        "product of {} non-constant factors",
                        children.iter().filter(|c| c.as_const().is_none()).count()
                    )));
                }
                s
            }
        };
        Ok(Term::mk(Node::App(op, children), sort))
    }

    fn app_or_panic(op: Op, children: Vec<Term>) -> Term {
        Term::app(op, children).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn not(&self) -> Term {
        match self.node() {
            Node::Const(Value::Bool(b)) => Term::bool(!b),
            Node::App(Op::Not, c) => c[0].clone(),
            _ => Term::app_or_panic(Op::Not, vec![self.clone()]),
        }
    }

    pub fn implies(&self, other: &Term) -> Term {
        match (self.as_bool_const(), other.as_bool_const()) {
            (Some(false), _) | (_, Some(true)) => Term::bool(true),
            (Some(true), _) => other.clone(),
            (_, Some(false)) => self.not(),
            _ => Term::app_or_panic(Op::Implies, vec![self.clone(), other.clone()]),
        }
    }

    pub fn iff(&self, other: &Term) -> Term {
        self.eq_t(other)
    }

    pub fn eq_t(&self, other: &Term) -> Term {
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            if self.sort() == other.sort() {
                return Term::bool(a == b);
            }
        }
        if self.id() == other.id() {
            return Term::bool(true);
        }
        Term::app_or_panic(Op::Eq, vec![self.clone(), other.clone()])
    }

    fn cmp_op(&self, op: Op, other: &Term) -> Term {
        if let (Some(Value::Num(a)), Some(Value::Num(b))) = (self.as_const(), other.as_const()) {
            if self.sort() == other.sort() {
                let r = match op {
                    Op::Lt => a < b,
                    Op::Le => a <= b,
                    Op::Gt => a > b,
                    _ => a >= b,
                };
                return Term::bool(r);
            }
        }
        Term::app_or_panic(op, vec![self.clone(), other.clone()])
    }

    pub fn lt(&self, other: &Term) -> Term {
        self.cmp_op(Op::Lt, other)
    }

    pub fn le(&self, other: &Term) -> Term {
        self.cmp_op(Op::Le, other)
    }

    pub fn gt(&self, other: &Term) -> Term {
        self.cmp_op(Op::Gt, other)
    }

    pub fn ge(&self, other: &Term) -> Term {
        self.cmp_op(Op::Ge, other)
    }

    pub fn ne(&self, other: &Term) -> Term {
        self.eq_t(other).not()
    }

    /// Multiplication by a constant; the only product form offered.
    pub fn scale(&self, c: &Rat) -> Term {
        if c.is_one() {
            return self.clone();
        }
        if let Some(Value::Num(v)) = self.as_const() {
            return Term::num(v * c, self.sort());
        }
        let k = Term::num(c.clone(), self.sort());
        Term::app_or_panic(Op::Mul, vec![k, self.clone()])
    }

    pub fn min(&self, other: &Term) -> Term {
        Term::app_or_panic(Op::Min, vec![self.clone(), other.clone()])
    }

    pub fn max(&self, other: &Term) -> Term {
        Term::app_or_panic(Op::Max, vec![self.clone(), other.clone()])
    }

    pub fn is_true(&self) -> bool {
        self.as_bool_const() == Some(true)
    }

    pub fn is_false(&self) -> bool {
        self.as_bool_const() == Some(false)
    }
}

fn flatten_bool(op: Op, items: impl IntoIterator<Item = Term>) -> Term {
    let (unit, absorb) = if op == Op::And { (true, false) } else { (false, true) };
    let mut kids = Vec::new();
    for t in items {
        match t.as_bool_const() {
            Some(b) if b == unit => {}
            Some(_) => return Term::bool(absorb),
            None => match t.node() {
                Node::App(o, c) if *o == op => kids.extend(c.iter().cloned()),
                _ => kids.push(t),
            },
        }
    }
    match kids.len() {
        0 => Term::bool(unit),
        1 => kids.pop().unwrap(),
        _ => Term::app_or_panic(op, kids),
    }
}

pub fn and(items: impl IntoIterator<Item = Term>) -> Term {
    flatten_bool(Op::And, items)
}

pub fn or(items: impl IntoIterator<Item = Term>) -> Term {
    flatten_bool(Op::Or, items)
}

pub fn and2(a: &Term, b: &Term) -> Term {
    and([a.clone(), b.clone()])
}

pub fn or2(a: &Term, b: &Term) -> Term {
    or([a.clone(), b.clone()])
}

pub fn ite(c: &Term, a: &Term, b: &Term) -> Term {
    match c.as_bool_const() {
        Some(true) => return a.clone(),
        Some(false) => return b.clone(),
        None => {}
    }
    if a.id() == b.id() {
        return a.clone();
    }
    if a.sort() == Sort::Bool {
        match (a.as_bool_const(), b.as_bool_const()) {
            (Some(true), Some(false)) => return c.clone(),
            (Some(false), Some(true)) => return c.not(),
            _ => {}
        }
    }
    Term::app_or_panic(Op::Ite, vec![c.clone(), a.clone(), b.clone()])
}

/// Sum of terms of one numeric sort; constants are folded.
pub fn sum(items: impl IntoIterator<Item = Term>, sort: Sort) -> Term {
    let mut k = Rat::zero();
    let mut kids = Vec::new();
    for t in items {
        match t.as_const() {
            Some(Value::Num(v)) => k += v,
            _ => match t.node() {
                Node::App(Op::Add, c) => kids.extend(c.iter().cloned()),
                _ => kids.push(t),
            },
        }
    }
    if !k.is_zero() || kids.is_empty() {
        kids.push(Term::num(k, sort));
    }
    if kids.len() == 1 {
        return kids.pop().unwrap();
    }
    Term::app_or_panic(Op::Add, kids)
}

pub fn sub(a: &Term, b: &Term) -> Term {
    if let (Some(Value::Num(x)), Some(Value::Num(y))) = (a.as_const(), b.as_const()) {
        return Term::num(x - y, a.sort());
    }
    if let Some(Value::Num(y)) = b.as_const() {
        if y.is_zero() {
            return a.clone();
        }
    }
    Term::app_or_panic(Op::Sub, vec![a.clone(), b.clone()])
}

pub fn min_of(items: &[Term]) -> Term {
    assert!(!items.is_empty(), "min of nothing");
    if items.len() == 1 {
        return items[0].clone();
    }
    Term::app_or_panic(Op::Min, items.to_vec())
}

pub fn max_of(items: &[Term]) -> Term {
    assert!(!items.is_empty(), "max of nothing");
    if items.len() == 1 {
        return items[0].clone();
    }
    Term::app_or_panic(Op::Max, items.to_vec())
}

/// Pairwise at-most-one.
pub fn at_most_one(items: &[Term]) -> Term {
    let mut cs = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            cs.push(or2(&items[i].not(), &items[j].not()));
        }
    }
    and(cs)
}

pub fn exactly_one(items: &[Term]) -> Term {
    and2(&or(items.iter().cloned()), &at_most_one(items))
}

/// Number of true terms, as an Int-sorted sum of 0/1 ites.
pub fn count(items: &[Term]) -> Term {
    sum(items.iter().map(|b| ite(b, &Term::int(1), &Term::int(0))), Sort::Int)
}

impl std::ops::Add for &Term {
    type Output = Term;
    fn add(self, rhs: &Term) -> Term {
        sum([self.clone(), rhs.clone()], self.sort())
    }
}

impl std::ops::Sub for &Term {
    type Output = Term;
    fn sub(self, rhs: &Term) -> Term {
        sub(self, rhs)
    }
}

impl std::ops::Mul<&Term> for &Rat {
    type Output = Term;
    fn mul(self, rhs: &Term) -> Term {
        rhs.scale(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Term {
        Term::var("x", Sort::Real)
    }

    #[test]
    fn nonlinear_product_rejected() {
        let y = Term::var("y", Sort::Real);
        assert!(matches!(Term::app(Op::Mul, vec![x(), y]), Err(SmtError::Nonlinear(_))));
        assert!(Term::app(Op::Mul, vec![Term::real_i(2), x()]).is_ok());
    }

    #[test]
    fn sort_errors_rejected() {
        let b = Term::var("b", Sort::Bool);
        assert!(Term::app(Op::Add, vec![x(), b.clone()]).is_err());
        assert!(Term::app(Op::Ite, vec![x(), x(), x()]).is_err());
        assert!(Term::app(Op::Ite, vec![b.clone(), x(), b.clone()]).is_err());
        assert!(Term::app(Op::Lt, vec![b.clone(), b]).is_err());
        assert!(Term::app(Op::Lt, vec![x(), Term::int(1)]).is_err());
    }

    #[test]
    fn boolean_folding() {
        let b = Term::var("b", Sort::Bool);
        assert!(and([Term::bool(true), Term::bool(true)]).is_true());
        assert!(or([b.clone(), Term::bool(true)]).is_true());
        assert_eq!(and([Term::bool(true), b.clone()]).id(), b.id());
        assert_eq!(b.not().not().id(), b.id());
        assert!(and(Vec::<Term>::new()).is_true());
        assert!(or(Vec::<Term>::new()).is_false());
    }

    #[test]
    fn sum_folds_constants() {
        let s = sum([Term::real_i(1), Term::real_i(2)], Sort::Real);
        assert_eq!(s.as_const(), Some(&Value::Num(rational::int(3))));
        let t = sum([x(), Term::real_i(0)], Sort::Real);
        assert_eq!(t.var_name(), Some("x"));
    }
}
