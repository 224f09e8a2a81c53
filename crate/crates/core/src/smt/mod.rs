//! Terms, problems, SMT-LIB2 emission and the solver driver.

mod argmin;
mod emit;
mod eval;
mod ratio;
pub mod sexp;
mod solver;
pub mod term;

pub use argmin::{build_argmin, build_argmin_lex, lex_le, lex_lt};
pub use emit::{emit_smtlib, term_to_string};
pub use eval::{eval, eval_bool, eval_num};
pub use ratio::{maximize_ratio, probe_ratio, ProbeRecord, RatioOutcome, RatioStatus};
pub use solver::{parse_solver_output, run_solver, Solver, SolverStatus, SolverVerdict, SOLVER_ENV};
pub use term::{Op, Sort, Term, Value};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum SmtError {
    #[error("construction error: {0}")]
    Construction(String),
    #[error("nonlinear term rejected: {0}")]
    Nonlinear(String),
    #[error("undeclared variable `{0}`")]
    Undeclared(String),
    #[error("variable `{0}` declared twice")]
    Duplicate(String),
    #[error("no value for variable `{0}`")]
    MissingVar(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("solver configuration error: {0}")]
    Config(String),
    #[error("solver output parse error: {msg}\n--- raw output ---\n{raw}")]
    Parse { msg: String, raw: String },
    #[error("solver error: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Values for every declared variable of a problem.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment {
    values: BTreeMap<String, Value>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, v: Value) {
        self.values.insert(name.into(), v);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.values.iter()
    }

    /// Fills declared variables the solver left out (they are unconstrained).
    pub fn complete(&mut self, problem: &Problem) {
        for (name, sort) in problem.declarations() {
            self.values
                .entry(name.to_string())
                .or_insert_with(|| Value::default_for(*sort));
        }
    }
}

/// Declarations, assertions and free-form metadata.
#[derive(Clone, Debug, Default)]
pub struct Problem {
    decls: Vec<(Arc<str>, Sort)>,
    index: HashMap<Arc<str>, Sort>,
    assertions: Vec<Term>,
    pub metadata: BTreeMap<String, String>,
    counter: usize,
}

impl Problem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, sort: Sort) -> Result<Term, SmtError> {
        if self.index.contains_key(name) {
            return Err(SmtError::Duplicate(name.to_string()));
        }
        let name: Arc<str> = Arc::from(name);
        self.index.insert(name.clone(), sort);
        self.decls.push((name.clone(), sort));
        Ok(Term::var(&name, sort))
    }

    /// Declares a variable; a duplicate name is a bug in the caller.
    pub fn var(&mut self, name: &str, sort: Sort) -> Term {
        self.declare(name, sort).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn bool_var(&mut self, name: &str) -> Term {
        self.var(name, Sort::Bool)
    }

    pub fn real_var(&mut self, name: &str) -> Term {
        self.var(name, Sort::Real)
    }

    pub fn int_var(&mut self, name: &str) -> Term {
        self.var(name, Sort::Int)
    }

    /// A variable named `prefix!n` that cannot clash with caller names.
    pub fn fresh(&mut self, prefix: &str, sort: Sort) -> Term {
        loop {
            let name = format!("{prefix}!{}", self.counter);
            self.counter += 1;
            if !self.index.contains_key(name.as_str()) {
                return self.var(&name, sort);
            }
        }
    }

    /// Names `t` by a new variable constrained equal to it.
    pub fn define(&mut self, name: &str, t: &Term) -> Term {
        if t.as_const().is_some() || t.var_name().is_some() {
            return t.clone();
        }
        let v = self.var(name, t.sort());
        self.assert(v.eq_t(t));
        v
    }

    pub fn assert(&mut self, t: Term) {
        assert_eq!(t.sort(), Sort::Bool, "assertion must be Bool: {t:?}");
        if t.is_true() {
            return;
        }
        self.assertions.push(t);
    }

    pub fn assert_all(&mut self, ts: impl IntoIterator<Item = Term>) {
        for t in ts {
            self.assert(t);
        }
    }

    pub fn declarations(&self) -> impl Iterator<Item = (&str, &Sort)> {
        self.decls.iter().map(|(n, s)| (&**n, s))
    }

    pub fn num_declarations(&self) -> usize {
        self.decls.len()
    }

    pub fn assertions(&self) -> &[Term] {
        &self.assertions
    }

    pub fn sort_of(&self, name: &str) -> Option<Sort> {
        self.index.get(name).copied()
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Checks that every variable in the assertions (and `extra`) is declared
    /// with the sort it is used at.
    pub fn validate(&self, extra: &[&Term]) -> Result<(), SmtError> {
        let mut seen = HashSet::new();
        let mut stack: Vec<&Term> = self.assertions.iter().collect();
        stack.extend_from_slice(extra);
        while let Some(t) = stack.pop() {
            if !seen.insert(t.id()) {
                continue;
            }
            match t.node() {
                term::Node::Var(n) => match self.index.get(&**n) {
                    Some(s) if *s == t.sort() => {}
                    Some(s) => {
                        return Err(SmtError::Construction(format!(
                            "variable `{n}` used as {:?} but declared {s:?}",
                            t.sort()
                        )))
                    }
                    None => return Err(SmtError::Undeclared(n.to_string())),
                },
                term::Node::App(_, kids) => stack.extend(kids.iter()),
                term::Node::Const(_) => {}
            }
        }
        Ok(())
    }

    /// True when an Int-sorted term occurs anywhere.
    pub fn uses_int(&self, extra: Option<&Term>) -> bool {
        if self.decls.iter().any(|(_, s)| *s == Sort::Int) {
            return true;
        }
        let mut seen = HashSet::new();
        let mut stack: Vec<&Term> = self.assertions.iter().chain(extra).collect();
        while let Some(t) = stack.pop() {
            if !seen.insert(t.id()) {
                continue;
            }
            if t.sort() == Sort::Int {
                return true;
            }
            if let term::Node::App(_, kids) = t.node() {
                stack.extend(kids.iter());
            }
        }
        false
    }

    /// Evaluates all assertions; returns the first one that is not true.
    pub fn first_violation(&self, a: &Assignment) -> Result<Option<usize>, SmtError> {
        let mut memo = HashMap::new();
        for (i, t) in self.assertions.iter().enumerate() {
            if !eval::eval_memo(t, a, &mut memo)?.as_bool().unwrap_or(false) {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }
}
