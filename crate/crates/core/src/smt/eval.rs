//! Direct evaluation of terms under an assignment (no solver involved).

use super::term::{Node, Op, Term, Value};
use super::{Assignment, SmtError};
use crate::rational::Rat;
use num_traits::Zero;
use std::collections::HashMap;

pub fn eval(t: &Term, a: &Assignment) -> Result<Value, SmtError> {
    eval_memo(t, a, &mut HashMap::new())
}

pub fn eval_bool(t: &Term, a: &Assignment) -> Result<bool, SmtError> {
    eval(t, a)?
        .as_bool()
        .ok_or_else(|| SmtError::Eval(format!("expected Bool: {t:?}")))
}

pub fn eval_num(t: &Term, a: &Assignment) -> Result<Rat, SmtError> {
    match eval(t, a)? {
        Value::Num(r) => Ok(r),
        Value::Bool(_) => Err(SmtError::Eval(format!("expected number: {t:?}"))),
    }
}

pub(crate) fn eval_memo(
    t: &Term,
    a: &Assignment,
    memo: &mut HashMap<usize, Value>,
) -> Result<Value, SmtError> {
    if let Some(v) = memo.get(&t.id()) {
        return Ok(v.clone());
    }
    let v = match t.node() {
        Node::Const(v) => v.clone(),
        Node::Var(n) => a.get(n).cloned().ok_or_else(|| SmtError::MissingVar(n.to_string()))?,
        Node::App(op, kids) => apply(*op, kids, a, memo)?,
    };
    memo.insert(t.id(), v.clone());
    Ok(v)
}

fn apply(
    op: Op,
    kids: &[Term],
    a: &Assignment,
    memo: &mut HashMap<usize, Value>,
) -> Result<Value, SmtError> {
    let b = |t: &Term, memo: &mut HashMap<usize, Value>| -> Result<bool, SmtError> {
        eval_memo(t, a, memo)?
            .as_bool()
            .ok_or_else(|| SmtError::Eval("expected Bool operand".into()))
    };
    let num = |t: &Term, memo: &mut HashMap<usize, Value>| -> Result<Rat, SmtError> {
        match eval_memo(t, a, memo)? {
            Value::Num(r) => Ok(r),
            Value::Bool(_) => Err(SmtError::Eval("expected numeric operand".into())),
        }
    };
    Ok(match op {
        Op::And => {
            for k in kids {
                if !b(k, memo)? {
                    return Ok(Value::Bool(false));
                }
            }
            Value::Bool(true)
        }
        Op::Or => {
            for k in kids {
                if b(k, memo)? {
                    return Ok(Value::Bool(true));
                }
            }
            Value::Bool(false)
        }
        Op::Not => Value::Bool(!b(&kids[0], memo)?),
        Op::Implies => Value::Bool(!b(&kids[0], memo)? || b(&kids[1], memo)?),
        Op::Ite => {
            if b(&kids[0], memo)? {
                eval_memo(&kids[1], a, memo)?
            } else {
                eval_memo(&kids[2], a, memo)?
            }
        }
        Op::Eq => Value::Bool(eval_memo(&kids[0], a, memo)? == eval_memo(&kids[1], a, memo)?),
        Op::Lt => Value::Bool(num(&kids[0], memo)? < num(&kids[1], memo)?),
        Op::Le => Value::Bool(num(&kids[0], memo)? <= num(&kids[1], memo)?),
        Op::Gt => Value::Bool(num(&kids[0], memo)? > num(&kids[1], memo)?),
        Op::Ge => Value::Bool(num(&kids[0], memo)? >= num(&kids[1], memo)?),
        Op::Add => {
            let mut s = Rat::zero();
            for k in kids {
                s += num(k, memo)?;
            }
            Value::Num(s)
        }
        Op::Sub => {
            let first = num(&kids[0], memo)?;
            if kids.len() == 1 {
                Value::Num(-first)
            } else {
                let mut s = first;
                for k in &kids[1..] {
                    s -= num(k, memo)?;
                }
                Value::Num(s)
            }
        }
        Op::Mul => {
            let mut p = Rat::from_integer(1.into());
            for k in kids {
                p *= num(k, memo)?;
            }
            Value::Num(p)
        }
        Op::Min | Op::Max => {
            let mut best = num(&kids[0], memo)?;
            for k in &kids[1..] {
                let v = num(k, memo)?;
                if (op == Op::Min && v < best) || (op == Op::Max && v > best) {
                    best = v;
                }
            }
            Value::Num(best)
        }
    })
}
