//! Solver models decoded into readable schedules.

use super::schema::{Phase, StateSchema, StateStep};
use super::trace::Unrolled;
use crate::error::{Error, Result};
use crate::rational::{serde_rat, Rat};
use crate::smt::{eval, Assignment, SmtError, Term, Value};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Algorithm,
    System,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    #[serde(with = "serde_rat")]
    pub time: Rat,
    pub kind: StepKind,
    pub tasks: Vec<BTreeMap<String, Value>>,
    pub queues: Vec<BTreeMap<String, Value>>,
    pub globals: BTreeMap<String, Value>,
}

/// What a Gantt bar means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Run,
    Switch,
    Wait,
    Block,
    Queued,
    Idle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub row: String,
    #[serde(with = "serde_rat")]
    pub start: Rat,
    #[serde(with = "serde_rat")]
    pub end: Rat,
    pub kind: SegmentKind,
    pub label: String,
}

/// One decoded trace copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub model: String,
    /// `heuristic`, `ideal` or `counterexample`.
    pub label: String,
    pub verdict: String,
    pub params: serde_json::Value,
    pub steps: Vec<TraceStep>,
    pub segments: Vec<Segment>,
    /// Values of the shared workload constants.
    pub workload: BTreeMap<String, Value>,
    /// Every variable of this copy, so a reader can re-evaluate constraints.
    pub assignment: BTreeMap<String, Value>,
}

impl ScheduleTrace {
    pub fn final_time(&self) -> Option<&Rat> {
        self.steps.last().map(|s| &s.time)
    }
}

fn value_of(t: &Term, a: &Assignment) -> Result<Value> {
    eval(t, a).map_err(|e| match e {
        SmtError::MissingVar(n) => Error::Decode(format!("assignment has no value for `{n}`")),
        other => Error::Smt(other),
    })
}

fn decode_state(s: &StateStep, schema: &StateSchema, a: &Assignment) -> Result<TraceStep> {
    let time = match value_of(&s.time, a)? {
        Value::Num(r) => r,
        Value::Bool(_) => return Err(Error::Decode("time is not numeric".into())),
    };
    let row = |fields: &[super::schema::Field], terms: &[Term]| -> Result<BTreeMap<String, Value>> {
        fields
            .iter()
            .zip(terms)
            .map(|(f, t)| Ok((f.name.clone(), value_of(t, a)?)))
            .collect()
    };
    Ok(TraceStep {
        index: s.index,
        time,
        kind: match s.phase {
            Phase::Pre => StepKind::System,
            Phase::Post => StepKind::Algorithm,
        },
        tasks: s.tasks.iter().map(|t| row(&schema.task_fields, t)).collect::<Result<_>>()?,
        queues: s.queues.iter().map(|q| row(&schema.queue_fields, q)).collect::<Result<_>>()?,
        globals: row(&schema.global_fields, &s.globals)?,
    })
}

/// Maps every state of `tr` back to named field values.
pub fn decode_trace(a: &Assignment, tr: &Unrolled, schema: &StateSchema) -> Result<Vec<TraceStep>> {
    tr.states.iter().map(|s| decode_state(s, schema, a)).collect()
}

/// The variables whose names start with `prefix.`.
pub fn scoped_values(a: &Assignment, prefix: &str) -> BTreeMap<String, Value> {
    let dotted = format!("{prefix}.");
    a.iter()
        .filter(|(k, _)| k.starts_with(&dotted))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Rebuilds an assignment from a decoded trace.
pub fn assignment_of(trace: &ScheduleTrace) -> Assignment {
    let mut a = Assignment::new();
    for (k, v) in trace.workload.iter().chain(trace.assignment.iter()) {
        a.insert(k.clone(), v.clone());
    }
    a
}
