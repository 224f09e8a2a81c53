//! State schema and per-step state instances.

use crate::error::{Error, Result};
use crate::smt::{Sort, Term};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// How long a field's variable lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lifetime {
    /// Fresh variable at every state.
    Step,
    /// One variable per trace copy, shared by all its states. Used for
    /// write-once quantities such as the time a task was started.
    Trace,
}

#[derive(Clone, Debug)]
pub struct Field {
    pub name: String,
    pub sort: Sort,
    pub lifetime: Lifetime,
}

impl Field {
    pub fn step(name: &str, sort: Sort) -> Self {
        Field { name: name.to_string(), sort, lifetime: Lifetime::Step }
    }

    pub fn trace(name: &str, sort: Sort) -> Self {
        Field { name: name.to_string(), sort, lifetime: Lifetime::Trace }
    }
}

/// Constraints that must hold at every state.
pub type InvariantFn = Arc<dyn Fn(&StateStep) -> Result<Vec<Term>> + Send + Sync>;

#[derive(Clone)]
pub struct StateSchema {
    pub task_fields: Vec<Field>,
    pub queue_fields: Vec<Field>,
    pub global_fields: Vec<Field>,
    pub n_tasks: usize,
    pub n_resources: usize,
    pub invariants: Vec<InvariantFn>,
}

impl std::fmt::Debug for StateSchema {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateSchema")
            .field("task_fields", &self.task_fields)
            .field("queue_fields", &self.queue_fields)
            .field("global_fields", &self.global_fields)
            .field("n_tasks", &self.n_tasks)
            .field("n_resources", &self.n_resources)
            .field("invariants", &self.invariants.len())
            .finish()
    }
}

#[derive(Debug)]
pub(crate) struct Layout {
    pub task: HashMap<String, usize>,
    pub queue: HashMap<String, usize>,
    pub global: HashMap<String, usize>,
}

impl StateSchema {
    pub fn new(n_tasks: usize, n_resources: usize) -> Self {
        StateSchema {
            task_fields: Vec::new(),
            queue_fields: Vec::new(),
            global_fields: Vec::new(),
            n_tasks,
            n_resources,
            invariants: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tasks == 0 || self.n_resources == 0 {
            return Err(Error::config("schema needs at least one task and one resource"));
        }
        for (group, fields) in [
            ("task", &self.task_fields),
            ("queue", &self.queue_fields),
            ("global", &self.global_fields),
        ] {
            let mut seen = std::collections::HashSet::new();
            for f in fields.iter() {
                if !seen.insert(&f.name) {
                    return Err(Error::config(format!("duplicate {group} field `{}`", f.name)));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn layout(&self) -> Arc<Layout> {
        let idx = |fs: &[Field]| fs.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
        Arc::new(Layout {
            task: idx(&self.task_fields),
            queue: idx(&self.queue_fields),
            global: idx(&self.global_fields),
        })
    }

    /// Number of fresh variables per state.
    pub fn vars_per_state(&self) -> usize {
        let step = |fs: &[Field]| fs.iter().filter(|f| f.lifetime == Lifetime::Step).count();
        1 + self.n_tasks * step(&self.task_fields)
            + self.n_resources * step(&self.queue_fields)
            + step(&self.global_fields)
    }
}

/// Which half of a step a state belongs to: `Pre` is produced by `System`
/// (or is the initial state), `Post` by `Algorithm`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Pre,
    Post,
}

/// The variables of one state.
#[derive(Clone, Debug)]
pub struct StateStep {
    pub index: usize,
    pub phase: Phase,
    pub time: Term,
    pub tasks: Vec<Vec<Term>>,
    pub queues: Vec<Vec<Term>>,
    pub globals: Vec<Term>,
    pub(crate) layout: Arc<Layout>,
}

impl StateStep {
    pub fn task(&self, i: usize, field: &str) -> Result<&Term> {
        let k = *self
            .layout
            .task
            .get(field)
            .ok_or_else(|| Error::Field { group: "task", name: field.to_string() })?;
        Ok(&self.tasks[i][k])
    }

    pub fn queue(&self, r: usize, field: &str) -> Result<&Term> {
        let k = *self
            .layout
            .queue
            .get(field)
            .ok_or_else(|| Error::Field { group: "queue", name: field.to_string() })?;
        Ok(&self.queues[r][k])
    }

    pub fn global(&self, field: &str) -> Result<&Term> {
        let k = *self
            .layout
            .global
            .get(field)
            .ok_or_else(|| Error::Field { group: "global", name: field.to_string() })?;
        Ok(&self.globals[k])
    }

    /// One field for every task.
    pub fn task_col(&self, field: &str) -> Result<Vec<Term>> {
        (0..self.tasks.len()).map(|i| self.task(i, field).cloned()).collect()
    }

    /// One field for every resource.
    pub fn queue_col(&self, field: &str) -> Result<Vec<Term>> {
        (0..self.queues.len()).map(|r| self.queue(r, field).cloned()).collect()
    }

    pub fn label(&self) -> String {
        match self.phase {
            Phase::Pre => format!("S{}", self.index),
            Phase::Post => format!("S{}'", self.index),
        }
    }
}
