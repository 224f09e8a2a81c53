//! Versioned JSON trace files.
//!
//! Every rational is written as an exact `"p/q"` or decimal string, so a file
//! read back reproduces the solver's values bit for bit.

use crate::error::{Error, Result};
use crate::framework::{decode::assignment_of, ScheduleTrace, TraceStep};
use crate::rational::{serde_rat, Rat};
use crate::smt::Assignment;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFileV1 {
    pub schema_version: u32,
    pub model: String,
    pub query: String,
    pub params: serde_json::Value,
    pub verdict: String,
    #[serde(default, with = "serde_rat::option", skip_serializing_if = "Option::is_none")]
    pub bound: Option<Rat>,
    /// States of the first chart.
    pub steps: Vec<TraceStep>,
    /// One entry per trace copy: a counterexample, or a heuristic/ideal pair.
    #[serde(default)]
    pub charts: Vec<ScheduleTrace>,
}

impl TraceFileV1 {
    pub fn new(
        model: &str,
        query: &str,
        params: serde_json::Value,
        verdict: &str,
        bound: Option<Rat>,
        charts: Vec<ScheduleTrace>,
    ) -> Self {
        TraceFileV1 {
            schema_version: SCHEMA_VERSION,
            model: model.to_string(),
            query: query.to_string(),
            params,
            verdict: verdict.to_string(),
            bound,
            steps: charts.first().map(|c| c.steps.clone()).unwrap_or_default(),
            charts,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(Error::Decode(format!("unknown schema_version {v}"))),
            None => return Err(Error::Decode("trace file has no schema_version".into())),
        }
        Ok(serde_json::from_value(raw)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn chart(&self, label: &str) -> Option<&ScheduleTrace> {
        self.charts.iter().find(|c| c.label == label)
    }

    /// Every stored variable across all charts, ready for replay.
    pub fn assignment(&self) -> Assignment {
        let mut a = Assignment::new();
        for c in &self.charts {
            for (k, v) in assignment_of(c).iter() {
                a.insert(k.clone(), v.clone());
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{Segment, SegmentKind, StepKind};
    use crate::rational::ratio;
    use crate::smt::Value;
    use std::collections::BTreeMap;

    fn sample() -> TraceFileV1 {
        let mut tasks = BTreeMap::new();
        tasks.insert("rem".to_string(), Value::Num(ratio(1, 3)));
        tasks.insert("done".to_string(), Value::Bool(false));
        let mut assignment = BTreeMap::new();
        assignment.insert("h.s0.rem.0".to_string(), Value::Num(ratio(-7, 1024)));
        let chart = ScheduleTrace {
            model: "worksteal".into(),
            label: "heuristic".into(),
            verdict: "sat".into(),
            params: serde_json::json!({"n_tasks": 2}),
            steps: vec![TraceStep {
                index: 0,
                time: ratio(22, 7),
                kind: StepKind::System,
                tasks: vec![tasks],
                queues: vec![],
                globals: BTreeMap::new(),
            }],
            segments: vec![Segment {
                row: "P0".into(),
                start: ratio(0, 1),
                end: ratio(1, 3),
                kind: SegmentKind::Run,
                label: "T1".into(),
            }],
            workload: BTreeMap::new(),
            assignment,
        };
        TraceFileV1::new("worksteal", "gap", serde_json::json!({}), "sat", Some(ratio(44, 13)), vec![chart])
    }

    #[test]
    fn round_trip_is_exact() {
        let f = sample();
        let text = f.to_json().unwrap();
        assert!(text.contains("\"44/13\""));
        assert!(text.contains("\"22/7\""));
        assert_eq!(TraceFileV1::from_json(&text).unwrap(), f);
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = sample().to_json().unwrap().replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(TraceFileV1::from_json(&text), Err(Error::Decode(_))));
        assert!(TraceFileV1::from_json("{\"model\": \"x\"}").is_err());
    }
}
