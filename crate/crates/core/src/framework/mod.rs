//! Transition-system framework: schema, unrolling, queries, decoding.

pub mod decode;
pub mod query;
pub mod replay;
pub mod schema;
pub mod trace;

pub use decode::{decode_trace, ScheduleTrace, Segment, SegmentKind, StepKind, TraceStep};
pub use query::{
    build_check, build_gap, check_invariant, optimal_gap, probe_gap, run_check, CheckOutcome, CheckProblem,
    GapOutcome, GapProblem, Ideal, IdealMode, IdealSchedule, Verdict,
};
pub use replay::replay_constraints;
pub use schema::{Field, InvariantFn, Lifetime, Phase, StateSchema, StateStep};
pub use trace::{unroll, unroll_into, Cx, Decisions, TraceSpec, TransitionSpec, Unrolled};
