//! Heuristics encoded as transition systems.

pub mod worksteal;
pub mod srpt;
pub mod linuxlb;
pub mod pktsched;
