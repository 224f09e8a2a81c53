//! Fixtures shared by the benchmarks.

use virelay::models::worksteal::{ConcreteWorkload, WorkStealConfig};
use virelay::rational::{int, ratio};

/// A chain-and-fan workload: task 0 spawns every other task.
pub fn fan(n_tasks: usize) -> ConcreteWorkload {
    ConcreteWorkload {
        lengths: (0..n_tasks).map(|i| ratio(1 + (i as i64 * 7) % 5, 2)).collect(),
        switch_costs: vec![int(0); n_tasks],
        threads: (0..n_tasks as i64).collect(),
        edges: (1..n_tasks).map(|j| (0, j)).collect(),
    }
}

pub fn ws_config(n_resources: usize, n_tasks: usize, k: i64) -> WorkStealConfig {
    WorkStealConfig::new(n_resources, n_tasks, int(k), int(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fan_has_one_root() {
        let w = fan(5);
        assert_eq!(w.edges.len(), 4);
        assert!(w.edges.iter().all(|&(p, _)| p == 0));
    }
}
