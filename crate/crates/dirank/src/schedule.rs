//! Diffusion-order schedulers.
//!
//! A scheduler decides which node diffuses next:
//!
//! - `cyc` repeats the identity permutation round-robin, so every node is
//!   served exactly once per `n` selections;
//! - `argmax` walks the same permutation but skips nodes holding less than
//!   the average fluid magnitude, reporting how many it skipped;
//! - `greedy` always serves the node with the largest fluid magnitude,
//!   breaking ties towards the smallest id, via a lazy priority heap.

use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use crate::diteration::DiState;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    Cyclic,
    Argmax,
    Greedy,
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerKind::Cyclic => "cyc",
            SchedulerKind::Argmax => "argmax",
            SchedulerKind::Greedy => "greedy",
        })
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "cyc" => Ok(SchedulerKind::Cyclic),
            "argmax" => Ok(SchedulerKind::Argmax),
            "greedy" => Ok(SchedulerKind::Greedy),
            other => Err(Error::Config(format!(
                "unknown scheduler {other:?}; expected cyc, argmax or greedy"
            ))),
        }
    }
}

/// Outcome of asking a scheduler for the next node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    /// Diffuse `node`; `scans` nodes were inspected and skipped to find it.
    Node { node: usize, scans: u64 },
    /// No fluid is left anywhere; the run is complete.
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    fluid: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap on fluid; ties pop the smallest node id first.
        self.fluid
            .total_cmp(&other.fluid)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    kind: SchedulerKind,
    n: usize,
    cursor: usize,
    heap: BinaryHeap<HeapEntry>,
    primed: bool,
}

impl Scheduler {
    pub fn new(kind: SchedulerKind, n: usize) -> Scheduler {
        Scheduler {
            kind,
            n,
            cursor: 0,
            heap: BinaryHeap::new(),
            primed: false,
        }
    }

    pub fn kind(&self) -> SchedulerKind {
        self.kind
    }

    /// Picks the next node to diffuse given the current fluid state.
    ///
    /// `cyc` always returns a node (diffusing zero fluid is a permitted
    /// no-op); `argmax` and `greedy` report [`Pick::Converged`] once no fluid
    /// remains anywhere.
    pub fn next(&mut self, state: &DiState) -> Pick {
        match self.kind {
            SchedulerKind::Cyclic => Pick::Node {
                node: self.next_cyclic(),
                scans: 0,
            },
            SchedulerKind::Argmax => {
                let fluid = state.fluid();
                self.next_above_threshold(|i| fluid[i].abs(), state.fluid_magnitude())
            }
            SchedulerKind::Greedy => {
                let fluid = state.fluid();
                self.next_greedy(|i| fluid[i].abs())
            }
        }
    }

    /// Tells the scheduler that `node`'s fluid magnitude changed. Greedy
    /// scheduling needs this after every diffusion; the other kinds ignore it.
    pub fn observe(&mut self, node: usize, fluid_abs: f64) {
        if self.kind == SchedulerKind::Greedy && self.primed && fluid_abs > 0.0 {
            self.heap.push(HeapEntry { fluid: fluid_abs, node });
        }
    }

    pub(crate) fn next_cyclic(&mut self) -> usize {
        let node = self.cursor;
        self.cursor = (self.cursor + 1) % self.n;
        node
    }

    /// Round-robin scan that skips nodes below the average magnitude
    /// `total_abs / n`. The maximum-fluid node always qualifies, so a full
    /// lap means either zero fluid or accumulated drift in `total_abs`; in
    /// the latter case the best node seen is returned.
    pub(crate) fn next_above_threshold<F>(&mut self, abs: F, total_abs: f64) -> Pick
    where
        F: Fn(usize) -> f64,
    {
        if total_abs <= 0.0 {
            return Pick::Converged;
        }
        let threshold = total_abs / self.n as f64;
        let mut best = HeapEntry { fluid: 0.0, node: self.n };
        for scans in 0..self.n as u64 {
            let node = self.cursor;
            let f = abs(node);
            if f >= threshold {
                self.cursor = (self.cursor + 1) % self.n;
                return Pick::Node { node, scans };
            }
            if f > best.fluid {
                best = HeapEntry { fluid: f, node };
            }
            self.cursor = (self.cursor + 1) % self.n;
        }
        if best.fluid > 0.0 {
            Pick::Node { node: best.node, scans: self.n as u64 }
        } else {
            Pick::Converged
        }
    }

    pub(crate) fn next_greedy<F>(&mut self, abs: F) -> Pick
    where
        F: Fn(usize) -> f64,
    {
        if !self.primed {
            self.primed = true;
            for node in 0..self.n {
                self.heap.push(HeapEntry { fluid: abs(node), node });
            }
        }
        // Entries are pushed on every fluid change, so the latest value of
        // each node is always present and stale entries can be dropped.
        let mut scans = 0u64;
        loop {
            let Some(top) = self.heap.pop() else {
                return Pick::Converged;
            };
            let current = abs(top.node);
            if current == top.fluid {
                if current <= 0.0 {
                    return Pick::Converged;
                }
                self.maybe_rebuild(&abs);
                return Pick::Node { node: top.node, scans };
            }
            scans += 1;
        }
    }

    /// Caps heap growth: once it holds more than a few entries per node,
    /// rebuild it from the current fluid values.
    fn maybe_rebuild<F>(&mut self, abs: &F)
    where
        F: Fn(usize) -> f64,
    {
        if self.heap.len() > (4 * self.n).max(1024) {
            self.heap.clear();
            for node in 0..self.n {
                let f = abs(node);
                if f > 0.0 {
                    self.heap.push(HeapEntry { fluid: f, node });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn threshold_pick(sched: &mut Scheduler, fluid: &[f64]) -> Pick {
        let total: f64 = fluid.iter().map(|f| f.abs()).sum();
        sched.next_above_threshold(|i| fluid[i].abs(), total)
    }

    #[test]
    fn cyclic_is_fair() {
        let mut s = Scheduler::new(SchedulerKind::Cyclic, 3);
        let picks: Vec<usize> = (0..9).map(|_| s.next_cyclic()).collect();
        assert_eq!(picks, vec![0, 1, 2, 0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn argmax_takes_first_qualifying_node() {
        let mut s = Scheduler::new(SchedulerKind::Argmax, 3);
        // avg = 0.2; node 0 qualifies immediately.
        assert_eq!(
            threshold_pick(&mut s, &[0.4, 0.1, 0.1]),
            Pick::Node { node: 0, scans: 0 }
        );
    }

    #[test]
    fn argmax_skips_below_average_and_counts_scans() {
        let mut s = Scheduler::new(SchedulerKind::Argmax, 3);
        s.cursor = 1;
        // avg = 0.2; node 1 holds 0.15 and is skipped, node 2 qualifies.
        assert_eq!(
            threshold_pick(&mut s, &[0.1, 0.15, 0.35]),
            Pick::Node { node: 2, scans: 1 }
        );
    }

    #[test]
    fn argmax_signals_convergence_on_zero_fluid() {
        let mut s = Scheduler::new(SchedulerKind::Argmax, 3);
        assert_eq!(threshold_pick(&mut s, &[0.0, 0.0, 0.0]), Pick::Converged);
    }

    #[test]
    fn argmax_only_returns_above_average_nodes() {
        let fluid = [0.05, 0.3, 0.1, 0.02, 0.25];
        let total: f64 = fluid.iter().sum();
        let mut s = Scheduler::new(SchedulerKind::Argmax, fluid.len());
        for _ in 0..10 {
            match s.next_above_threshold(|i| fluid[i], total) {
                Pick::Node { node, .. } => {
                    assert!(fluid[node] >= total / fluid.len() as f64)
                }
                Pick::Converged => unreachable!(),
            }
        }
    }

    #[test]
    fn greedy_breaks_ties_by_smallest_id() {
        let fluid = [0.2, 0.2, 0.1];
        let mut s = Scheduler::new(SchedulerKind::Greedy, 3);
        assert_eq!(
            s.next_greedy(|i| fluid[i]),
            Pick::Node { node: 0, scans: 0 }
        );
    }

    #[test]
    fn greedy_tracks_changes_through_observe() {
        let mut fluid = vec![0.3, 0.1, 0.05];
        let mut s = Scheduler::new(SchedulerKind::Greedy, 3);
        assert_eq!(s.next_greedy(|i| fluid[i]), Pick::Node { node: 0, scans: 0 });
        fluid[0] = 0.0;
        fluid[1] = 0.4;
        s.observe(0, 0.0);
        s.observe(1, 0.4);
        assert!(matches!(s.next_greedy(|i| fluid[i]), Pick::Node { node: 1, .. }));
        fluid[1] = 0.0;
        fluid[2] = 0.0;
        s.observe(1, 0.0);
        s.observe(2, 0.0);
        assert_eq!(s.next_greedy(|i| fluid[i]), Pick::Converged);
    }

    #[test]
    fn scheduler_kind_labels_round_trip() {
        for kind in [SchedulerKind::Cyclic, SchedulerKind::Argmax, SchedulerKind::Greedy] {
            assert_eq!(kind.to_string().parse::<SchedulerKind>().unwrap(), kind);
        }
        assert!("fifo".parse::<SchedulerKind>().is_err());
    }
}
