#![forbid(unsafe_code)]

//! Push-based PageRank solvers and a convergence benchmark harness.
//!
//! `dirank` computes the PageRank vector `x = d·P·x + (1−d)·Z` of a directed
//! weighted graph. The core engine is D-Iteration, a damped fluid-diffusion
//! scheme: every node holds residual fluid, and diffusing a node absorbs its
//! fluid into a history vector while pushing a damped share along its
//! out-edges. The remaining fluid certifies the distance to the fixed point,
//! dangling-node leaks are folded into a normalization that recovers the
//! stochastic-completed solution, and a converged state can absorb graph
//! edits and resume instead of restarting.
//!
//! The crate also ships the classic baselines (Power Iteration, Gauss-Seidel
//! and a damped OPIC emulation), a dense direct solver for desk-scale
//! verification, and a benchmark harness that measures per-round convergence
//! of all solvers against a common reference. The `dirank` binary exposes
//! `solve`, `bench` and `update` over plain text files.

pub mod bench;
pub mod classic;
pub mod cli;
pub mod config;
pub mod diteration;
pub mod error;
pub mod graph;
pub mod schedule;
pub mod trace;

pub use bench::{compute_reference, generate_synthetic, run_benchmark, Algo, SyntheticKind};
pub use classic::{
    dense_reference_solve, gauss_seidel, opic, power_iteration, GaussSeidel, OpicState,
    PowerIteration, RunOutcome,
};
pub use config::{RankVector, SolverConfig};
pub use diteration::{advance, di_resume, di_run, DiRun, DiState};
pub use error::{Error, Result};
pub use graph::{load_edge_list, parse_delta, Graph, GraphDelta, InEdges};
pub use schedule::{Pick, Scheduler, SchedulerKind};
pub use trace::{ConvergenceTrace, TraceRow};
