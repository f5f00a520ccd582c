//! Convergence benchmarking: a common reference vector, per-round error
//! traces for every solver, and deterministic synthetic graphs.
//!
//! A round is `n` entry updates for the pull solvers and `n` elementary
//! diffusions for the push solvers; argmax scan counts are reported
//! separately and never enter the round accounting. All errors are measured
//! against one completed-semantics reference distribution: pull iterates are
//! normalized to sum one before comparison, diffusion runs report their
//! leak-normalized history (whose certified bound stays comparable), and the
//! OPIC emulation reports its normalized history.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classic::{
    dense_reference_solve, opic, GaussSeidel, PowerIteration, DENSE_ORACLE_MAX_NODES,
};
use crate::config::{RankVector, SolverConfig};
use crate::diteration::di_run;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::schedule::SchedulerKind;
use crate::trace::{ConvergenceTrace, TraceRow};

/// Residual bound to which the push reference is driven.
pub const REFERENCE_BOUND: f64 = 1e-12;

/// Largest graph for which the dense oracle is the cheaper reference.
const DENSE_REFERENCE_CUTOFF: usize = 1000;

/// Benchmarkable algorithms, named as they appear in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Pi,
    Gs,
    OpicCyc,
    OpicArgmax,
    DiCyc,
    DiArgmax,
    DiGreedy,
}

impl Algo {
    pub fn all() -> [Algo; 7] {
        [
            Algo::Pi,
            Algo::Gs,
            Algo::OpicCyc,
            Algo::OpicArgmax,
            Algo::DiCyc,
            Algo::DiArgmax,
            Algo::DiGreedy,
        ]
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Pi => "pi",
            Algo::Gs => "gs",
            Algo::OpicCyc => "opic-cyc",
            Algo::OpicArgmax => "opic-argmax",
            Algo::DiCyc => "di-cyc",
            Algo::DiArgmax => "di-argmax",
            Algo::DiGreedy => "di-greedy",
        })
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Algo> {
        match s {
            "pi" => Ok(Algo::Pi),
            "gs" => Ok(Algo::Gs),
            "opic-cyc" => Ok(Algo::OpicCyc),
            "opic-argmax" => Ok(Algo::OpicArgmax),
            "di-cyc" => Ok(Algo::DiCyc),
            "di-argmax" => Ok(Algo::DiArgmax),
            "di-greedy" => Ok(Algo::DiGreedy),
            other => Err(Error::Config(format!(
                "unknown algorithm label {other:?}; expected one of pi, gs, opic-cyc, opic-argmax, di-cyc, di-argmax, di-greedy"
            ))),
        }
    }
}

/// Computes the reference vector other runs are measured against: the
/// completed-semantics solution, from the dense oracle on small graphs and
/// otherwise from an argmax diffusion run driven to a certified residual
/// bound of [`REFERENCE_BOUND`].
pub fn compute_reference(g: &Graph, cfg: &SolverConfig) -> Result<RankVector> {
    cfg.validate(g.node_count())?;
    if g.node_count() <= DENSE_REFERENCE_CUTOFF.min(DENSE_ORACLE_MAX_NODES) {
        return dense_reference_solve(g, cfg, true);
    }
    let mut ref_cfg = cfg.clone();
    ref_cfg.epsilon = REFERENCE_BOUND;
    let run = di_run(g, &ref_cfg, SchedulerKind::Argmax, None)?;
    if !run.converged {
        return Err(Error::Unconverged(format!(
            "reference run did not reach bound {REFERENCE_BOUND} within {} rounds",
            ref_cfg.max_rounds
        )));
    }
    run.state.normalized_history()
}

fn distribution_distance(estimate: &[f64], reference: &[f64]) -> f64 {
    let sum: f64 = estimate.iter().sum();
    if sum > 0.0 {
        estimate
            .iter()
            .zip(reference)
            .map(|(x, r)| (x / sum - r).abs())
            .sum()
    } else {
        reference.iter().map(|r| r.abs()).sum()
    }
}

/// Runs every requested algorithm on the same graph and configuration,
/// recording one trace row per algorithm per round.
pub fn run_benchmark(
    g: &Graph,
    cfg: &SolverConfig,
    algos: &[Algo],
    reference: &RankVector,
) -> Result<ConvergenceTrace> {
    cfg.validate(g.node_count())?;
    if reference.len() != g.node_count() {
        return Err(Error::Config(format!(
            "reference has {} entries but the graph has {} nodes",
            reference.len(),
            g.node_count()
        )));
    }
    let n = g.node_count() as u64;
    let mut trace = ConvergenceTrace::default();
    for &algo in algos {
        match algo {
            Algo::Pi => {
                let mut kernel = PowerIteration::new(g, cfg)?;
                bench_pull(g, cfg, "pi", &mut trace, n, move |g| {
                    let change = kernel.round(g);
                    (change, distribution_distance(kernel.estimate(), reference.as_slice()))
                });
            }
            Algo::Gs => {
                let mut kernel = GaussSeidel::new(g, cfg)?;
                bench_pull(g, cfg, "gs", &mut trace, n, move |g| {
                    let change = kernel.sweep(g);
                    (change, distribution_distance(kernel.estimate(), reference.as_slice()))
                });
            }
            Algo::OpicCyc => {
                let run = opic(g, cfg, SchedulerKind::Cyclic, Some(reference.as_slice()))?;
                trace.append(run.trace);
            }
            Algo::OpicArgmax => {
                let run = opic(g, cfg, SchedulerKind::Argmax, Some(reference.as_slice()))?;
                trace.append(run.trace);
            }
            Algo::DiCyc => {
                let run = di_run(g, cfg, SchedulerKind::Cyclic, Some(reference.as_slice()))?;
                trace.append(run.trace);
            }
            Algo::DiArgmax => {
                let run = di_run(g, cfg, SchedulerKind::Argmax, Some(reference.as_slice()))?;
                trace.append(run.trace);
            }
            Algo::DiGreedy => {
                let run = di_run(g, cfg, SchedulerKind::Greedy, Some(reference.as_slice()))?;
                trace.append(run.trace);
            }
        }
    }
    Ok(trace)
}

fn bench_pull<F>(
    g: &Graph,
    cfg: &SolverConfig,
    label: &str,
    trace: &mut ConvergenceTrace,
    n: u64,
    mut round_fn: F,
) where
    F: FnMut(&Graph) -> (f64, f64),
{
    for round in 1..=cfg.max_rounds {
        let (change, err) = round_fn(g);
        trace.push(TraceRow {
            algo: label.to_string(),
            round,
            diffusions: round as u64 * n,
            scans: None,
            l1_error: Some(err),
            bound: None,
        });
        if change <= cfg.epsilon {
            break;
        }
    }
}

/// Shape of a synthetic benchmark graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    Cycle,
    /// Directed path `0 -> 1 -> ... -> n-1`; the tail is dangling.
    Chain,
    /// Preferential-attachment digraph with skewed in-degrees and the given
    /// fraction of dangling nodes.
    PowerLaw { dangling_fraction: f64 },
}

impl SyntheticKind {
    /// Default dangling fraction used by the `power-law` label.
    pub const DEFAULT_DANGLING_FRACTION: f64 = 0.1;
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<SyntheticKind> {
        match s {
            "cycle" => Ok(SyntheticKind::Cycle),
            "chain" => Ok(SyntheticKind::Chain),
            "power-law" => Ok(SyntheticKind::PowerLaw {
                dangling_fraction: Self::DEFAULT_DANGLING_FRACTION,
            }),
            other => Err(Error::Config(format!(
                "unknown synthetic graph kind {other:?}; expected cycle, chain or power-law"
            ))),
        }
    }
}

/// Generates a deterministic synthetic graph; identical arguments always
/// produce identical edge structures.
pub fn generate_synthetic(
    kind: SyntheticKind,
    n: usize,
    avg_degree: f64,
    seed: u64,
) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Config("synthetic graphs need at least one node".into()));
    }
    if !(avg_degree >= 0.0) || !avg_degree.is_finite() {
        return Err(Error::Config(format!(
            "average degree must be a non-negative real, got {avg_degree}"
        )));
    }
    match kind {
        SyntheticKind::Cycle => {
            Graph::from_weighted_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)))
        }
        SyntheticKind::Chain => {
            Graph::from_weighted_edges(n, (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)))
        }
        SyntheticKind::PowerLaw { dangling_fraction } => {
            if !(0.0..1.0).contains(&dangling_fraction) {
                return Err(Error::Config(format!(
                    "dangling fraction must lie in [0, 1), got {dangling_fraction}"
                )));
            }
            power_law(n, avg_degree, dangling_fraction, seed)
        }
    }
}

/// Out-degrees are drawn independently (geometric, mean adjusted so the
/// overall average matches); targets are drawn from an urn that re-inserts
/// every endpoint, which skews in-degrees towards early popular nodes.
fn power_law(n: usize, avg_degree: f64, dangling_fraction: f64, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_dangling = ((n as f64 * dangling_fraction).round() as usize).min(n.saturating_sub(1));
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut dangling = vec![false; n];
    for &i in ids.iter().take(n_dangling) {
        dangling[i] = true;
    }

    let sources = n - n_dangling;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    if avg_degree > 0.0 && sources > 0 {
        let mean = (avg_degree * n as f64 / sources as f64).max(1.0);
        // Geometric out-degree with the requested mean, capped defensively.
        let p_more = 1.0 - 1.0 / mean;
        let cap = ((mean * 50.0) as usize).clamp(1, n.max(1));
        let mut urn: Vec<u32> = (0..n as u32).collect();
        for j in 0..n {
            if dangling[j] {
                continue;
            }
            let mut deg = 1usize;
            while deg < cap && rng.gen::<f64>() < p_more {
                deg += 1;
            }
            for _ in 0..deg {
                let t = urn[rng.gen_range(0..urn.len())];
                edges.push((j, t as usize, 1.0));
                urn.push(t);
            }
        }
    }
    // Dangling nodes never appear as sources but do receive edges; every
    // other node holds at least one out-edge when avg_degree > 0.
    Graph::from_weighted_edges(n, edges)
}
