//! Baseline solvers for `x = d·P·x + (1−d)·Z`: Power Iteration, Gauss-Seidel,
//! a damped OPIC emulation, and a dense direct solver used as a desk-scale
//! oracle.
//!
//! Power Iteration and Gauss-Seidel solve the system for the original
//! (possibly substochastic) matrix; their limit is not a distribution when
//! the graph has dangling nodes. The OPIC emulation runs the push scheme on
//! the stochastic matrix `d·P + (1−d)/n·1 + completion`, so its normalized
//! history estimates the dangling-completed solution.

use nalgebra::{DMatrix, DVector};

use crate::config::{l1_distance, RankVector, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::schedule::{Pick, Scheduler, SchedulerKind};
use crate::trace::{ConvergenceTrace, TraceRow};

/// Node-count guard for the dense oracle.
pub const DENSE_ORACLE_MAX_NODES: usize = 5000;

/// Result of one solver run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub ranks: RankVector,
    pub trace: ConvergenceTrace,
    /// False when the round budget ran out before the stopping tolerance.
    pub converged: bool,
}

/// Power Iteration kernel: repeated full sparse products, two vectors.
#[derive(Debug, Clone)]
pub struct PowerIteration {
    x: Vec<f64>,
    next: Vec<f64>,
    damping: f64,
    zap: Vec<f64>,
}

impl PowerIteration {
    pub fn new(g: &Graph, cfg: &SolverConfig) -> Result<PowerIteration> {
        cfg.validate(g.node_count())?;
        Ok(PowerIteration {
            x: cfg.zap.clone(),
            next: vec![0.0; g.node_count()],
            damping: cfg.damping,
            zap: cfg.zap.clone(),
        })
    }

    pub fn estimate(&self) -> &[f64] {
        &self.x
    }

    /// One full product `x <- d·P·x + (1−d)·Z`; returns the L1 change.
    pub fn round(&mut self, g: &Graph) -> f64 {
        let d = self.damping;
        for (i, v) in self.next.iter_mut().enumerate() {
            *v = (1.0 - d) * self.zap[i];
        }
        for j in 0..g.node_count() {
            let xj = self.x[j];
            if xj != 0.0 {
                for &(t, p) in g.column(j) {
                    self.next[t as usize] += d * p * xj;
                }
            }
        }
        let change = l1_distance(&self.x, &self.next);
        std::mem::swap(&mut self.x, &mut self.next);
        change
    }
}

/// Runs Power Iteration from `x0 = Z` until the L1 change of a round drops
/// to `cfg.epsilon` or the budget runs out. When a reference vector is
/// supplied, the trace records the raw L1 distance of each iterate to it.
pub fn power_iteration(
    g: &Graph,
    cfg: &SolverConfig,
    reference: Option<&[f64]>,
) -> Result<RunOutcome> {
    let mut kernel = PowerIteration::new(g, cfg)?;
    drive_pull(g, cfg, reference, "pi", move |g| {
        let change = kernel.round(g);
        (change, kernel.estimate().to_vec())
    })
}

/// Gauss-Seidel kernel: in-place ascending sweeps pulling from in-edges.
/// Entries below the current index are already updated, the rest (including
/// a self-loop entry) still hold the previous sweep's values.
#[derive(Debug, Clone)]
pub struct GaussSeidel {
    x: Vec<f64>,
    damping: f64,
    zap: Vec<f64>,
}

impl GaussSeidel {
    pub fn new(g: &Graph, cfg: &SolverConfig) -> Result<GaussSeidel> {
        Self::with_start(g, cfg, None)
    }

    /// Starts the sweeps from an explicit vector instead of `Z`.
    pub fn with_start(g: &Graph, cfg: &SolverConfig, x0: Option<&[f64]>) -> Result<GaussSeidel> {
        cfg.validate(g.node_count())?;
        let x = match x0 {
            Some(v) if v.len() != g.node_count() => {
                return Err(Error::Config(format!(
                    "starting vector has {} entries, graph has {}",
                    v.len(),
                    g.node_count()
                )));
            }
            Some(v) => v.to_vec(),
            None => cfg.zap.clone(),
        };
        Ok(GaussSeidel {
            x,
            damping: cfg.damping,
            zap: cfg.zap.clone(),
        })
    }

    pub fn estimate(&self) -> &[f64] {
        &self.x
    }

    /// One full ascending sweep; returns the L1 change.
    pub fn sweep(&mut self, g: &Graph) -> f64 {
        let rows = g.in_edges();
        let d = self.damping;
        let mut change = 0.0;
        for i in 0..g.node_count() {
            let mut acc = 0.0;
            for &(j, p) in rows.row(i) {
                acc += p * self.x[j as usize];
            }
            let new = d * acc + (1.0 - d) * self.zap[i];
            change += (new - self.x[i]).abs();
            self.x[i] = new;
        }
        change
    }
}

/// Runs Gauss-Seidel sweeps from `x0 = Z` with the same stopping rule and
/// trace conventions as [`power_iteration`].
pub fn gauss_seidel(
    g: &Graph,
    cfg: &SolverConfig,
    reference: Option<&[f64]>,
) -> Result<RunOutcome> {
    let mut kernel = GaussSeidel::new(g, cfg)?;
    drive_pull(g, cfg, reference, "gs", move |g| {
        let change = kernel.sweep(g);
        (change, kernel.estimate().to_vec())
    })
}

fn drive_pull<F>(
    g: &Graph,
    cfg: &SolverConfig,
    reference: Option<&[f64]>,
    label: &str,
    mut round_fn: F,
) -> Result<RunOutcome>
where
    F: FnMut(&Graph) -> (f64, Vec<f64>),
{
    let n = g.node_count() as u64;
    let mut trace = ConvergenceTrace::default();
    let mut converged = false;
    let mut ranks = Vec::new();
    for round in 1..=cfg.max_rounds {
        let (change, estimate) = round_fn(g);
        trace.push(TraceRow {
            algo: label.to_string(),
            round,
            diffusions: round as u64 * n,
            scans: None,
            l1_error: reference.map(|r| l1_distance(&estimate, r)),
            bound: None,
        });
        ranks = estimate;
        if change <= cfg.epsilon {
            converged = true;
            break;
        }
    }
    Ok(RunOutcome {
        ranks: RankVector::new(ranks),
        trace,
        converged,
    })
}

/// Fluid/history state of the damped OPIC emulation.
///
/// The emulated matrix adds `(1−d)/n` from every node to every node (and
/// `1/n` from dangling nodes), which would make each literal diffusion cost
/// `O(n)`. The uniform part is therefore factored into a single scalar pool:
/// `pool` is all mass ever paid into the uniform share and `claimed[i]`
/// remembers how much of the pool node `i` had already collected when it
/// last diffused, so its pending share is `(pool − claimed[i]) / n`.
#[derive(Debug, Clone)]
pub struct OpicState {
    fluid: Vec<f64>,
    history: Vec<f64>,
    pool: f64,
    claimed: Vec<f64>,
    damping: f64,
}

impl OpicState {
    /// Uniform initial fluid of total mass one, empty history.
    pub fn new(g: &Graph, cfg: &SolverConfig) -> Result<OpicState> {
        cfg.validate(g.node_count())?;
        let n = g.node_count();
        require_uniform(&cfg.zap)?;
        Ok(OpicState {
            fluid: vec![1.0 / n as f64; n],
            history: vec![0.0; n],
            pool: 0.0,
            claimed: vec![0.0; n],
            damping: cfg.damping,
        })
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    /// Fluid node `i` would diffuse right now: its explicit fluid plus its
    /// uncollected share of the uniform pool.
    pub fn effective_fluid(&self, i: usize) -> f64 {
        self.fluid[i] + (self.pool - self.claimed[i]) / self.fluid.len() as f64
    }

    /// Sum of all effective fluid; constant over time up to rounding.
    pub fn total_effective_fluid(&self) -> f64 {
        let n = self.fluid.len() as f64;
        let claimed: f64 = self.claimed.iter().sum();
        self.fluid.iter().sum::<f64>() + self.pool - claimed / n
    }

    /// Diffuses node `i`: credits its effective fluid to its history, pushes
    /// the damped share along out-edges and pays the rest into the pool.
    /// Dangling nodes pay everything into the pool.
    pub fn diffuse(&mut self, g: &Graph, i: usize) {
        let f = self.effective_fluid(i);
        self.history[i] += f;
        self.fluid[i] = 0.0;
        self.claimed[i] = self.pool;
        if g.is_dangling(i) {
            self.pool += f;
        } else {
            let d = self.damping;
            for &(t, p) in g.column(i) {
                self.fluid[t as usize] += d * f * p;
            }
            self.pool += (1.0 - d) * f;
        }
    }

    /// History scaled to sum one.
    pub fn normalized_history(&self) -> RankVector {
        RankVector::new(self.history.clone()).normalized()
    }
}

fn require_uniform(zap: &[f64]) -> Result<()> {
    let n = zap.len() as f64;
    let uniform = 1.0 / n;
    if zap.iter().any(|&z| (z - uniform).abs() > 1e-12) {
        return Err(Error::Config(
            "opic requires the uniform default distribution".into(),
        ));
    }
    Ok(())
}

/// Runs the OPIC emulation for the full round budget (it has no residual
/// stopping rule) and returns the normalized history. Supported schedulers
/// are `cyc` and `argmax`; the argmax threshold is the constant average
/// fluid, since the total never changes.
pub fn opic(
    g: &Graph,
    cfg: &SolverConfig,
    kind: SchedulerKind,
    reference: Option<&[f64]>,
) -> Result<RunOutcome> {
    if kind == SchedulerKind::Greedy {
        return Err(Error::Config(
            "the greedy scheduler is not supported for opic".into(),
        ));
    }
    let mut state = OpicState::new(g, cfg)?;
    let n = g.node_count();
    let label = format!("opic-{kind}");
    let mut sched = Scheduler::new(kind, n);
    let total = state.total_effective_fluid();
    let mut trace = ConvergenceTrace::default();
    let mut scans_total = 0u64;
    for round in 1..=cfg.max_rounds {
        for _ in 0..n {
            let pick = match kind {
                SchedulerKind::Cyclic => Pick::Node { node: sched.next_cyclic(), scans: 0 },
                _ => sched.next_above_threshold(|i| state.effective_fluid(i).max(0.0), total),
            };
            match pick {
                Pick::Node { node, scans } => {
                    scans_total += scans;
                    state.diffuse(g, node);
                }
                Pick::Converged => break,
            }
        }
        let normalized = state.normalized_history();
        trace.push(TraceRow {
            algo: label.clone(),
            round,
            diffusions: round as u64 * n as u64,
            scans: Some(scans_total),
            l1_error: reference.map(|r| normalized.l1_distance(r)),
            bound: None,
        });
    }
    Ok(RunOutcome {
        ranks: state.normalized_history(),
        trace,
        converged: true,
    })
}

/// Solves `(I − d·P)·x = (1−d)·Z` by dense LU with partial pivoting.
/// With `completed` set, dangling columns of `P` are first replaced by `Z`,
/// which makes the matrix stochastic and the solution a distribution.
/// Refuses graphs above [`DENSE_ORACLE_MAX_NODES`]; this is a verification
/// oracle, not a production path.
pub fn dense_reference_solve(g: &Graph, cfg: &SolverConfig, completed: bool) -> Result<RankVector> {
    let n = g.node_count();
    cfg.validate(n)?;
    if n > DENSE_ORACLE_MAX_NODES {
        return Err(Error::Unsupported(format!(
            "dense reference solver handles at most {DENSE_ORACLE_MAX_NODES} nodes, got {n}"
        )));
    }
    let d = cfg.damping;
    let mut a = DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        if g.is_dangling(j) {
            if completed {
                for i in 0..n {
                    a[(i, j)] -= d * cfg.zap[i];
                }
            }
        } else {
            for &(t, p) in g.column(j) {
                a[(t as usize, j)] -= d * p;
            }
        }
    }
    let b = DVector::from_iterator(n, cfg.zap.iter().map(|z| (1.0 - d) * z));
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Internal("singular PageRank system".into()))?;
    Ok(RankVector::new(x.iter().copied().collect()))
}
