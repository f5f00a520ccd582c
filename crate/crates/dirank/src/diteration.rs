//! The push-based damped-diffusion PageRank engine (D-Iteration).
//!
//! The engine keeps two vectors. The *fluid* `F` starts as `(1−d)·Z` and is
//! the mass not yet absorbed into the result; the *history* `H` starts at
//! zero and accumulates absorbed mass. Diffusing node `i` credits its fluid
//! to `H(i)`, clears it, and pushes a damped share `d·f·p` along every
//! out-edge. For any fair diffusion order, `H` converges to the solution of
//! `x = d·P·x + (1−d)·Z`, and the current fluid certifies the distance to
//! the limit:
//!
//! - on any graph, `|x − H|₁ ≤ |F|₁ / (1−d)`;
//! - fluid diffused at a dangling node leaves the system; its running total
//!   `l` (the *leak*) both tightens the certificate to
//!   `|F|₁ / (1−d − d·l)` and yields, via the factor
//!   `(1−d) / (1−d − d·l)`, the history rescaling whose limit is the
//!   solution for the dangling-completed (stochastic) matrix.
//!
//! When the graph changes from `P` to `P'`, [`DiState::apply_update`]
//! injects `d·(P'−P)·H` into the fluid and keeps the history, after which
//! resuming the diffusion converges to the solution for `P'`. The injection
//! may drive fluid entries negative; schedulers and certificates operate on
//! magnitudes, which keeps the distance bound valid for signed fluid.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use crate::config::{RankVector, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::schedule::{Pick, Scheduler, SchedulerKind};
use crate::trace::{ConvergenceTrace, TraceRow};

/// Guard on the corrected-bound denominator `1−d−d·l`.
const DENOMINATOR_GUARD: f64 = 1e-15;

const STATE_FILE_HEADER: &str = "DI-STATE v1";

/// Mutable state of one diffusion run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiState {
    fluid: Vec<f64>,
    history: Vec<f64>,
    /// Cumulative fluid consumed at dangling nodes. Equal to the history
    /// mass sitting on currently-dangling nodes; graph updates re-base it
    /// against the new dangling set.
    leak: f64,
    /// Elementary diffusions performed.
    k: u64,
    /// Maintained value of `Σ|F(i)|`, refreshed from scratch every `n`
    /// diffusions to cap floating-point drift.
    f_abs: f64,
    damping: f64,
    /// Default distribution recorded at initialization. Only used to form
    /// the initial fluid; kept for inspection and re-based on update.
    zap: Vec<f64>,
    /// Extra multiplicative normalization carried by the state file format.
    norm_factor: f64,
}

impl DiState {
    /// Fresh state: `F = (1−d)·Z`, `H = 0`.
    pub fn new(g: &Graph, cfg: &SolverConfig) -> Result<DiState> {
        cfg.validate(g.node_count())?;
        let fluid: Vec<f64> = cfg.zap.iter().map(|z| (1.0 - cfg.damping) * z).collect();
        let f_abs = fluid.iter().map(|f| f.abs()).sum();
        Ok(DiState {
            fluid,
            history: vec![0.0; g.node_count()],
            leak: 0.0,
            k: 0,
            f_abs,
            damping: cfg.damping,
            zap: cfg.zap.clone(),
            norm_factor: 1.0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.fluid.len()
    }

    pub fn fluid(&self) -> &[f64] {
        &self.fluid
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    /// Elementary diffusions performed so far, across updates.
    pub fn diffusion_count(&self) -> u64 {
        self.k
    }

    /// Maintained `Σ|F(i)|`.
    pub fn fluid_magnitude(&self) -> f64 {
        self.f_abs
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn zap(&self) -> &[f64] {
        &self.zap
    }

    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    /// One elementary diffusion of node `i`: credit the fluid to the
    /// history, clear it, push `d·f·p` along each out-edge (a self-loop
    /// leaves `d·f·p` in place), and account dangling fluid as leak.
    /// Diffusing a zero-fluid node is a counted no-op.
    pub fn diffuse(&mut self, g: &Graph, i: usize) {
        debug_assert_eq!(g.node_count(), self.fluid.len());
        let f = self.fluid[i];
        self.history[i] += f;
        self.fluid[i] = 0.0;
        self.f_abs -= f.abs();
        if g.is_dangling(i) {
            self.leak += f;
        } else {
            let d = self.damping;
            for &(t, p) in g.column(i) {
                let t = t as usize;
                let old = self.fluid[t];
                let new = old + d * f * p;
                self.fluid[t] = new;
                self.f_abs += new.abs() - old.abs();
            }
        }
        if self.f_abs < 0.0 {
            self.f_abs = 0.0;
        }
        self.k += 1;
        if self.k % self.fluid.len() as u64 == 0 {
            self.refresh_fluid_magnitude();
        }
    }

    /// Recomputes `Σ|F(i)|` from scratch.
    pub fn refresh_fluid_magnitude(&mut self) {
        self.f_abs = self.fluid.iter().map(|f| f.abs()).sum();
    }

    /// `1−d−d·l` when it is usable. In a plain run it equals
    /// `(1−d)·ΣH + ΣF` and cannot be negative; after an update the injected
    /// positive and negative fluid may reach dangling nodes in a different
    /// order, which can push it below zero for a while. No completed-matrix
    /// certificate exists during such a transient.
    fn usable_denominator(&self) -> Option<f64> {
        let denom = 1.0 - self.damping - self.damping * self.leak;
        (denom > DENOMINATOR_GUARD).then_some(denom)
    }

    fn corrected_denominator(&self) -> Result<f64> {
        self.usable_denominator().ok_or_else(|| {
            Error::Internal(format!(
                "leak-corrected denominator {} is not positive; the state cannot \
                 certify a completed-matrix result right now",
                1.0 - self.damping - self.damping * self.leak
            ))
        })
    }

    /// Upper bound on the L1 distance between the completed-matrix solution
    /// and [`DiState::normalized_history`]: `|F|₁ / (1−d−d·l)`.
    pub fn residual_bound(&self) -> Result<f64> {
        Ok(self.norm_factor * self.f_abs / self.corrected_denominator()?)
    }

    /// The factor applied by [`DiState::normalized_history`].
    pub fn normalization_factor(&self) -> Result<f64> {
        Ok(self.norm_factor * (1.0 - self.damping) / self.corrected_denominator()?)
    }

    /// History rescaled by `(1−d)/(1−d−d·l)`; converges to the solution for
    /// the matrix whose dangling columns are completed with `Z`.
    pub fn normalized_history(&self) -> Result<RankVector> {
        let factor = self.normalization_factor()?;
        Ok(RankVector::new(
            self.history.iter().map(|h| h * factor).collect(),
        ))
    }

    /// Re-bases the state after the graph changed from `g_old` to `g_new`,
    /// keeping the history and injecting `d·(P'−P)·H` into the fluid; only
    /// the listed changed columns are touched. When `g_new` has more nodes,
    /// the state vectors are zero-padded. Resuming the diffusion on `g_new`
    /// afterwards converges to the solution for the new graph.
    pub fn apply_update(
        &mut self,
        g_old: &Graph,
        g_new: &Graph,
        changed: &BTreeSet<usize>,
    ) -> Result<()> {
        let n_old = g_old.node_count();
        let n_new = g_new.node_count();
        if self.fluid.len() != n_old {
            return Err(Error::Update(format!(
                "state covers {} nodes but the old graph has {n_old}",
                self.fluid.len()
            )));
        }
        if n_new < n_old {
            return Err(Error::Update(format!(
                "the new graph has {n_new} nodes, fewer than the old {n_old}"
            )));
        }
        if let Some(&j) = changed.iter().next_back() {
            if j >= n_new {
                return Err(Error::Update(format!(
                    "changed column {j} is out of range for {n_new} nodes"
                )));
            }
        }
        for j in 0..n_new {
            if changed.contains(&j) {
                continue;
            }
            let same = if j < n_old {
                g_old.column(j) == g_new.column(j)
            } else {
                g_new.is_dangling(j)
            };
            if !same {
                return Err(Error::Update(format!(
                    "column {j} differs between the graphs but is not in the changed set"
                )));
            }
        }
        if changed.is_empty() && n_new == n_old {
            return Ok(());
        }

        self.fluid.resize(n_new, 0.0);
        self.history.resize(n_new, 0.0);
        self.zap.resize(n_new, 0.0);
        let d = self.damping;
        for &j in changed {
            let h = self.history[j];
            if h == 0.0 {
                continue;
            }
            if j < n_old {
                for &(t, p) in g_old.column(j) {
                    self.fluid[t as usize] -= d * h * p;
                }
            }
            for &(t, p) in g_new.column(j) {
                self.fluid[t as usize] += d * h * p;
            }
        }
        self.refresh_fluid_magnitude();
        // The leak must describe the new dangling structure: in a plain run
        // it always equals the history mass on dangling nodes, so recompute
        // it against g_new. This keeps the corrected bound and the history
        // normalization exact across updates.
        self.leak = (0..n_new)
            .filter(|&j| g_new.is_dangling(j))
            .map(|j| self.history[j])
            .sum();
        Ok(())
    }

    /// Writes the state in the line-oriented text format. Reals carry 17
    /// significant digits, enough to reproduce every binary64 value exactly.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{STATE_FILE_HEADER}")?;
        writeln!(
            w,
            "{} {:.16e} {} {:.16e} {:.16e}",
            self.fluid.len(),
            self.damping,
            self.k,
            self.leak,
            self.norm_factor
        )?;
        for (h, f) in self.history.iter().zip(&self.fluid) {
            writeln!(w, "{h:.16e} {f:.16e}")?;
        }
        Ok(())
    }

    /// Reads a state produced by [`DiState::save`]. The file does not record
    /// the default distribution (it only matters at initialization), so the
    /// loaded state carries the uniform one.
    pub fn load<R: BufRead>(reader: R) -> Result<DiState> {
        let mut lines = reader.lines().enumerate();
        let header = next_line(&mut lines)?;
        if header.1.trim_end() != STATE_FILE_HEADER {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected {STATE_FILE_HEADER:?} header"),
            });
        }
        let (lineno, meta) = next_line(&mut lines)?;
        let toks: Vec<&str> = meta.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 'n d k l norm_factor', got {} tokens", toks.len()),
            });
        }
        let n: usize = parse_tok(toks[0], lineno)?;
        let damping: f64 = parse_tok(toks[1], lineno)?;
        let k: u64 = parse_tok(toks[2], lineno)?;
        let leak: f64 = parse_tok(toks[3], lineno)?;
        let norm_factor: f64 = parse_tok(toks[4], lineno)?;
        if !(damping > 0.0 && damping < 1.0) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("damping {damping} outside (0, 1)"),
            });
        }
        let mut history = Vec::with_capacity(n);
        let mut fluid = Vec::with_capacity(n);
        for _ in 0..n {
            let (lineno, line) = next_line(&mut lines)?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 'H F', got {} tokens", toks.len()),
                });
            }
            history.push(parse_tok::<f64>(toks[0], lineno)?);
            fluid.push(parse_tok::<f64>(toks[1], lineno)?);
        }
        let f_abs = fluid.iter().map(|f: &f64| f.abs()).sum();
        Ok(DiState {
            fluid,
            history,
            leak,
            k,
            f_abs,
            damping,
            zap: vec![1.0 / n as f64; n.max(1)],
            norm_factor,
        })
    }
}

fn next_line<I>(lines: &mut I) -> Result<(usize, String)>
where
    I: Iterator<Item = (usize, std::io::Result<String>)>,
{
    match lines.next() {
        Some((idx, line)) => Ok((idx + 1, line?)),
        None => Err(Error::Parse {
            line: 0,
            msg: "unexpected end of state file".into(),
        }),
    }
}

fn parse_tok<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid value {tok:?}"),
    })
}

/// Result of a diffusion run.
#[derive(Debug, Clone)]
pub struct DiRun {
    pub state: DiState,
    pub trace: ConvergenceTrace,
    /// True when the residual bound reached the tolerance within budget.
    pub converged: bool,
}

/// Asks the scheduler for a node and diffuses it, keeping the scheduler's
/// view of the touched fluids current.
pub fn advance(state: &mut DiState, g: &Graph, sched: &mut Scheduler) -> Pick {
    let pick = sched.next(state);
    if let Pick::Node { node, .. } = pick {
        state.diffuse(g, node);
        for &(t, _) in g.column(node) {
            let t = t as usize;
            sched.observe(t, state.fluid[t].abs());
        }
    }
    pick
}

fn drive(
    state: &mut DiState,
    g: &Graph,
    sched: &mut Scheduler,
    epsilon: f64,
    max_rounds: usize,
    reference: Option<&[f64]>,
    label: &str,
) -> Result<(ConvergenceTrace, bool)> {
    let n = g.node_count();
    let k_start = state.diffusion_count();
    let mut trace = ConvergenceTrace::default();
    let mut scans_total = 0u64;
    let mut converged = false;
    let certified_bound =
        |st: &DiState| st.usable_denominator().map(|den| st.norm_factor * st.f_abs / den);
    'run: for round in 1..=max_rounds {
        for _ in 0..n {
            if certified_bound(state).is_some_and(|b| b <= epsilon) {
                converged = true;
                break 'run;
            }
            match advance(state, g, sched) {
                Pick::Node { scans, .. } => scans_total += scans,
                Pick::Converged => {
                    converged = true;
                    break 'run;
                }
            }
        }
        // During a post-update transient without a usable denominator the
        // row carries neither a bound nor an error.
        let bound = certified_bound(state);
        let l1_error = match (reference, bound) {
            (Some(r), Some(_)) => {
                let factor = state.normalization_factor()?;
                Some(
                    state
                        .history
                        .iter()
                        .zip(r)
                        .map(|(h, x)| (h * factor - x).abs())
                        .sum(),
                )
            }
            _ => None,
        };
        trace.push(TraceRow {
            algo: label.to_string(),
            round,
            diffusions: state.diffusion_count() - k_start,
            scans: Some(scans_total),
            l1_error,
            bound,
        });
    }
    if !converged {
        converged = certified_bound(state).is_some_and(|b| b <= epsilon);
    }
    Ok((trace, converged))
}

/// Runs a fresh diffusion until the residual bound reaches `cfg.epsilon` or
/// the budget of `cfg.max_rounds · n` diffusions runs out. The trace records
/// one row per round of `n` diffusions; when a (completed-semantics)
/// reference is supplied, the error column compares the normalized history
/// against it.
pub fn di_run(
    g: &Graph,
    cfg: &SolverConfig,
    kind: SchedulerKind,
    reference: Option<&[f64]>,
) -> Result<DiRun> {
    let mut state = DiState::new(g, cfg)?;
    let mut sched = Scheduler::new(kind, g.node_count());
    let label = format!("di-{kind}");
    let (trace, converged) = drive(
        &mut state,
        g,
        &mut sched,
        cfg.epsilon,
        cfg.max_rounds,
        reference,
        &label,
    )?;
    Ok(DiRun { state, trace, converged })
}

/// Resumes a diffusion from an existing state (typically after
/// [`DiState::apply_update`]) with a fresh round budget.
pub fn di_resume(
    state: &mut DiState,
    g: &Graph,
    epsilon: f64,
    max_rounds: usize,
    kind: SchedulerKind,
    reference: Option<&[f64]>,
) -> Result<(ConvergenceTrace, bool)> {
    if state.node_count() != g.node_count() {
        return Err(Error::Update(format!(
            "state covers {} nodes but the graph has {}",
            state.node_count(),
            g.node_count()
        )));
    }
    if !(epsilon > 0.0) || max_rounds == 0 {
        return Err(Error::Config(
            "resume needs a positive epsilon and a non-zero round budget".into(),
        ));
    }
    let mut sched = Scheduler::new(kind, g.node_count());
    let label = format!("di-{kind}");
    drive(state, g, &mut sched, epsilon, max_rounds, reference, &label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic::dense_reference_solve;
    use crate::graph::{load_edge_list, GraphDelta};
    use std::io::Cursor;

    fn graph(text: &str) -> Graph {
        load_edge_list(Cursor::new(text), 0).unwrap()
    }

    fn single_dangling() -> Graph {
        load_edge_list(Cursor::new(""), 1).unwrap()
    }

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (i, (g, w)) in got.iter().zip(want).enumerate() {
            assert!((g - w).abs() <= tol, "entry {i}: got {g}, want {w}");
        }
    }

    /// Largest entrywise defect of `H + F = F0 + d·P·H`.
    fn conservation_defect(state: &DiState, g: &Graph, f0: &[f64]) -> f64 {
        let n = g.node_count();
        let mut rhs = f0.to_vec();
        for j in 0..n {
            let h = state.history()[j];
            if h != 0.0 {
                for &(t, p) in g.transitions(j).unwrap() {
                    rhs[t as usize] += state.damping() * p * h;
                }
            }
        }
        (0..n)
            .map(|i| (state.history()[i] + state.fluid()[i] - rhs[i]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn init_sets_damped_zap_fluid() {
        let g = graph("0 1\n1 0\n");
        let cfg = SolverConfig::uniform(2);
        let st = DiState::new(&g, &cfg).unwrap();
        assert_close(st.fluid(), &[0.075, 0.075], 1e-15);
        assert_close(st.history(), &[0.0, 0.0], 0.0);
        assert_eq!(st.diffusion_count(), 0);
        assert!((st.fluid_magnitude() - 0.15).abs() <= 1e-15);
    }

    #[test]
    fn init_single_node() {
        let g = single_dangling();
        let mut cfg = SolverConfig::uniform(1);
        cfg.zap = vec![1.0];
        let st = DiState::new(&g, &cfg).unwrap();
        assert_close(st.fluid(), &[0.15], 1e-15);
    }

    #[test]
    fn diffuse_splits_fluid_over_out_edges() {
        let g = graph("0 1\n0 2\n");
        let cfg = SolverConfig::uniform(3);
        let mut st = DiState::new(&g, &cfg).unwrap();
        st.fluid = vec![0.2, 0.0, 0.1];
        st.refresh_fluid_magnitude();
        st.diffuse(&g, 0);
        assert_close(st.history(), &[0.2, 0.0, 0.0], 1e-15);
        assert_close(st.fluid(), &[0.0, 0.085, 0.185], 1e-15);
        assert_eq!(st.diffusion_count(), 1);
    }

    #[test]
    fn diffuse_dangling_node_moves_fluid_to_leak() {
        let g = single_dangling();
        let mut cfg = SolverConfig::uniform(1);
        cfg.zap = vec![1.0];
        let mut st = DiState::new(&g, &cfg).unwrap();
        st.diffuse(&g, 0);
        assert_close(st.history(), &[0.15], 1e-15);
        assert_close(st.fluid(), &[0.0], 0.0);
        assert!((st.leak() - 0.15).abs() <= 1e-15);
    }

    #[test]
    fn diffuse_keeps_self_loop_share() {
        let g = graph("0 0\n");
        let mut cfg = SolverConfig::uniform(1);
        cfg.zap = vec![1.0];
        let mut st = DiState::new(&g, &cfg).unwrap();
        st.diffuse(&g, 0);
        assert_close(st.history(), &[0.15], 1e-15);
        assert_close(st.fluid(), &[0.85 * 0.15], 1e-15);
    }

    #[test]
    fn three_chain_cyclic_run_is_exact_after_one_round() {
        let g = graph("0 1\n1 2\n");
        let cfg = SolverConfig::uniform(3);
        let run = di_run(&g, &cfg, SchedulerKind::Cyclic, None).unwrap();
        assert!(run.converged);
        assert_eq!(run.state.diffusion_count(), 3);
        assert_close(run.state.history(), &[0.05, 0.0925, 0.128625], 1e-15);
        assert_close(run.state.fluid(), &[0.0, 0.0, 0.0], 0.0);
        assert!((run.state.leak() - 0.128625).abs() <= 1e-15);
        assert_eq!(run.state.residual_bound().unwrap(), 0.0);
    }

    #[test]
    fn two_cycle_first_round_bound_equals_true_error() {
        let g = graph("0 1\n1 0\n");
        let mut cfg = SolverConfig::uniform(2);
        cfg.max_rounds = 1;
        cfg.epsilon = 1e-30;
        let reference = [0.5, 0.5];
        let run = di_run(&g, &cfg, SchedulerKind::Cyclic, Some(&reference)).unwrap();
        assert_close(run.state.history(), &[0.075, 0.13875], 1e-15);
        assert!((run.state.fluid_magnitude() - 0.1179375).abs() <= 1e-15);
        let row = &run.trace.rows[0];
        assert!((row.bound.unwrap() - 0.78625).abs() <= 1e-12);
        // The completed matrix is stochastic here, so bound and error agree.
        assert!((row.l1_error.unwrap() - 0.78625).abs() <= 1e-12);
    }

    #[test]
    fn single_dangling_run_normalizes_to_one() {
        let g = single_dangling();
        let mut cfg = SolverConfig::uniform(1);
        cfg.zap = vec![1.0];
        let run = di_run(&g, &cfg, SchedulerKind::Cyclic, None).unwrap();
        assert!(run.converged);
        assert_eq!(run.state.diffusion_count(), 1);
        assert_eq!(run.state.residual_bound().unwrap(), 0.0);
        let normalized = run.state.normalized_history().unwrap();
        assert_close(normalized.as_slice(), &[1.0], 1e-12);
        let oracle = dense_reference_solve(&g, &cfg, true).unwrap();
        assert_close(normalized.as_slice(), oracle.as_slice(), 1e-12);
    }

    #[test]
    fn residual_bound_formula() {
        let g = graph("0 1\n1 0\n");
        let cfg = SolverConfig::uniform(2);
        let mut st = DiState::new(&g, &cfg).unwrap();
        st.fluid = vec![0.1179375, 0.0];
        st.refresh_fluid_magnitude();
        assert!((st.residual_bound().unwrap() - 0.78625).abs() <= 1e-15);
        st.fluid = vec![0.0, 0.0];
        st.refresh_fluid_magnitude();
        st.leak = 0.1;
        assert_eq!(st.residual_bound().unwrap(), 0.0);
        st.fluid = vec![0.1, 0.0];
        st.refresh_fluid_magnitude();
        st.leak = 0.05;
        assert!((st.residual_bound().unwrap() - 0.1 / 0.1075).abs() <= 1e-15);
    }

    #[test]
    fn residual_bound_guards_corrupted_leak() {
        let g = graph("0 1\n1 0\n");
        let cfg = SolverConfig::uniform(2);
        let mut st = DiState::new(&g, &cfg).unwrap();
        st.leak = 1.0;
        assert!(matches!(st.residual_bound(), Err(Error::Internal(_))));
    }

    #[test]
    fn normalized_history_factor_and_sum() {
        let g = graph("0 1\n1 2\n");
        let cfg = SolverConfig::uniform(3);
        let run = di_run(&g, &cfg, SchedulerKind::Cyclic, None).unwrap();
        let factor = run.state.normalization_factor().unwrap();
        // (1-d) / (1-d - d*l) with l = 0.128625.
        assert!((factor - 0.15 / 0.04066875).abs() <= 1e-12);
        assert!((factor - 3.68834).abs() <= 1e-4);
        let normalized = run.state.normalized_history().unwrap();
        assert!((normalized.sum() - 1.0).abs() <= 1e-9);
        // No leak means no rescaling.
        let g2 = graph("0 1\n1 0\n");
        let cfg2 = SolverConfig::uniform(2);
        let run2 = di_run(&g2, &cfg2, SchedulerKind::Cyclic, None).unwrap();
        assert_eq!(run2.state.normalization_factor().unwrap(), 1.0);
    }

    #[test]
    fn conservation_holds_along_a_cyclic_run() {
        let g = graph("0 1 2.0\n0 2\n1 2\n2 0\n3 1\n");
        let cfg = SolverConfig::uniform(4);
        let mut st = DiState::new(&g, &cfg).unwrap();
        let f0 = st.fluid().to_vec();
        let tol = 1e-12 * (1.0 + 0.15);
        for step in 0..40 {
            st.diffuse(&g, step % 4);
            assert!(conservation_defect(&st, &g, &f0) <= tol, "step {step}");
        }
    }

    #[test]
    fn update_with_zero_history_matches_fresh_state() {
        let g_old = graph("0 1\n1 0\n");
        let delta = GraphDelta {
            additions: vec![(0, 0, 1.0)],
            removals: vec![(0, 1)],
        };
        let (g_new, changed) = g_old.apply_delta(&delta).unwrap();
        let cfg = SolverConfig::uniform(2);
        let mut st = DiState::new(&g_old, &cfg).unwrap();
        st.apply_update(&g_old, &g_new, &changed).unwrap();
        let fresh = DiState::new(&g_new, &cfg).unwrap();
        assert_eq!(st, fresh);
    }

    #[test]
    fn update_injects_column_difference() {
        // Column 0 redirects from node 1 to node 2; with H(0) = 0.2 the
        // injected fluid is d·H(0)·(e2 − e1) = 0.17·(e2 − e1).
        let g_old = Graph::from_weighted_edges(3, [(0, 1, 1.0)]).unwrap();
        let delta = GraphDelta {
            additions: vec![(0, 2, 1.0)],
            removals: vec![(0, 1)],
        };
        let (g_new, changed) = g_old.apply_delta(&delta).unwrap();
        let cfg = SolverConfig::uniform(3);
        let mut st = DiState::new(&g_old, &cfg).unwrap();
        st.history = vec![0.2, 0.0, 0.0];
        st.fluid = vec![0.0, 0.01, 0.0];
        st.refresh_fluid_magnitude();
        st.apply_update(&g_old, &g_new, &changed).unwrap();
        assert_close(st.fluid(), &[0.0, 0.01 - 0.17, 0.17], 1e-15);
        assert_close(st.history(), &[0.2, 0.0, 0.0], 0.0);
    }

    #[test]
    fn update_rejects_unlisted_changed_column() {
        let g_old = graph("0 1\n1 0\n");
        let delta = GraphDelta {
            additions: vec![(1, 1, 1.0)],
            removals: vec![],
        };
        let (g_new, _) = g_old.apply_delta(&delta).unwrap();
        let cfg = SolverConfig::uniform(2);
        let mut st = DiState::new(&g_old, &cfg).unwrap();
        let wrong: BTreeSet<usize> = BTreeSet::new();
        assert!(matches!(
            st.apply_update(&g_old, &g_new, &wrong),
            Err(Error::Update(_))
        ));
    }

    #[test]
    fn update_then_resume_matches_fresh_run_and_oracle() {
        let g_old = graph("0 1\n0 2\n1 2\n2 3\n3 0\n4 0\n4 2\n");
        let delta = GraphDelta {
            additions: vec![(1, 3, 2.0), (2, 0, 1.0)],
            removals: vec![(0, 2)],
        };
        let (g_new, changed) = g_old.apply_delta(&delta).unwrap();
        let mut cfg = SolverConfig::uniform(5);
        cfg.epsilon = 1e-6;
        cfg.max_rounds = 100_000;

        let mut run = di_run(&g_old, &cfg, SchedulerKind::Argmax, None).unwrap();
        assert!(run.converged);
        run.state.apply_update(&g_old, &g_new, &changed).unwrap();
        let (_, resumed_ok) =
            di_resume(&mut run.state, &g_new, 1e-12, 100_000, SchedulerKind::Argmax, None).unwrap();
        assert!(resumed_ok);

        let mut fresh_cfg = cfg.clone();
        fresh_cfg.epsilon = 1e-12;
        let fresh = di_run(&g_new, &fresh_cfg, SchedulerKind::Argmax, None).unwrap();
        assert!(fresh.converged);

        let resumed_n = run.state.normalized_history().unwrap();
        let fresh_n = fresh.state.normalized_history().unwrap();
        assert!(resumed_n.l1_distance(fresh_n.as_slice()) <= 2e-12);
        let oracle = dense_reference_solve(&g_new, &fresh_cfg, true).unwrap();
        assert!(resumed_n.l1_distance(oracle.as_slice()) <= 1e-8);
    }

    #[test]
    fn update_conservation_rebases_cleanly() {
        // After an update the invariant H + F = F0' + d·P'·H must hold with
        // F0' read off right after the injection.
        let g_old = graph("0 1\n1 2\n2 0\n3 1\n");
        let delta = GraphDelta {
            additions: vec![(0, 3, 1.0)],
            removals: vec![(3, 1)],
        };
        let (g_new, changed) = g_old.apply_delta(&delta).unwrap();
        let mut cfg = SolverConfig::uniform(4);
        cfg.max_rounds = 3;
        cfg.epsilon = 1e-30;
        let mut run = di_run(&g_old, &cfg, SchedulerKind::Cyclic, None).unwrap();
        run.state.apply_update(&g_old, &g_new, &changed).unwrap();
        let f0: Vec<f64> = (0..4)
            .map(|i| {
                let mut v = run.state.history()[i] + run.state.fluid()[i];
                for j in 0..4 {
                    let h = run.state.history()[j];
                    for &(t, p) in g_new.transitions(j).unwrap() {
                        if t as usize == i {
                            v -= run.state.damping() * p * h;
                        }
                    }
                }
                v
            })
            .collect();
        let mut sched = Scheduler::new(SchedulerKind::Cyclic, 4);
        for _ in 0..40 {
            advance(&mut run.state, &g_new, &mut sched);
            assert!(conservation_defect(&run.state, &g_new, &f0) <= 1e-12 * 2.0);
        }
    }

    #[test]
    fn state_file_round_trips_bit_exactly() {
        let g = graph("0 1 3.0\n1 2\n2 0 0.125\n");
        let mut cfg = SolverConfig::uniform(3);
        cfg.max_rounds = 2;
        cfg.epsilon = 1e-30;
        let run = di_run(&g, &cfg, SchedulerKind::Argmax, None).unwrap();
        let mut buf = Vec::new();
        run.state.save(&mut buf).unwrap();
        let loaded = DiState::load(Cursor::new(&buf)).unwrap();
        assert_eq!(loaded.diffusion_count(), run.state.diffusion_count());
        assert_eq!(loaded.damping().to_bits(), run.state.damping().to_bits());
        assert_eq!(loaded.leak().to_bits(), run.state.leak().to_bits());
        assert_eq!(loaded.norm_factor().to_bits(), run.state.norm_factor().to_bits());
        for i in 0..3 {
            assert_eq!(loaded.history()[i].to_bits(), run.state.history()[i].to_bits());
            assert_eq!(loaded.fluid()[i].to_bits(), run.state.fluid()[i].to_bits());
        }
    }

    #[test]
    fn state_file_rejects_garbage() {
        assert!(DiState::load(Cursor::new("nope\n")).is_err());
        assert!(DiState::load(Cursor::new("DI-STATE v1\n2 0.85 0\n")).is_err());
        assert!(DiState::load(Cursor::new("DI-STATE v1\n2 0.85 0 0.0 1.0\n1 2\n")).is_err());
    }

    #[test]
    fn history_is_non_decreasing_and_fluid_non_negative() {
        let g = graph("0 1\n1 2\n2 0\n2 1\n3 2\n");
        let cfg = SolverConfig::uniform(4);
        let mut st = DiState::new(&g, &cfg).unwrap();
        let mut sched = Scheduler::new(SchedulerKind::Greedy, 4);
        let mut prev = st.history().to_vec();
        let mut prev_mag = st.fluid_magnitude();
        for _ in 0..60 {
            if advance(&mut st, &g, &mut sched) == Pick::Converged {
                break;
            }
            for (a, b) in prev.iter().zip(st.history()) {
                assert!(b >= a);
            }
            for &f in st.fluid() {
                assert!(f >= -1e-15);
            }
            assert!(st.fluid_magnitude() <= prev_mag + 1e-15);
            prev = st.history().to_vec();
            prev_mag = st.fluid_magnitude();
        }
    }

    #[test]
    fn schedulers_agree_on_the_limit() {
        let g = graph("0 1 2.0\n0 3\n1 2\n2 0\n3 2\n3 4\n4 1\n");
        let mut cfg = SolverConfig::uniform(5);
        cfg.epsilon = 1e-10;
        cfg.max_rounds = 100_000;
        let runs: Vec<RankVector> = [SchedulerKind::Cyclic, SchedulerKind::Argmax, SchedulerKind::Greedy]
            .into_iter()
            .map(|kind| {
                let run = di_run(&g, &cfg, kind, None).unwrap();
                assert!(run.converged);
                run.state.normalized_history().unwrap()
            })
            .collect();
        for a in &runs {
            for b in &runs {
                assert!(a.l1_distance(b.as_slice()) <= 2e-10);
            }
        }
    }
}
