//! Command-line front end: `solve`, `bench` and `update` over files.
//!
//! Exit codes: 0 on convergence, 2 when the round budget ran out before the
//! tolerance, 1 on any input error.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{compute_reference, generate_synthetic, run_benchmark, Algo, SyntheticKind};
use crate::classic::{gauss_seidel, opic, power_iteration};
use crate::config::{validate_distribution, RankVector, SolverConfig, DEFAULT_DAMPING, DEFAULT_EPSILON, DEFAULT_MAX_ROUNDS};
use crate::diteration::{di_resume, di_run, DiState};
use crate::graph::{load_edge_list, parse_delta, Graph};
use crate::schedule::SchedulerKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_BUDGET_EXHAUSTED: i32 = 2;

#[derive(Parser)]
#[command(
    name = "dirank",
    version,
    about = "PageRank solvers with a resumable push-based diffusion engine"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a rank vector for one graph with one solver.
    Solve(SolveArgs),
    /// Run several solvers against a common reference and emit a CSV trace.
    Bench(BenchArgs),
    /// Apply a graph delta to a saved diffusion state and resume it.
    Update(UpdateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveAlgo {
    Pi,
    Gs,
    Opic,
    Di,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchedulerArg {
    Cyc,
    Argmax,
    Greedy,
}

impl From<SchedulerArg> for SchedulerKind {
    fn from(s: SchedulerArg) -> SchedulerKind {
        match s {
            SchedulerArg::Cyc => SchedulerKind::Cyclic,
            SchedulerArg::Argmax => SchedulerKind::Argmax,
            SchedulerArg::Greedy => SchedulerKind::Greedy,
        }
    }
}

#[derive(Parser, Debug)]
struct SolveArgs {
    /// Edge-list file: one "src dst [weight]" per line.
    #[arg(long)]
    graph: PathBuf,
    /// Treat the graph as having at least this many nodes; ids never named
    /// in the file become dangling nodes.
    #[arg(long, default_value_t = 0)]
    min_nodes: usize,
    /// Solver to run.
    #[arg(long, value_enum)]
    algo: SolveAlgo,
    /// Diffusion order for opic and di.
    #[arg(long, value_enum, default_value_t = SchedulerArg::Argmax)]
    scheduler: SchedulerArg,
    #[arg(long, default_value_t = DEFAULT_DAMPING)]
    damping: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
    max_rounds: usize,
    /// Zap (default-distribution) file: one "node_id weight" per line;
    /// unlisted nodes get 0. Must sum to 1.
    #[arg(long)]
    zap: Option<PathBuf>,
    /// Rescale the output so it sums to one. For di this applies the
    /// leak normalization, yielding the dangling-completed solution.
    #[arg(long)]
    normalize: bool,
    /// Write the final diffusion state (di only); consumed by `update`.
    #[arg(long)]
    save_state: Option<PathBuf>,
    /// Output file: one "node_id value" line per node.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Parser, Debug)]
struct BenchArgs {
    /// Edge-list file; mutually exclusive with --synthetic.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Comma-separated algorithm labels, e.g. "pi,gs,di-argmax".
    #[arg(long)]
    algos: String,
    #[arg(long, default_value_t = DEFAULT_DAMPING)]
    damping: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
    max_rounds: usize,
    /// CSV trace output file.
    #[arg(long)]
    trace: PathBuf,
    /// Generate the input instead: "kind,n,avg_degree,seed" with kind one of
    /// cycle, chain, power-law.
    #[arg(long)]
    synthetic: Option<String>,
}

#[derive(Parser, Debug)]
struct UpdateArgs {
    /// Diffusion state produced by `solve --algo di --save-state`.
    #[arg(long)]
    state: PathBuf,
    /// The graph the state was computed on.
    #[arg(long)]
    graph: PathBuf,
    /// Delta file: "+ src dst [weight]" and "- src dst" lines.
    #[arg(long)]
    delta: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Output file for the resumed (normalized) rank vector.
    #[arg(long)]
    output: PathBuf,
    /// Write the post-resume state for further updates.
    #[arg(long)]
    save_state: Option<PathBuf>,
}

/// Parses `argv` and runs the requested command, returning the process exit
/// status. The first element of `argv` is the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version output are not errors.
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                EXIT_OK
            } else {
                EXIT_INPUT_ERROR
            };
        }
    };
    let result = match cli.cmd {
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Update(args) => cmd_update(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_INPUT_ERROR
        }
    }
}

type CmdResult = Result<i32, String>;

fn open_reader(path: &Path) -> Result<BufReader<File>, String> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>, String> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn load_graph(path: &Path, min_nodes: usize) -> Result<Graph, String> {
    let reader = open_reader(path)?;
    load_edge_list(reader, min_nodes).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_zap(path: &Path, n: usize) -> Result<Vec<f64>, String> {
    let name = path.display().to_string();
    let reader = open_reader(path)?;
    let mut zap = vec![0.0; n];
    let mut listed = vec![false; n];
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| format!("{name}: {e}"))?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(format!("{name}: line {lineno}: expected 'node_id weight'"));
        }
        let node: usize = toks[0]
            .parse()
            .map_err(|_| format!("{name}: line {lineno}: invalid node id {:?}", toks[0]))?;
        if node >= n {
            return Err(format!(
                "{name}: line {lineno}: node {node} out of range for {n} nodes"
            ));
        }
        if listed[node] {
            return Err(format!("{name}: line {lineno}: node {node} listed twice"));
        }
        let w: f64 = toks[1]
            .parse()
            .map_err(|_| format!("{name}: line {lineno}: invalid weight {:?}", toks[1]))?;
        zap[node] = w;
        listed[node] = true;
    }
    validate_distribution(&zap, 1e-9).map_err(|e| format!("{name}: {e}"))?;
    Ok(zap)
}

fn write_ranks(path: &Path, values: &[f64]) -> Result<(), String> {
    let mut w = create_writer(path)?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i} {v:.11e}").map_err(|e| format!("{}: {e}", path.display()))?;
    }
    w.flush().map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_solve(args: SolveArgs) -> CmdResult {
    let graph = load_graph(&args.graph, args.min_nodes)?;
    let n = graph.node_count();
    let mut cfg = SolverConfig::uniform(n);
    cfg.damping = args.damping;
    cfg.epsilon = args.epsilon;
    cfg.max_rounds = args.max_rounds;
    if let Some(zap_path) = &args.zap {
        cfg.zap = load_zap(zap_path, n)?;
    }
    cfg.validate(n).map_err(|e| e.to_string())?;
    if args.save_state.is_some() && args.algo != SolveAlgo::Di {
        return Err("--save-state is only available with --algo di".into());
    }

    let kind: SchedulerKind = args.scheduler.into();
    let (values, converged) = match args.algo {
        SolveAlgo::Pi => {
            let out = power_iteration(&graph, &cfg, None).map_err(|e| e.to_string())?;
            (finish_pull(out.ranks, args.normalize), out.converged)
        }
        SolveAlgo::Gs => {
            let out = gauss_seidel(&graph, &cfg, None).map_err(|e| e.to_string())?;
            (finish_pull(out.ranks, args.normalize), out.converged)
        }
        SolveAlgo::Opic => {
            let out = opic(&graph, &cfg, kind, None).map_err(|e| e.to_string())?;
            (out.ranks, out.converged)
        }
        SolveAlgo::Di => {
            let run = di_run(&graph, &cfg, kind, None).map_err(|e| e.to_string())?;
            let values = if args.normalize {
                run.state.normalized_history().map_err(|e| e.to_string())?
            } else {
                RankVector::new(run.state.history().to_vec())
            };
            if let Some(state_path) = &args.save_state {
                let mut w = create_writer(state_path)?;
                run.state
                    .save(&mut w)
                    .and_then(|_| w.flush().map_err(Into::into))
                    .map_err(|e| format!("{}: {e}", state_path.display()))?;
            }
            (values, run.converged)
        }
    };
    write_ranks(&args.output, values.as_slice())?;
    Ok(if converged { EXIT_OK } else { EXIT_BUDGET_EXHAUSTED })
}

fn finish_pull(ranks: RankVector, normalize: bool) -> RankVector {
    if normalize {
        ranks.normalized()
    } else {
        ranks
    }
}

fn parse_synthetic_spec(spec: &str) -> Result<Graph, String> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 4 {
        return Err(format!(
            "--synthetic expects 'kind,n,avg_degree,seed', got {spec:?}"
        ));
    }
    let kind: SyntheticKind = parts[0]
        .trim()
        .parse()
        .map_err(|e: crate::error::Error| e.to_string())?;
    let n: usize = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("invalid node count {:?}", parts[1]))?;
    let deg: f64 = parts[2]
        .trim()
        .parse()
        .map_err(|_| format!("invalid average degree {:?}", parts[2]))?;
    let seed: u64 = parts[3]
        .trim()
        .parse()
        .map_err(|_| format!("invalid seed {:?}", parts[3]))?;
    generate_synthetic(kind, n, deg, seed).map_err(|e| e.to_string())
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let graph = match (&args.graph, &args.synthetic) {
        (Some(_), Some(_)) => {
            return Err("--graph and --synthetic are mutually exclusive".into());
        }
        (Some(path), None) => load_graph(path, 0)?,
        (None, Some(spec)) => parse_synthetic_spec(spec)?,
        (None, None) => return Err("one of --graph or --synthetic is required".into()),
    };
    let mut algos = Vec::new();
    for label in args.algos.split(',') {
        let label = label.trim();
        if label.is_empty() {
            continue;
        }
        algos.push(label.parse::<Algo>().map_err(|e| e.to_string())?);
    }
    if algos.is_empty() {
        return Err("--algos names no algorithms".into());
    }
    let mut cfg = SolverConfig::uniform(graph.node_count());
    cfg.damping = args.damping;
    cfg.epsilon = args.epsilon;
    cfg.max_rounds = args.max_rounds;
    cfg.validate(graph.node_count()).map_err(|e| e.to_string())?;

    let reference = compute_reference(&graph, &cfg).map_err(|e| e.to_string())?;
    let trace = run_benchmark(&graph, &cfg, &algos, &reference).map_err(|e| e.to_string())?;
    let mut w = create_writer(&args.trace)?;
    trace
        .write_csv(&mut w)
        .and_then(|_| w.flush().map_err(Into::into))
        .map_err(|e| format!("{}: {e}", args.trace.display()))?;
    Ok(EXIT_OK)
}

fn cmd_update(args: UpdateArgs) -> CmdResult {
    let state_reader = open_reader(&args.state)?;
    let mut state =
        DiState::load(state_reader).map_err(|e| format!("{}: {e}", args.state.display()))?;
    let g_old = load_graph(&args.graph, state.node_count())?;
    if state.node_count() != g_old.node_count() {
        return Err(format!(
            "{}: state covers {} nodes but {} has {}",
            args.state.display(),
            state.node_count(),
            args.graph.display(),
            g_old.node_count()
        ));
    }
    let delta_reader = open_reader(&args.delta)?;
    let delta = parse_delta(delta_reader).map_err(|e| format!("{}: {e}", args.delta.display()))?;
    let (g_new, changed) = g_old
        .apply_delta(&delta)
        .map_err(|e| format!("{}: {e}", args.delta.display()))?;
    state
        .apply_update(&g_old, &g_new, &changed)
        .map_err(|e| e.to_string())?;
    let (_, converged) = di_resume(
        &mut state,
        &g_new,
        args.epsilon,
        DEFAULT_MAX_ROUNDS,
        SchedulerKind::Argmax,
        None,
    )
    .map_err(|e| e.to_string())?;

    let normalized = state.normalized_history().map_err(|e| e.to_string())?;
    write_ranks(&args.output, normalized.as_slice())?;
    if let Some(state_path) = &args.save_state {
        let mut w = create_writer(state_path)?;
        state
            .save(&mut w)
            .and_then(|_| w.flush().map_err(Into::into))
            .map_err(|e| format!("{}: {e}", state_path.display()))?;
    }
    Ok(if converged { EXIT_OK } else { EXIT_BUDGET_EXHAUSTED })
}
