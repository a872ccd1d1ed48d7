//! `dyngraph`: maintain regression solutions and SVDs of graph embeddings
//! across a stream of graph updates.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 when `--verify` finds a
//! step that disagrees with the oracle.

mod bench;
mod engine;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dyngraph::checkpoint::{read_checkpoint, write_checkpoint, EngineState};
use dyngraph::embedding::{EmbeddingKind, PermutationMode};
use dyngraph::graph::{parse_ops, DynamicGraph, OpKind};
use dyngraph::matrix::{parse_vector, Vector};
use dyngraph::svd::DEFAULT_TRUNC_TOL;
use dyngraph::Error;

use crate::engine::{build, Mode, RunConfig, Session};

#[derive(Parser)]
#[command(name = "dyngraph", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the engine state for a graph and print one record.
    Solve(RunArgs),
    /// Build the state, then apply an operation stream, one record per line.
    Stream {
        #[command(flatten)]
        run: RunArgs,
        /// Operation stream (`ei`, `ed`, `wc`, `ni`, `nd` lines).
        #[arg(long)]
        ops: PathBuf,
    },
    /// Solve from scratch with the reference implementation.
    Oracle(RunArgs),
    /// CSV of median incremental vs from-scratch time per operation kind.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Embedding {
    Adjacency,
    Laplacian,
}

#[derive(Clone, Copy, ValueEnum)]
enum Permutation {
    Direct,
    RankOne,
}

#[derive(Args)]
struct EngineArgs {
    /// Defaults to adjacency (or the checkpoint's embedding).
    #[arg(long, value_enum)]
    embedding: Option<Embedding>,
    /// Neighbour bound C enabling Laplacian node operations.
    #[arg(long)]
    degree_bound: Option<usize>,
    /// Defaults to l2 (or the checkpoint's engine).
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Rank cap for --mode svd.
    #[arg(long)]
    rank: Option<usize>,
    /// Singular values at or below this times σ₁ are dropped.
    #[arg(long, default_value_t = DEFAULT_TRUNC_TOL)]
    trunc_tol: f64,
    /// How node deletions reach the pseudoinverse.
    #[arg(long, value_enum, default_value = "direct")]
    permutation: Permutation,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Graph file. Not needed with --checkpoint-in.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Observation vector for l2/l1.
    #[arg(long)]
    b: Option<PathBuf>,
    /// Check every record against the from-scratch oracle.
    #[arg(long)]
    verify: bool,
    /// Relative tolerance for --verify.
    #[arg(long, default_value_t = 1e-8)]
    verify_tol: f64,
    /// Print `null` instead of wall times, for reproducible output.
    #[arg(long)]
    no_timing: bool,
    /// Start from a saved state instead of --graph/--b.
    #[arg(long)]
    checkpoint_in: Option<PathBuf>,
    /// Save the final state.
    #[arg(long)]
    checkpoint_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_delimiter = ',', default_value = "128,256,512")]
    sizes: Vec<usize>,
    /// Operation codes to time.
    #[arg(long, value_delimiter = ',', default_value = "wc")]
    ops: Vec<String>,
    #[arg(long, default_value_t = 20)]
    bench_repeats: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

/// Verification failures are reported through the exit code, not as errors.
struct Outcome {
    failed_checks: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DYNGRAPH_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome { failed_checks: 0 }) => ExitCode::SUCCESS,
        Ok(Outcome { failed_checks }) => {
            eprintln!("error: {failed_checks} record(s) failed verification");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<Outcome> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let outcome = match cmd {
        Command::Solve(args) => stream(&args, None, &mut out)?,
        Command::Stream { run, ops } => stream(&run, Some(&ops), &mut out)?,
        Command::Oracle(args) => oracle(&args, &mut out)?,
        Command::Bench(args) => bench(&args, &mut out)?,
    };
    out.flush()?;
    Ok(outcome)
}

/// Prefixes parse errors with the file they came from.
fn at(path: &Path, e: Error) -> anyhow::Error {
    match e {
        Error::Parse { line, msg } => anyhow!("{}:{line}: {msg}", path.display()),
        other => anyhow!("{}: {other}", path.display()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn run_config(e: &EngineArgs, verify: bool, verify_tol: f64, timing: bool) -> Result<RunConfig> {
    let kind = match (e.embedding.unwrap_or(Embedding::Adjacency), e.degree_bound) {
        (Embedding::Adjacency, Some(_)) => bail!("--degree-bound needs --embedding laplacian"),
        (Embedding::Adjacency, None) => EmbeddingKind::Adjacency,
        (Embedding::Laplacian, degree_bound) => EmbeddingKind::Laplacian { degree_bound },
    };
    let cfg = RunConfig {
        kind,
        mode: e.mode.unwrap_or(Mode::L2),
        rank_cap: e.rank,
        trunc_tol: e.trunc_tol,
        permutation: match e.permutation {
            Permutation::Direct => PermutationMode::Direct,
            Permutation::RankOne => PermutationMode::RankOne,
        },
        verify,
        verify_tol,
        timing,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_inputs(args: &RunArgs) -> Result<(DynamicGraph, Option<Vector>)> {
    let path = args
        .graph
        .as_deref()
        .ok_or_else(|| anyhow!("--graph is required without --checkpoint-in"))?;
    let g = DynamicGraph::parse(&read(path)?).map_err(|e| at(path, e))?;
    let b = match &args.b {
        Some(p) => Some(parse_vector(&read(p)?).map_err(|e| at(p, e))?),
        None => None,
    };
    Ok((g, b))
}

fn open_session(args: &RunArgs) -> Result<(Session, &'static str, Option<u64>)> {
    let mut cfg = run_config(&args.engine, args.verify, args.verify_tol, !args.no_timing)?;
    let start = Instant::now();
    let (state, op) = match &args.checkpoint_in {
        Some(path) => {
            if args.graph.is_some() || args.b.is_some() {
                bail!("--checkpoint-in replaces --graph and --b");
            }
            let state = read_checkpoint(&read(path)?).map_err(|e| at(path, e))?;
            let mode = Mode::of(&state);
            if args.engine.mode.is_some_and(|m| m != mode)
                || (args.engine.embedding.is_some() && state.kind() != cfg.kind)
            {
                bail!(
                    "{}: checkpoint holds a {} state over the {} embedding",
                    path.display(),
                    mode.name(),
                    state.kind()
                );
            }
            cfg.mode = mode;
            cfg.kind = state.kind();
            (state, "restore")
        }
        None => {
            let (g, b) = load_inputs(args)?;
            let what = args.graph.as_deref().expect("checked by load_inputs");
            let state = build(&cfg, g, b).map_err(|e| at(what, e))?;
            (state, "solve")
        }
    };
    let elapsed = start.elapsed().as_nanos() as u64;
    Ok((Session { cfg, state }, op, Some(elapsed)))
}

fn emit(
    session: &Session,
    mut r: dyngraph::record::ResultRecord,
    out: &mut impl Write,
) -> Result<bool> {
    let mut ok = true;
    if session.cfg.verify {
        ok = session.verify()?;
        r.verified = Some(ok);
        if !ok {
            log::error!("step {} (`{}`) disagrees with the oracle", r.step, r.op);
        }
    }
    writeln!(out, "{}", r.to_json_line())?;
    Ok(ok)
}

fn stream(args: &RunArgs, ops: Option<&Path>, out: &mut impl Write) -> Result<Outcome> {
    let ops = match ops {
        Some(p) => Some((p, parse_ops(&read(p)?).map_err(|e| at(p, e))?)),
        None => None,
    };
    let (mut session, op, elapsed) = open_session(args)?;
    let mut failed = 0;
    let mut r = session.record(0, op);
    if session.cfg.timing {
        r.wall_time_ns = elapsed;
    }
    if let EngineState::L1(s) = &session.state {
        r.pivots = Some(s.state().total_pivots());
    }
    failed += usize::from(!emit(&session, r, out)?);
    if let Some((path, lines)) = ops {
        for (k, line) in lines.iter().enumerate() {
            let r = session
                .apply(k + 1, line)
                .map_err(|e| anyhow!("{}:{}: {e}", path.display(), line.line))?;
            failed += usize::from(!emit(&session, r, out)?);
        }
    }
    if let Some(path) = &args.checkpoint_out {
        fs::write(path, write_checkpoint(&session.state))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(Outcome {
        failed_checks: failed,
    })
}

fn oracle(args: &RunArgs, out: &mut impl Write) -> Result<Outcome> {
    if args.checkpoint_in.is_some() || args.checkpoint_out.is_some() || args.verify {
        bail!("the oracle subcommand takes neither checkpoints nor --verify");
    }
    let cfg = run_config(&args.engine, false, args.verify_tol, !args.no_timing)?;
    let (g, b) = load_inputs(args)?;
    let start = Instant::now();
    let what = args.graph.as_deref().expect("checked by load_inputs");
    let mut r = engine::oracle_record(&cfg, &g, b.as_ref()).map_err(|e| at(what, e))?;
    if cfg.timing {
        r.wall_time_ns = Some(start.elapsed().as_nanos() as u64);
    }
    writeln!(out, "{}", r.to_json_line())?;
    Ok(Outcome { failed_checks: 0 })
}

fn bench(args: &BenchArgs, out: &mut impl Write) -> Result<Outcome> {
    let run = run_config(&args.engine, false, 1e-8, true)?;
    let ops = args
        .ops
        .iter()
        .map(|c| OpKind::from_code(c).ok_or_else(|| anyhow!("unknown op code `{c}`")))
        .collect::<Result<Vec<_>>>()?;
    if args.bench_repeats == 0 || args.sizes.contains(&0) {
        bail!("--bench-repeats and --sizes must be positive");
    }
    let cfg = bench::BenchConfig {
        run,
        sizes: args.sizes.clone(),
        ops,
        repeats: args.bench_repeats,
        seed: args.seed,
    };
    bench::run(&cfg, out)?;
    Ok(Outcome { failed_checks: 0 })
}
