//! Median incremental vs from-scratch wall time per operation kind.

use std::io::Write;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use dyngraph::checkpoint::EngineState;
use dyngraph::embedding::{materialize, EmbeddingKind};
use dyngraph::generate::{random_bounded_graph, random_graph, random_update, UpdateOptions};
use dyngraph::graph::{DynamicGraph, OpKind, OpLine};
use dyngraph::l1::L1State;
use dyngraph::matrix::{DenseMatrix, Vector};
use dyngraph::oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{build, follow_update, Mode, RunConfig, Session};

pub const HEADER: &str = "mode,embedding,n,op,repeats,incremental_ns,scratch_ns,ratio";

/// Average degree of the generated graphs.
const AVG_DEGREE: f64 = 8.0;

pub struct BenchConfig {
    pub run: RunConfig,
    pub sizes: Vec<usize>,
    pub ops: Vec<OpKind>,
    pub repeats: usize,
    pub seed: u64,
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

fn base_graph(rng: &mut ChaCha8Rng, kind: EmbeddingKind, n: usize) -> DynamicGraph {
    let p = (AVG_DEGREE / n as f64).min(1.0);
    match kind {
        EmbeddingKind::Adjacency => random_graph(rng, n, true, p, false, true),
        EmbeddingKind::Laplacian {
            degree_bound: Some(c),
        } => random_bounded_graph(rng, n, c, p, false),
        EmbeddingKind::Laplacian { degree_bound: None } => {
            random_graph(rng, n, false, p, false, false)
        }
    }
}

fn scratch(mode: Mode, cfg: &RunConfig, m: DenseMatrix, b: Vector) -> Result<()> {
    match mode {
        Mode::L2 => {
            let p = oracle::oracle_pinv(&m)?;
            std::hint::black_box(p * b);
        }
        Mode::L1 => {
            std::hint::black_box(L1State::solve(m, b)?);
        }
        Mode::Svd => {
            let cap = cfg.rank_cap.unwrap_or(usize::MAX);
            std::hint::black_box(oracle::oracle_truncated_svd(&m, cap, cfg.trunc_tol)?);
        }
    }
    Ok(())
}

pub fn run(cfg: &BenchConfig, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    let kind = cfg.run.kind;
    for &n in &cfg.sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (n as u64).rotate_left(32));
        let g = base_graph(&mut rng, kind, n);
        let b = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let base = Session {
            // timing is read from the records, which time the update alone
            cfg: RunConfig {
                timing: true,
                ..cfg.run.clone()
            },
            state: build(&cfg.run, g, Some(b))?,
        };
        for &op in &cfg.ops {
            let opts = UpdateOptions::new(&[op]);
            let mut inc = Vec::with_capacity(cfg.repeats);
            let mut scr = Vec::with_capacity(cfg.repeats);
            for r in 0..cfg.repeats {
                let Some(u) = random_update(&mut rng, base.state.graph(), kind, &opts) else {
                    log::warn!("n={n}: no feasible `{}` update", op.code());
                    break;
                };
                let line = OpLine {
                    line: r + 1,
                    update: u,
                    observation: Some(rng.random_range(-1.0..1.0)),
                };
                let mut s = Session {
                    cfg: base.cfg.clone(),
                    state: base.state.clone(),
                };
                let rec = s.apply(r + 1, &line)?;
                inc.push(Duration::from_nanos(rec.wall_time_ns.unwrap_or_default()));
                if rec.rebuilt == Some(true) {
                    log::warn!("n={n}: `{}` fell back to a rebuild", op.code());
                }

                let mut g = base.state.graph().clone();
                let tr = g.apply_update(&line.update)?;
                let b = match base.b() {
                    Some(b) => follow_update(b, &line.update, tr, line.observation)?,
                    None => Vector::zeros(0),
                };
                let m = materialize(&g, kind)?;
                let t = Instant::now();
                scratch(cfg.run.mode, &cfg.run, m, b)?;
                scr.push(t.elapsed());
            }
            if inc.is_empty() {
                continue;
            }
            let (i, s) = (median(inc.clone()), median(scr));
            writeln!(
                out,
                "{},{},{n},{},{},{},{},{:.6}",
                cfg.run.mode.name(),
                kind_label(kind),
                op.code(),
                inc.len(),
                i.as_nanos(),
                s.as_nanos(),
                i.as_secs_f64() / s.as_secs_f64()
            )?;
            out.flush().context("writing benchmark row")?;
        }
        if let EngineState::Svd(s) = &base.state {
            log::info!("n={n}: base rank {}", s.svd().rank());
        }
    }
    Ok(())
}

fn kind_label(kind: EmbeddingKind) -> String {
    match kind {
        EmbeddingKind::Laplacian {
            degree_bound: Some(c),
        } => format!("laplacian-{c}"),
        other => other.to_string(),
    }
}
