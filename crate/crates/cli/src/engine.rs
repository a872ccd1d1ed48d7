//! One engine state plus the bookkeeping the CLI needs around it: building,
//! applying stream lines, scratch fallback, records and oracle checks.

use std::time::Instant;

use anyhow::{bail, Result};
use dyngraph::checkpoint::EngineState;
use dyngraph::embedding::{materialize, EmbeddingKind, PermutationMode};
use dyngraph::graph::{DynamicGraph, GraphUpdate, OpLine, Transposition};
use dyngraph::l1::GraphL1;
use dyngraph::l2::L2State;
use dyngraph::matrix::{DenseMatrix, Vector};
use dyngraph::oracle;
use dyngraph::record::ResultRecord;
use dyngraph::svd::{GraphSvd, SvdState};
use dyngraph::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    L2,
    L1,
    Svd,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::L2 => "l2",
            Mode::L1 => "l1",
            Mode::Svd => "svd",
        }
    }

    pub fn of(state: &EngineState) -> Mode {
        match state {
            EngineState::L2(_) => Mode::L2,
            EngineState::L1(_) => Mode::L1,
            EngineState::Svd(_) => Mode::Svd,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: EmbeddingKind,
    pub mode: Mode,
    pub rank_cap: Option<usize>,
    pub trunc_tol: f64,
    pub permutation: PermutationMode,
    pub verify: bool,
    pub verify_tol: f64,
    pub timing: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank_cap.is_some() && self.mode != Mode::Svd {
            bail!("--rank only applies to --mode svd");
        }
        if self.rank_cap == Some(0) {
            bail!("--rank must be positive");
        }
        if let EmbeddingKind::Laplacian {
            degree_bound: Some(0),
        } = self.kind
        {
            bail!("--degree-bound must be positive");
        }
        if !(self.trunc_tol >= 0.0 && self.verify_tol > 0.0) {
            bail!("tolerances must be positive");
        }
        Ok(())
    }
}

pub fn build(
    cfg: &RunConfig,
    graph: DynamicGraph,
    b: Option<Vector>,
) -> dyngraph::Result<EngineState> {
    let need_b = || {
        b.clone().ok_or_else(|| {
            Error::UnsupportedOperation(format!(
                "--mode {} needs an observation vector (--b)",
                cfg.mode.name()
            ))
        })
    };
    Ok(match cfg.mode {
        Mode::L2 => EngineState::L2(
            L2State::new(graph, cfg.kind, need_b()?)?.with_permutation_mode(cfg.permutation),
        ),
        Mode::L1 => EngineState::L1(GraphL1::new(graph, cfg.kind, need_b()?)?),
        Mode::Svd => {
            let m = materialize(&graph, cfg.kind)?;
            let svd = SvdState::with_tolerance(&m, cfg.rank_cap, cfg.trunc_tol)?;
            EngineState::Svd(GraphSvd::from_parts(graph, cfg.kind, svd)?)
        }
    })
}

/// Carries `b` through a graph update the way the engines do: permute with
/// the transposition, drop the last entry on deletion, append on insertion.
pub fn follow_update(
    b: &Vector,
    u: &GraphUpdate,
    transposition: Option<Transposition>,
    observation: Option<f64>,
) -> dyngraph::Result<Vector> {
    let mut out = b.clone();
    if let Some(t) = transposition {
        t.permute_slice(out.as_mut_slice());
    }
    match u {
        GraphUpdate::NodeDelete { .. } => {
            let last = out.len() - 1;
            out = out.remove_row(last);
        }
        GraphUpdate::NodeInsert { .. } => {
            let v = observation.ok_or(Error::MissingObservation)?;
            let len = out.len();
            out = out.insert_row(len, v);
        }
        _ => {}
    }
    Ok(out)
}

pub struct Session {
    pub cfg: RunConfig,
    pub state: EngineState,
}

impl Session {
    pub fn b(&self) -> Option<&Vector> {
        match &self.state {
            EngineState::L2(s) => Some(s.b()),
            EngineState::L1(s) => Some(s.state().b()),
            EngineState::Svd(_) => None,
        }
    }

    fn matrix(&self) -> DenseMatrix {
        match &self.state {
            EngineState::L2(s) => s.matrix().clone(),
            EngineState::L1(s) => s.state().matrix().clone(),
            EngineState::Svd(s) => {
                materialize(s.graph(), s.kind()).expect("maintained graph embeds")
            }
        }
    }

    /// Applies one stream line. Operations the engine cannot absorb
    /// incrementally (unsupported kind, degree bound exceeded) rebuild the
    /// engine from the updated graph instead.
    pub fn apply(&mut self, step: usize, op: &OpLine) -> dyngraph::Result<ResultRecord> {
        let u = &op.update;
        let start = Instant::now();
        let mut pivots = None;
        let attempt = match &mut self.state {
            EngineState::L2(s) => s.update(u, op.observation).map(|o| o.pairs_applied),
            EngineState::L1(s) => s.update(u).map(|(pairs, p)| {
                pivots = Some(p);
                pairs
            }),
            EngineState::Svd(s) => s.update(u),
        };
        let (pairs, rebuilt) = match attempt {
            Ok(pairs) => (pairs, false),
            Err(e @ (Error::IncompatibleEmbedding(_) | Error::UnsupportedOperation(_))) => {
                log::warn!("line {}: {e}; rebuilding from scratch", op.line);
                self.rebuild(u, op.observation)?;
                (0, true)
            }
            Err(e) => return Err(e),
        };
        let elapsed = start.elapsed();
        let mut r = self.record(step, u.kind().code());
        r.pairs_applied = pairs;
        if pivots.is_some() {
            r.pivots = pivots;
        }
        if rebuilt {
            r.rebuilt = Some(true);
        }
        if self.cfg.timing {
            r.wall_time_ns = Some(elapsed.as_nanos() as u64);
        }
        Ok(r)
    }

    fn rebuild(&mut self, u: &GraphUpdate, observation: Option<f64>) -> dyngraph::Result<()> {
        let mut g = self.state.graph().clone();
        let t = g.apply_update(u)?;
        let b = match self.b() {
            Some(b) => Some(follow_update(b, u, t, observation)?),
            None => None,
        };
        self.state = build(&self.cfg, g, b)?;
        Ok(())
    }

    /// Record of the current state, without timing or verification.
    pub fn record(&self, step: usize, op: &str) -> ResultRecord {
        let mut r = ResultRecord::new(step, op, Mode::of(&self.state).name());
        match &self.state {
            EngineState::L2(s) => {
                (r.n, r.m) = s.matrix().shape();
                r.residual = s.residual();
                r.x_norm = Some(s.x().norm());
                r.x = Some(s.x().as_slice().to_vec());
            }
            EngineState::L1(s) => {
                let st = s.state();
                (r.n, r.m) = st.matrix().shape();
                r.residual = st.residual_l1();
                r.x_norm = Some(st.x().norm());
                r.x = Some(st.x().as_slice().to_vec());
                r.pivots = Some(st.last_pivots());
            }
            EngineState::Svd(s) => {
                let m = self.matrix();
                (r.n, r.m) = m.shape();
                r.residual = (s.svd().low_rank_approx() - &m).norm();
                r.rank = Some(s.svd().rank());
                r.sigma = Some(s.svd().sigma().as_slice().to_vec());
            }
        }
        r
    }

    /// Checks the current state against the from-scratch oracle.
    pub fn verify(&self) -> dyngraph::Result<bool> {
        let tol = self.cfg.verify_tol;
        let m = self.matrix();
        Ok(match &self.state {
            EngineState::L2(s) => {
                let x = oracle::oracle_lstsq(&m, s.b())?;
                let best = (&m * &x - s.b()).norm();
                (s.x() - &x).norm() <= tol * (1.0 + x.norm())
                    && s.residual() <= best + tol * (1.0 + s.b().norm())
            }
            EngineState::L1(s) => {
                let st = s.state();
                let (_, best) = oracle::oracle_l1(&m, st.b())?;
                (st.objective() - best).abs() <= tol * (1.0 + best.abs())
                    && st.certificate().passes(st.objective(), tol)
            }
            EngineState::Svd(s) => {
                let svd = s.svd();
                let o = oracle::oracle_truncated_svd(
                    &m,
                    svd.rank_cap().unwrap_or(usize::MAX),
                    svd.trunc_tol(),
                )?;
                let scale = 1.0 + m.norm();
                let best = (o.reconstruct() - &m).norm();
                let err = (svd.low_rank_approx() - &m).norm();
                o.sigma.len() == svd.rank()
                    && (svd.sigma() - &o.sigma).amax() <= tol * scale
                    && (err - best).abs() <= tol * scale
            }
        })
    }
}

/// One-shot from-scratch solve of the same problem.
pub fn oracle_record(
    cfg: &RunConfig,
    graph: &DynamicGraph,
    b: Option<&Vector>,
) -> dyngraph::Result<ResultRecord> {
    let m = materialize(graph, cfg.kind)?;
    let mut r = ResultRecord::new(0, "oracle", cfg.mode.name());
    (r.n, r.m) = m.shape();
    let need_b = || {
        b.ok_or_else(|| {
            Error::UnsupportedOperation(format!(
                "--mode {} needs an observation vector (--b)",
                cfg.mode.name()
            ))
        })
    };
    match cfg.mode {
        Mode::L2 => {
            let b = need_b()?;
            let x = oracle::oracle_lstsq(&m, b)?;
            r.residual = (&m * &x - b).norm();
            r.x_norm = Some(x.norm());
            r.x = Some(x.as_slice().to_vec());
        }
        Mode::L1 => {
            let b = need_b()?;
            let (x, objective) = oracle::oracle_l1(&m, b)?;
            r.residual = objective;
            r.x_norm = Some(x.norm());
            r.x = Some(x.as_slice().to_vec());
        }
        Mode::Svd => {
            let o = oracle::oracle_truncated_svd(
                &m,
                cfg.rank_cap.unwrap_or(usize::MAX),
                cfg.trunc_tol,
            )?;
            r.residual = (o.reconstruct() - &m).norm();
            r.rank = Some(o.sigma.len());
            r.sigma = Some(o.sigma.as_slice().to_vec());
        }
    }
    Ok(r)
}
