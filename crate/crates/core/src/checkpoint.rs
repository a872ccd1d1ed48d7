//! Text checkpoints of engine states.
//!
//! ```text
//! checkpoint <l2|l1|svd> <adjacency|laplacian> [degree bound]
//! <engine sections>
//! graph <n> <directed|undirected>
//! edge <i> <j> <w>
//! ...
//! ```
//!
//! Engine sections use the matrix/vector text format:
//!
//! * pseudoinverse: `tol <t>`, then `M` and `M†`; l2 adds `b`;
//! * svd: `svd <rank cap|none> <trunc tol>`, then `U`, `sigma`, `V`;
//! * l1: `M`, `b`, then `basis <k> <j1> ... <jk>`.
//!
//! Loading re-verifies what can be checked: the Penrose conditions, factor
//! orthonormality, and that stored embeddings match the graph.

use std::fmt::Write as _;

use crate::embedding::{materialize, EmbeddingKind};
use crate::error::{Error, Result};
use crate::graph::DynamicGraph;
use crate::l1::{GraphL1, L1State};
use crate::l2::L2State;
use crate::matrix::{read_matrix, read_vector, write_matrix, write_vector, DenseMatrix};
use crate::pinv::PinvState;
use crate::svd::{GraphSvd, SvdState};
use crate::text::Lines;

#[derive(Debug, Clone)]
pub enum EngineState {
    L2(L2State),
    L1(GraphL1),
    Svd(GraphSvd),
}

impl EngineState {
    pub fn graph(&self) -> &DynamicGraph {
        match self {
            EngineState::L2(s) => s.graph(),
            EngineState::L1(s) => s.graph(),
            EngineState::Svd(s) => s.graph(),
        }
    }

    pub fn kind(&self) -> EmbeddingKind {
        match self {
            EngineState::L2(s) => s.kind(),
            EngineState::L1(s) => s.kind(),
            EngineState::Svd(s) => s.kind(),
        }
    }

    pub fn mode(&self) -> &'static str {
        match self {
            EngineState::L2(_) => "l2",
            EngineState::L1(_) => "l1",
            EngineState::Svd(_) => "svd",
        }
    }
}

pub fn write_pinv(out: &mut String, p: &PinvState) {
    let _ = writeln!(out, "tol {}", p.tol());
    write_matrix(out, p.matrix());
    write_matrix(out, p.pinv());
}

pub fn read_pinv(lines: &mut Lines<'_>) -> Result<PinvState> {
    let line = lines.require("tol line")?;
    line.expect_keyword("tol")?;
    line.expect_len(2)?;
    let tol: f64 = line.field(1)?;
    let m = read_matrix(lines)?;
    let mdag = read_matrix(lines)?;
    PinvState::from_parts(m, mdag, tol)
}

pub fn write_svd(out: &mut String, s: &SvdState) {
    let cap = s.rank_cap().map_or("none".to_string(), |c| c.to_string());
    let _ = writeln!(out, "svd {cap} {}", s.trunc_tol());
    write_matrix(out, s.u());
    write_vector(out, s.sigma());
    write_matrix(out, s.v());
}

pub fn read_svd(lines: &mut Lines<'_>) -> Result<SvdState> {
    let line = lines.require("svd header")?;
    line.expect_keyword("svd")?;
    line.expect_len(3)?;
    let rank_cap = match line.tokens[1] {
        "none" => None,
        _ => Some(line.field(1)?),
    };
    let trunc_tol: f64 = line.field(2)?;
    let u = read_matrix(lines)?;
    let sigma = read_vector(lines)?;
    let v = read_matrix(lines)?;
    SvdState::from_parts(u, sigma, v, rank_cap, trunc_tol)
}

pub fn write_l1(out: &mut String, s: &L1State) {
    write_matrix(out, s.matrix());
    write_vector(out, s.b());
    let ids: Vec<String> = s.basis().iter().map(|j| j.to_string()).collect();
    let _ = writeln!(out, "basis {} {}", ids.len(), ids.join(" "));
}

pub fn read_l1(lines: &mut Lines<'_>) -> Result<L1State> {
    let m = read_matrix(lines)?;
    let b = read_vector(lines)?;
    let line = lines.require("basis line")?;
    line.expect_keyword("basis")?;
    let k: usize = line.field(1)?;
    line.expect_len(k + 2)?;
    let basis = (0..k)
        .map(|i| line.field(i + 2))
        .collect::<Result<Vec<usize>>>()?;
    L1State::with_basis(m, b, basis).map_err(|e| Error::parse(line.number, e.to_string()))
}

fn kind_tokens(kind: EmbeddingKind) -> String {
    match kind {
        EmbeddingKind::Adjacency => "adjacency".into(),
        EmbeddingKind::Laplacian { degree_bound: None } => "laplacian".into(),
        EmbeddingKind::Laplacian {
            degree_bound: Some(c),
        } => format!("laplacian {c}"),
    }
}

fn check_embedding(m: &DenseMatrix, g: &DynamicGraph, kind: EmbeddingKind) -> Result<()> {
    let expected = materialize(g, kind)?;
    if expected.shape() != m.shape() || (&expected - m).amax() > 1e-12 * (1.0 + expected.amax()) {
        return Err(Error::Verification(
            "stored matrix does not match the graph".into(),
        ));
    }
    Ok(())
}

pub fn write_checkpoint(state: &EngineState) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "checkpoint {} {}",
        state.mode(),
        kind_tokens(state.kind())
    );
    match state {
        EngineState::L2(s) => {
            write_pinv(&mut out, s.pinv());
            write_vector(&mut out, s.b());
        }
        EngineState::L1(s) => write_l1(&mut out, s.state()),
        EngineState::Svd(s) => write_svd(&mut out, s.svd()),
    }
    out.push_str(&state.graph().to_text());
    out
}

pub fn read_checkpoint(src: &str) -> Result<EngineState> {
    let mut lines = Lines::new(src);
    let header = lines.require("checkpoint header")?;
    header.expect_keyword("checkpoint")?;
    let kind = match (header.tokens.get(2).copied(), header.tokens.len()) {
        (Some("adjacency"), 3) => EmbeddingKind::Adjacency,
        (Some("laplacian"), 3) => EmbeddingKind::Laplacian { degree_bound: None },
        (Some("laplacian"), 4) => EmbeddingKind::Laplacian {
            degree_bound: Some(header.field(3)?),
        },
        _ => return Err(Error::parse(header.number, "unknown embedding")),
    };
    let at_header = |e: Error| match e {
        Error::Parse { .. } => e,
        other => Error::parse(header.number, other.to_string()),
    };
    let state = match header.tokens[1] {
        "l2" => {
            let pinv = read_pinv(&mut lines)?;
            let b = read_vector(&mut lines)?;
            let g = DynamicGraph::read(&mut lines)?;
            check_embedding(pinv.matrix(), &g, kind).map_err(at_header)?;
            EngineState::L2(L2State::from_parts(g, kind, pinv, b).map_err(at_header)?)
        }
        "l1" => {
            let s = read_l1(&mut lines)?;
            let g = DynamicGraph::read(&mut lines)?;
            EngineState::L1(GraphL1::from_parts(g, kind, s).map_err(at_header)?)
        }
        "svd" => {
            let s = read_svd(&mut lines)?;
            let g = DynamicGraph::read(&mut lines)?;
            EngineState::Svd(GraphSvd::from_parts(g, kind, s).map_err(at_header)?)
        }
        other => {
            return Err(Error::parse(
                header.number,
                format!("unknown engine `{other}`"),
            ))
        }
    };
    Ok(state)
}
