//! DOT text to layers and labels in one call.

use thiserror::Error;

use crate::ingest::{fallback_layout, parse_dot, rank_nodes, Graph, IngestError, ParseError, RankMethod, RankedGraph};
use crate::labeling::{plan_labels, LabelError, LabelParams, LabelPlan};
use crate::layers::{build_layers, BuildParams, LayerError, LayerSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileOptions {
    pub rank: RankMethod,
    /// Initial node diameter; `None` derives it from the extent.
    pub node_size: Option<f64>,
    pub params: BuildParams,
    /// Lay out graphs lacking positions instead of rejecting them.
    pub layout: bool,
    pub seed: u64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { rank: RankMethod::PageRank, node_size: None, params: BuildParams::default(), layout: false, seed: 1 }
    }
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Layers(#[from] LayerError),
    #[error(transparent)]
    Labels(#[from] LabelError),
}

impl CompileError {
    /// 1 bad arguments, 2 unusable input, 3 geometry, 4 layer cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            CompileError::Parse(_) | CompileError::Ingest(IngestError::PositionIncomplete(_)) => 2,
            CompileError::Ingest(IngestError::BadNodeSize(_)) => 1,
            CompileError::Layers(LayerError::BadParams(_)) => 1,
            CompileError::Layers(LayerError::Empty) => 2,
            CompileError::Layers(LayerError::LayerCap { .. }) => 4,
            CompileError::Layers(_) | CompileError::Labels(_) => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Compiled {
    pub graph: RankedGraph,
    pub set: LayerSet,
    pub labels: LabelPlan,
}

/// Rank, position and size a parsed graph.
pub fn prepare(mut graph: Graph, opts: &CompileOptions) -> Result<RankedGraph, CompileError> {
    if opts.layout && !graph.is_position_complete() {
        let pos = fallback_layout(&graph, opts.seed);
        for (n, p) in graph.nodes.iter_mut().zip(pos) {
            n.pos = Some(p);
        }
    }
    let order = rank_nodes(&graph, opts.rank);
    Ok(RankedGraph::new(graph, order, opts.node_size)?)
}

pub fn compile_graph(graph: Graph, opts: &CompileOptions) -> Result<Compiled, CompileError> {
    opts.params.validate()?;
    let graph = prepare(graph, opts)?;
    let set = build_layers(&graph, opts.params)?;
    let texts: Vec<String> = graph.nodes.iter().map(|n| n.label.clone()).collect();
    let labels = plan_labels(&set, &texts, &LabelParams::for_layers(&set))?;
    Ok(Compiled { graph, set, labels })
}

pub fn compile(dot: &str, opts: &CompileOptions) -> Result<Compiled, CompileError> {
    compile_graph(parse_dot(dot)?, opts)
}
