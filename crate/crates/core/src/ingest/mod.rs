//! Input graphs: DOT parsing, importance ranking and fallback placement.

mod dot;
mod layout;
mod rank;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dot::{parse_dot, parse_pos, write_dot, ParseError};
pub use layout::fallback_layout;
pub use rank::{degree_scores, pagerank, rank_nodes, RankMethod};

use crate::geometry::{Point, Rect};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub label: String,
    pub pos: Option<Point>,
    /// Attributes other than `pos` and `label`, kept verbatim.
    pub attrs: BTreeMap<String, String>,
}

/// A parsed graph before ranking. Edges are undirected pairs `(a, b)` with
/// `a < b`, in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Graph {
    pub name: String,
    pub directed: bool,
    pub attrs: Vec<(String, String)>,
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
    pub self_loops_dropped: usize,
    pub duplicate_edges_collapsed: usize,
}

impl Graph {
    pub fn is_position_complete(&self) -> bool {
        self.nodes.iter().all(|n| n.pos.is_some())
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("graph is position-incomplete: node {0:?} has no pos (use the fallback layout)")]
    PositionIncomplete(String),
    #[error("node size must be positive and finite, got {0}")]
    BadNodeSize(f64),
}

/// A fully positioned graph with an importance order over its nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedGraph {
    pub nodes: Vec<Node>,
    pub positions: Vec<Point>,
    pub edges: Vec<(usize, usize)>,
    /// Node indices, most important first.
    pub order: Vec<usize>,
    /// Node positions' bounding box inflated by the initial node radius.
    pub bbox: Rect,
    pub node_radius: f64,
}

impl RankedGraph {
    /// `node_size` is the initial node diameter; `None` picks
    /// `min(w, h) / 40` of the position bounding box (falling back to
    /// `max(w, h) / 40`, then 1, for degenerate extents).
    pub fn new(graph: Graph, order: Vec<usize>, node_size: Option<f64>) -> Result<Self, IngestError> {
        let mut positions = Vec::with_capacity(graph.nodes.len());
        for n in &graph.nodes {
            positions.push(n.pos.ok_or_else(|| IngestError::PositionIncomplete(n.id.clone()))?);
        }
        let tight = Rect::bounding(positions.iter().copied()).unwrap_or(Rect::new(0.0, 0.0, 0.0, 0.0));
        let size = match node_size {
            Some(s) => s,
            None => default_node_size(&tight),
        };
        if !(size > 0.0 && size.is_finite()) {
            return Err(IngestError::BadNodeSize(size));
        }
        let node_radius = size / 2.0;
        debug_assert_eq!(order.len(), graph.nodes.len());
        Ok(RankedGraph {
            nodes: graph.nodes,
            positions,
            edges: graph.edges,
            order,
            bbox: tight.inflate(node_radius),
            node_radius,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

pub fn default_node_size(tight: &Rect) -> f64 {
    let short = tight.width().min(tight.height());
    let long = tight.width().max(tight.height());
    if short > 0.0 {
        short / 40.0
    } else if long > 0.0 {
        long / 40.0
    } else {
        1.0
    }
}
