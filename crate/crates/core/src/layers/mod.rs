//! Zoom layers: node and rail zoom levels under per-tile quotas.

mod build;
mod overlap;
mod tiles;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build_layers, find_maximal_rails, segment_covers};
pub use overlap::{remove_overlaps, FixedSet, OverlapCanvas, OverlapError, MAX_BITMAP_SIDE};
pub use tiles::{count_tile_intersections, crowded_tiles, Crowding, Entity, TileCounter, TileGrid};

use crate::geometry::{GeometryError, Point, Rect, Segment};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildParams {
    /// Node quota `Q_N`; each tile may meet at most `Q_N / 4` nodes.
    pub qn: u32,
    /// Rail quota `Q_R`; each tile may meet at most `Q_R / 4` maximal rails.
    pub qr: u32,
    pub rail_discount: f64,
    pub max_layers: u32,
    /// On hitting `max_layers`, put every remaining node into the last layer
    /// instead of failing. Quotas do not hold on that layer.
    pub force_final_layer: bool,
    pub min_angle: f64,
    pub refine: bool,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self {
            qn: 80,
            qr: 180,
            rail_discount: 0.8,
            max_layers: 24,
            force_final_layer: false,
            min_angle: 20.0,
            refine: false,
        }
    }
}

impl BuildParams {
    pub fn validate(&self) -> Result<(), LayerError> {
        for (name, q) in [("Q_N", self.qn), ("Q_R", self.qr)] {
            if q < 4 {
                return Err(LayerError::BadParams(format!("{name} must be at least 4")));
            }
            if q % 4 != 0 {
                return Err(LayerError::BadParams(format!("{name} must be divisible by 4")));
            }
        }
        if !(self.rail_discount > 0.0 && self.rail_discount <= 1.0) {
            return Err(LayerError::BadParams(format!("rail discount must lie in (0, 1], got {}", self.rail_discount)));
        }
        if self.max_layers == 0 || self.max_layers > 40 {
            return Err(LayerError::BadParams("max layers must lie in 1..=40".into()));
        }
        if !(self.min_angle >= 0.0 && self.min_angle <= 60.0) {
            return Err(LayerError::BadParams("minimum angle must lie in [0, 60]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LayerError {
    #[error("{0}")]
    BadParams(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("layer cap of {max_layers} reached with {unassigned} nodes unassigned (try --force-final-layer)")]
    LayerCap { max_layers: u32, unassigned: usize },
    #[error("forced final layer {layer}: {source}")]
    ForcedPlacement { layer: u32, source: OverlapError },
    #[error("graph has no nodes")]
    Empty,
}

/// A straight segment carrying one or more edge routes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rail {
    /// Unique over all layers.
    pub id: usize,
    pub a: Point,
    pub b: Point,
    pub layer: u32,
    /// Graph edges routed through this rail, ascending.
    pub edges: Vec<usize>,
    /// The rail of the previous layer this one was carried from.
    pub source: Option<usize>,
    /// The maximal rail containing this one; `None` when this one is maximal.
    pub cover: Option<usize>,
}

impl Rail {
    pub fn segment(&self) -> Segment {
        Segment::new(self.a, self.b)
    }

    pub fn is_maximal(&self) -> bool {
        self.cover.is_none()
    }

    pub fn maximal_id(&self) -> usize {
        self.cover.unwrap_or(self.id)
    }

    pub fn z(&self) -> f64 {
        2f64.powi(self.layer as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub index: u32,
    pub node_radius: f64,
    /// Nodes with `z(v) <= 2^index`, in importance order.
    pub nodes: Vec<usize>,
    /// Stub tips of each node in `nodes`: the points where its routes leave
    /// it. The segment from the center to a tip is part of the node glyph.
    pub stubs: Vec<Vec<Point>>,
    pub rails: Vec<Rail>,
    /// Built with quotas switched off (forced final layer).
    pub forced: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSet {
    pub bbox: Rect,
    pub params: BuildParams,
    /// Final node positions; identical on every layer.
    pub positions: Vec<Point>,
    /// Layer index of each node: `z(v) = 2^layer_of[v]`.
    pub layer_of: Vec<u32>,
    pub layers: Vec<Layer>,
    /// Per graph edge, where its rails meet the stubs of its first and
    /// second endpoint.
    pub terminals: Vec<(Point, Point)>,
    pub order: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl LayerSet {
    pub fn z(&self, v: usize) -> f64 {
        2f64.powi(self.layer_of[v] as i32)
    }

    pub fn forced_layer(&self) -> Option<u32> {
        self.layers.iter().find(|l| l.forced).map(|l| l.index)
    }

    /// Position of each node in the importance order.
    pub fn rank_of(&self) -> Vec<usize> {
        let mut rank = vec![0; self.order.len()];
        for (i, &v) in self.order.iter().enumerate() {
            rank[v] = i;
        }
        rank
    }

    /// The edge minimizing (rank of its more important endpoint, rank of
    /// the other endpoint) among `edges`.
    pub fn top_edge(&self, rank: &[usize], edges: &[usize]) -> Option<usize> {
        edges.iter().copied().min_by_key(|&e| {
            let (a, b) = self.edges[e];
            let (ra, rb) = (rank[a], rank[b]);
            (ra.min(rb), ra.max(rb), e)
        })
    }
}
