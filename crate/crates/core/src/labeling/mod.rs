//! Greedy label placement over a geometric sequence of zoom levels.
//!
//! Node disks and label boxes keep a constant size on screen, so in graph
//! units every shape shrinks towards its node center as `1 / Z`. A label is
//! accepted at `Z_i` only if it stays clear of every other label and node
//! disk for all zooms `Z >= Z_i` at which both are shown.

use rstar::primitives::Rectangle;
use rstar::{RTree, AABB};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Rect};
use crate::layers::LayerSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelPosition {
    Left,
    Right,
    Above,
    Below,
}

impl LabelPosition {
    /// Order in which positions are tried.
    pub const ALL: [LabelPosition; 4] = [Self::Left, Self::Right, Self::Above, Self::Below];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelParams {
    /// `log2(delta0)`; levels are `Z_i = delta0 * delta^i`.
    pub log2_delta0: f64,
    /// `log2(delta)`.
    pub log2_delta: f64,
    /// Label height in graph units at zoom 1.
    pub font_height: f64,
    pub char_width_ratio: f64,
    /// A node left unlabeled for this many levels after it becomes visible
    /// is an error.
    pub max_levels: u32,
}

impl LabelParams {
    /// Defaults with the label height equal to the node diameter at zoom 1.
    pub fn for_layers(set: &LayerSet) -> Self {
        Self {
            log2_delta0: -4.0,
            log2_delta: 0.125,
            font_height: 2.0 * set.layers.first().map_or(1.0, |l| l.node_radius),
            char_width_ratio: 0.6,
            max_levels: 64,
        }
    }

    /// `Z_i = delta0 * delta^i`, computed in log space so that powers of two
    /// come out exact.
    pub fn level(&self, i: u32) -> f64 {
        (self.log2_delta0 + i as f64 * self.log2_delta).exp2()
    }

    /// Smallest `i` with `Z_i >= z`.
    pub fn first_level_at_least(&self, z: f64) -> u32 {
        let guess = ((z.log2() - self.log2_delta0) / self.log2_delta).ceil().max(0.0) as u32;
        let mut i = guess.saturating_sub(1);
        while self.level(i) < z {
            i += 1;
        }
        i
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("delta0 must be positive and delta greater than 1")]
    BadParams,
    #[error("{} labels did not fit within {levels} levels, first: node {}", nodes.len(), nodes[0])]
    Unplaced { levels: u32, nodes: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeLabel {
    pub node: usize,
    pub text: String,
    /// Zoom level `l(v)` at which the label first appears.
    pub zoom: f64,
    pub level: u32,
    pub position: LabelPosition,
    /// Box in graph units at `zoom`.
    pub rect: Rect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelPlan {
    pub log2_delta0: f64,
    pub log2_delta: f64,
    pub font_height: f64,
    pub char_width_ratio: f64,
    /// Node radius at zoom 1; at zoom `Z` node disks have radius `node_radius / Z`.
    pub node_radius: f64,
    /// Levels `Z_0 ..= Z_last` were visited.
    pub last_level: u32,
    /// Indexed by node.
    pub labels: Vec<NodeLabel>,
}

/// A shape relative to its anchor at zoom 1; at zoom `Z` it is
/// `anchor + shape / Z`.
#[derive(Clone, Copy, Debug)]
enum Shape {
    Disk(f64),
    Box(Rect),
}

/// Label box relative to its node at zoom 1.
pub fn label_offset(position: LabelPosition, r: f64, w: f64, h: f64) -> Rect {
    match position {
        LabelPosition::Left => Rect::new(-r - w, -h / 2.0, -r, h / 2.0),
        LabelPosition::Right => Rect::new(r, -h / 2.0, r + w, h / 2.0),
        LabelPosition::Above => Rect::new(-w / 2.0, r, w / 2.0, r + h),
        LabelPosition::Below => Rect::new(-w / 2.0, -r - h, w / 2.0, -r),
    }
}

fn scaled(anchor: Point, r: &Rect, z: f64) -> Rect {
    Rect::new(anchor.x + r.min_x / z, anchor.y + r.min_y / z, anchor.x + r.max_x / z, anchor.y + r.max_y / z)
}

/// Open interval of `t` with `lo < t * d < hi`.
fn open_interval(d: f64, lo: f64, hi: f64) -> (f64, f64) {
    if d == 0.0 {
        if lo < 0.0 && 0.0 < hi {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (1.0, -1.0)
        }
    } else {
        let (a, b) = (lo / d, hi / d);
        (a.min(b), a.max(b))
    }
}

/// Whether box `a` (at anchor 0) and box `b` (at anchor `d`) have
/// overlapping interiors at some zoom `t >= t0`.
fn boxes_meet_after(a: &Rect, b: &Rect, d: Point, t0: f64) -> bool {
    // a/t and d + b/t overlap  <=>  t*d lies in the open box a - b
    let (xl, xh) = open_interval(d.x, a.min_x - b.max_x, a.max_x - b.min_x);
    let (yl, yh) = open_interval(d.y, a.min_y - b.max_y, a.max_y - b.min_y);
    let (lo, hi) = (xl.max(yl), xh.min(yh));
    // (lo, hi) ∩ [t0, inf) is non-empty
    lo < hi && t0 < hi
}

/// Whether box `a` (at anchor 0) and the disk of radius `rho` (at anchor
/// `d`) overlap at some zoom `t >= t0`: `dist(t*d, a) < rho`.
fn box_disk_meet_after(a: &Rect, rho: f64, d: Point, t0: f64) -> bool {
    // breakpoints of the piecewise quadratic dist(t*d, a)^2
    let mut cuts = vec![t0];
    for (c, lo, hi) in [(d.x, a.min_x, a.max_x), (d.y, a.min_y, a.max_y)] {
        if c != 0.0 {
            for v in [lo / c, hi / c] {
                if v > t0 {
                    cuts.push(v);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let dist2 = |t: f64| {
        let (x, y) = (t * d.x, t * d.y);
        let dx = (a.min_x - x).max(0.0).max(x - a.max_x);
        let dy = (a.min_y - y).max(0.0).max(y - a.max_y);
        dx * dx + dy * dy
    };
    let r2 = rho * rho;
    // on each piece the squared distance is a convex quadratic; test its
    // ends and its vertex
    for (k, &s) in cuts.iter().enumerate() {
        let e = cuts.get(k + 1).copied().unwrap_or(f64::INFINITY);
        if dist2(s) < r2 {
            return true;
        }
        let probe = if e.is_finite() { (s + e) / 2.0 } else { s + 1.0 };
        let (x, y) = (probe * d.x, probe * d.y);
        // active coefficients on this piece: each axis contributes
        // (t*c - bound)^2 or nothing
        let mut qa = 0.0;
        let mut qb = 0.0;
        for (c, v, lo, hi) in [(d.x, x, a.min_x, a.max_x), (d.y, y, a.min_y, a.max_y)] {
            let bound = if v < lo {
                lo
            } else if v > hi {
                hi
            } else {
                continue;
            };
            qa += c * c;
            qb += c * bound;
        }
        if qa > 0.0 {
            let t = qb / qa;
            if t > s && t < e && dist2(t) < r2 {
                return true;
            }
        }
    }
    false
}

fn shapes_meet_after(a: &Shape, b: &Shape, d: Point, t0: f64) -> bool {
    match (a, b) {
        (Shape::Box(p), Shape::Box(q)) => boxes_meet_after(p, q, d, t0),
        (Shape::Box(p), Shape::Disk(r)) => box_disk_meet_after(p, *r, d, t0),
        (Shape::Disk(r), Shape::Box(q)) => box_disk_meet_after(q, *r, Point::new(-d.x, -d.y), t0),
        (Shape::Disk(r), Shape::Disk(s)) => d.norm() * t0 < r + s,
    }
}

/// Inflate by a relative margin so that accepted placements stay clear of
/// rounding when the result is checked in graph coordinates.
const SAFETY: f64 = 1e-9;

fn inflate_shape(s: Shape, by: f64) -> Shape {
    match s {
        Shape::Disk(r) => Shape::Disk(r + by),
        Shape::Box(b) => Shape::Box(b.inflate(by)),
    }
}

struct Placed {
    anchor: Point,
    shape: Shape,
    /// Zoom from which it is shown.
    from: f64,
    owner: usize,
}

type Entry = rstar::primitives::GeomWithData<Rectangle<[f64; 2]>, usize>;

/// Envelope of `anchor + shape / t` over all `t >= z`.
fn sweep_envelope(anchor: Point, shape: &Shape, z: f64) -> AABB<[f64; 2]> {
    let r = match *shape {
        Shape::Disk(r) => Rect::new(-r, -r, r, r),
        Shape::Box(b) => b,
    };
    let s = scaled(anchor, &r, z);
    AABB::from_corners([s.min_x.min(anchor.x), s.min_y.min(anchor.y)], [s.max_x.max(anchor.x), s.max_y.max(anchor.y)])
}

/// Assign every node a label zoom `l(v) >= z(v)` and a position.
pub fn plan_labels(set: &LayerSet, texts: &[String], params: &LabelParams) -> Result<LabelPlan, LabelError> {
    if !(params.log2_delta0.is_finite() && params.log2_delta > 0.0 && params.log2_delta.is_finite()) {
        return Err(LabelError::BadParams);
    }
    let n = set.positions.len();
    let r0 = set.layers.first().map_or(0.0, |l| l.node_radius);
    let h = params.font_height;
    let width = |v: usize| texts[v].chars().count() as f64 * params.char_width_ratio * h;
    let margin = SAFETY * (r0 + h).max(f64::MIN_POSITIVE);

    let start: Vec<u32> = (0..n).map(|v| params.first_level_at_least(set.z(v))).collect();
    let mut placed: Vec<Option<NodeLabel>> = vec![None; n];
    let mut labels: Vec<Placed> = Vec::new();
    let mut remaining: Vec<usize> = set.order.clone();
    let disk = Shape::Disk(r0);
    let node_tree: RTree<Entry> = RTree::bulk_load(
        (0..n)
            .map(|v| {
                let env = sweep_envelope(set.positions[v], &disk, params.level(start[v]));
                Entry::new(Rectangle::from_aabb(env), v)
            })
            .collect(),
    );

    let mut i = remaining.iter().map(|&v| start[v]).min().unwrap_or(0);
    let mut last = i;
    while !remaining.is_empty() {
        let z = params.level(i);
        last = i;
        // already placed labels, sized for this level
        let mut label_tree: RTree<Entry> = RTree::new();
        for (k, p) in labels.iter().enumerate() {
            label_tree.insert(Entry::new(Rectangle::from_aabb(sweep_envelope(p.anchor, &p.shape, z)), k));
        }
        let mut still = Vec::new();
        let mut failed = Vec::new();
        for &v in &remaining {
            if start[v] > i {
                still.push(v);
                continue;
            }
            let c = set.positions[v];
            let w = width(v);
            let fits = |pos: LabelPosition| {
                let shape = Shape::Box(label_offset(pos, r0, w, h));
                let probe = inflate_shape(shape, margin);
                let env = sweep_envelope(c, &probe, z);
                let nodes_clear = node_tree.locate_in_envelope_intersecting(env).filter(|e| e.data != v).all(|e| {
                    let u = e.data;
                    let from = z.max(params.level(start[u]));
                    !shapes_meet_after(&probe, &disk, set.positions[u] - c, from)
                });
                nodes_clear
                    && label_tree.locate_in_envelope_intersecting(env).all(|e| {
                        let p = &labels[e.data];
                        !shapes_meet_after(&probe, &p.shape, p.anchor - c, z.max(p.from))
                    })
            };
            match LabelPosition::ALL.into_iter().find(|&p| fits(p)) {
                Some(pos) => {
                    let shape = Shape::Box(label_offset(pos, r0, w, h));
                    let k = labels.len();
                    labels.push(Placed { anchor: c, shape, from: z, owner: v });
                    label_tree.insert(Entry::new(Rectangle::from_aabb(sweep_envelope(c, &shape, z)), k));
                    let Shape::Box(b) = shape else { unreachable!() };
                    placed[v] = Some(NodeLabel {
                        node: v,
                        text: texts[v].clone(),
                        zoom: z,
                        level: i,
                        position: pos,
                        rect: scaled(c, &b, z),
                    });
                }
                None if i - start[v] >= params.max_levels => failed.push(v),
                None => still.push(v),
            }
        }
        if !failed.is_empty() {
            return Err(LabelError::Unplaced { levels: params.max_levels, nodes: failed });
        }
        remaining = still;
        // skip levels at which nothing new can become eligible or fit
        i = match remaining.iter().map(|&v| start[v]).min() {
            Some(s) => s.max(i + 1),
            None => i,
        };
    }
    debug_assert!(labels.iter().all(|p| placed[p.owner].is_some()));
    Ok(LabelPlan {
        log2_delta0: params.log2_delta0,
        log2_delta: params.log2_delta,
        font_height: h,
        char_width_ratio: params.char_width_ratio,
        node_radius: r0,
        last_level: last,
        labels: placed.into_iter().map(|l| l.expect("all labeled")).collect(),
    })
}

impl LabelPlan {
    pub fn level(&self, i: u32) -> f64 {
        (self.log2_delta0 + i as f64 * self.log2_delta).exp2()
    }

    /// Box of a label at zoom `z`.
    pub fn rect_at(&self, label: &NodeLabel, center: Point, z: f64) -> Rect {
        let w = label.text.chars().count() as f64 * self.char_width_ratio * self.font_height;
        scaled(center, &label_offset(label.position, self.node_radius, w, self.font_height), z)
    }
}

fn disk_hits_box(c: Point, r: f64, b: &Rect) -> bool {
    let dx = (b.min_x - c.x).max(0.0).max(c.x - b.max_x);
    let dy = (b.min_y - c.y).max(0.0).max(c.y - b.max_y);
    dx * dx + dy * dy < r * r
}

fn interiors_meet(a: &Rect, b: &Rect) -> bool {
    a.min_x < b.max_x && b.min_x < a.max_x && a.min_y < b.max_y && b.min_y < a.max_y
}

/// Pairwise check at every visited level: shown labels are disjoint from
/// each other and from the disks of shown nodes other than their own.
/// Returns one message per offending pair and level.
pub fn check_labels(set: &LayerSet, plan: &LabelPlan) -> Vec<String> {
    let mut failures = Vec::new();
    for (v, l) in plan.labels.iter().enumerate() {
        if l.node != v || l.zoom < set.z(v) {
            failures.push(format!("node {v}: label zoom {} below node zoom {}", l.zoom, set.z(v)));
        }
    }
    for i in 0..=plan.last_level {
        let z = plan.level(i);
        let r = plan.node_radius / z;
        let nodes: Vec<usize> = (0..set.positions.len()).filter(|&v| set.z(v) <= z).collect();
        let shown: Vec<(usize, Rect)> = plan
            .labels
            .iter()
            .filter(|l| l.zoom <= z)
            .map(|l| (l.node, plan.rect_at(l, set.positions[l.node], z)))
            .collect();
        for (k, (v, a)) in shown.iter().enumerate() {
            for (u, b) in &shown[k + 1..] {
                if interiors_meet(a, b) {
                    failures.push(format!("zoom {z}: labels of {v} and {u} overlap"));
                }
            }
            for &u in &nodes {
                if u != *v && disk_hits_box(set.positions[u], r, a) {
                    failures.push(format!("zoom {z}: label of {v} overlaps node {u}"));
                }
            }
        }
    }
    failures
}
