use std::collections::HashMap;

use rstar::primitives::Line;
use rstar::{RTree, AABB};

use crate::geometry::{Point, Rect, Segment};

/// A node disk or a rail segment, as tested against tiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Entity {
    Disk { center: Point, radius: f64 },
    Segment(Segment),
}

impl Entity {
    pub fn bounds(&self) -> Rect {
        match *self {
            Entity::Disk { center, radius } => Rect::from_center(center, 2.0 * radius, 2.0 * radius),
            Entity::Segment(s) => Rect::bounding([s.a, s.b]).expect("two points"),
        }
    }
}

/// Closed rectangle versus closed disk or segment; touching counts.
pub fn count_tile_intersections(tile: &Rect, entity: &Entity) -> bool {
    match *entity {
        Entity::Disk { center, radius } => tile.intersects_disk(center, radius),
        Entity::Segment(s) => tile.intersects_segment(s.a, s.b),
    }
}

/// The tiles `T_ij^n` of one level: a `2^n x 2^n` subdivision of `B`,
/// extended to an unbounded grid so that entities touching the border of
/// `B` are still attributed to the outside tiles they touch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TileGrid {
    pub origin: Point,
    pub tile_w: f64,
    pub tile_h: f64,
    pub level: u32,
}

impl TileGrid {
    pub fn new(bbox: &Rect, level: u32) -> Self {
        let scale = 2f64.powi(level as i32);
        Self { origin: bbox.min(), tile_w: bbox.width() / scale, tile_h: bbox.height() / scale, level }
    }

    pub fn tile(&self, i: i64, j: i64) -> Rect {
        Rect::new(
            self.origin.x + i as f64 * self.tile_w,
            self.origin.y + j as f64 * self.tile_h,
            self.origin.x + (i + 1) as f64 * self.tile_w,
            self.origin.y + (j + 1) as f64 * self.tile_h,
        )
    }

    fn col(&self, x: f64) -> i64 {
        ((x - self.origin.x) / self.tile_w).floor() as i64
    }

    fn row(&self, y: f64) -> i64 {
        ((y - self.origin.y) / self.tile_h).floor() as i64
    }

    /// Index ranges, padded by one tile, of tiles that may meet `r`.
    pub fn candidate_range(&self, r: &Rect) -> (i64, i64, i64, i64) {
        (self.col(r.min_x) - 1, self.col(r.max_x) + 1, self.row(r.min_y) - 1, self.row(r.max_y) + 1)
    }

    /// Tiles (each inflated by `eps`) that the entity intersects, sorted.
    pub fn tiles_of(&self, entity: &Entity, eps: f64) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        match *entity {
            Entity::Disk { .. } => {
                let (i0, i1, j0, j1) = self.candidate_range(&entity.bounds().inflate(eps));
                for i in i0..=i1 {
                    for j in j0..=j1 {
                        if count_tile_intersections(&self.tile(i, j).inflate(eps), entity) {
                            out.push((i, j));
                        }
                    }
                }
            }
            Entity::Segment(s) => {
                // Walk columns and clip the segment to each column slab, so
                // long diagonal rails cost time linear in the tiles they cross.
                let b = entity.bounds().inflate(eps);
                let (i0, i1, _, _) = self.candidate_range(&b);
                let d = s.b - s.a;
                for i in i0..=i1 {
                    let x0 = self.origin.x + i as f64 * self.tile_w - eps;
                    let x1 = self.origin.x + (i + 1) as f64 * self.tile_w + eps;
                    let (lo, hi) = if d.x.abs() < f64::MIN_POSITIVE {
                        if s.a.x < x0 || s.a.x > x1 {
                            continue;
                        }
                        (0.0, 1.0)
                    } else {
                        let ta = (x0 - s.a.x) / d.x;
                        let tb = (x1 - s.a.x) / d.x;
                        let (lo, hi) = (ta.min(tb).max(0.0), ta.max(tb).min(1.0));
                        if lo > hi {
                            continue;
                        }
                        (lo, hi)
                    };
                    let ya = s.a.y + d.y * lo;
                    let yb = s.a.y + d.y * hi;
                    let j0 = self.row(ya.min(yb) - eps) - 1;
                    let j1 = self.row(ya.max(yb) + eps) + 1;
                    for j in j0..=j1 {
                        if count_tile_intersections(&self.tile(i, j).inflate(eps), entity) {
                            out.push((i, j));
                        }
                    }
                }
            }
        }
        out
    }
}

fn line(s: &Segment) -> Line<[f64; 2]> {
    Line::new([s.a.x, s.a.y], [s.b.x, s.b.y])
}

fn envelope(r: &Rect) -> AABB<[f64; 2]> {
    AABB::from_corners([r.min_x, r.min_y], [r.max_x, r.max_y])
}

/// Outcome of [`crowded_tiles`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Crowding {
    /// Largest count of a single tile (exact when searched with `want_max`).
    pub max: usize,
    /// Tiles whose count exceeds the limit, sorted.
    pub over: Vec<((i64, i64), usize)>,
    /// Tiles counted individually.
    pub tiles: usize,
}

/// Finds the tiles of `level` whose count exceeds `limit` without listing
/// every tile: blocks of coarser levels are counted first, and a block is
/// only split when its own count could still hide an offending tile.
///
/// `count` receives a block already inflated by `eps` and must be monotone
/// under containment. Tiles of level `n + 1` nest exactly in tiles of level
/// `n` because the tile sizes differ by a power of two. With `want_max` the
/// search also finds the exact largest count; without it, it stops at the
/// first offending tile.
pub fn crowded_tiles(
    bbox: &Rect,
    level: u32,
    eps: f64,
    limit: usize,
    want_max: bool,
    roots: impl IntoIterator<Item = (i64, i64)>,
    mut count: impl FnMut(&Rect) -> usize,
) -> Crowding {
    let grids: Vec<TileGrid> = (0..=level).map(|m| TileGrid::new(bbox, m)).collect();
    let mut out = Crowding::default();
    let mut roots: Vec<(i64, i64)> = roots.into_iter().collect();
    roots.sort_unstable();
    roots.dedup();
    let mut stack: Vec<(u32, i64, i64)> = roots.into_iter().rev().map(|(i, j)| (0, i, j)).collect();
    while let Some((m, i, j)) = stack.pop() {
        let c = count(&grids[m as usize].tile(i, j).inflate(eps));
        if m == level {
            out.tiles += 1;
            out.max = out.max.max(c);
            if c > limit {
                out.over.push(((i, j), c));
                if !want_max {
                    break;
                }
            }
            continue;
        }
        let bound = if want_max { out.max.min(limit) } else { limit };
        if c > bound {
            for (di, dj) in [(1, 1), (1, 0), (0, 1), (0, 0)] {
                stack.push((m + 1, 2 * i + di, 2 * j + dj));
            }
        }
    }
    out.over.sort_unstable();
    out
}

/// Per-tile node and maximal-rail counters for one level.
///
/// Every count is taken against tiles inflated by `eps`, so it never falls
/// below the exact closed-tile count. Node counts are eager; rail counts are
/// taken on demand from a spatial index of the maximal rails, since a long
/// rail on a deep level crosses far too many tiles to list.
pub struct TileCounter {
    pub grid: TileGrid,
    pub eps: f64,
    bbox: Rect,
    nodes: HashMap<(i64, i64), u32>,
    index: RTree<Line<[f64; 2]>>,
}

impl TileCounter {
    pub fn new(bbox: &Rect, level: u32, eps: f64, maximal: &[Segment]) -> Self {
        // Built by insertion: rstar 0.13 can panic when inserting into a
        // bulk-loaded tree.
        let mut index = RTree::new();
        for s in maximal {
            index.insert(line(s));
        }
        Self { grid: TileGrid::new(bbox, level), eps, bbox: *bbox, nodes: HashMap::new(), index }
    }

    pub fn node_count(&self, tile: (i64, i64)) -> u32 {
        self.nodes.get(&tile).copied().unwrap_or(0)
    }

    /// Whether adding a node disk would push some tile above `limit`.
    pub fn node_would_exceed(&self, center: Point, radius: f64, limit: u32) -> bool {
        self.grid.tiles_of(&Entity::Disk { center, radius }, self.eps).iter().any(|t| self.node_count(*t) + 1 > limit)
    }

    pub fn add_node(&mut self, center: Point, radius: f64) {
        for t in self.grid.tiles_of(&Entity::Disk { center, radius }, self.eps) {
            *self.nodes.entry(t).or_insert(0) += 1;
        }
    }

    fn existing_in(&self, rect: &Rect) -> usize {
        self.index
            .locate_in_envelope_intersecting(envelope(rect))
            .filter(|l| rect.intersects_segment(Point::new(l.from[0], l.from[1]), Point::new(l.to[0], l.to[1])))
            .count()
    }

    /// Maximal rails meeting the (inflated) tile.
    pub fn rail_count(&self, tile: (i64, i64)) -> u32 {
        self.existing_in(&self.grid.tile(tile.0, tile.1).inflate(self.eps)) as u32
    }

    /// Whether adding all `segments` as maximal rails would push some tile
    /// above `limit`.
    pub fn rails_would_exceed(&self, segments: &[Segment], limit: u32) -> bool {
        if segments.is_empty() {
            return false;
        }
        let top = TileGrid::new(&self.bbox, 0);
        let roots: Vec<(i64, i64)> =
            segments.iter().flat_map(|s| top.tiles_of(&Entity::Segment(*s), self.eps)).collect();
        let crowding = crowded_tiles(&self.bbox, self.grid.level, self.eps, limit as usize, false, roots, |rect| {
            let new = segments.iter().filter(|s| rect.intersects_segment(s.a, s.b)).count();
            // only tiles a new rail meets can change
            if new == 0 {
                0
            } else {
                new + self.existing_in(rect)
            }
        });
        !crowding.over.is_empty()
    }

    pub fn add_rail(&mut self, s: Segment) {
        debug_assert!(s.a.is_finite() && s.b.is_finite());
        self.index.insert(line(&s));
    }
}
