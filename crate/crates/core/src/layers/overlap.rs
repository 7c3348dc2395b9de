use rstar::primitives::{GeomWithData, Line};
use rstar::{RTree, AABB};
use thiserror::Error;

use crate::geometry::{point_segment_distance, Point, Rect, Segment};

/// Longest side of the bitmap, in pixels.
pub const MAX_BITMAP_SIDE: f64 = 4096.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlapError {
    #[error(
        "overlap bitmap saturated: no free pixel near candidate {index} at {position:?}; \
         use a larger bitmap or a smaller node quota"
    )]
    Saturated { index: usize, position: Point },
    #[error("node diameter must be positive, got {0}")]
    BadDiameter(f64),
}

type Obstacle = GeomWithData<Line<[f64; 2]>, f64>;

/// A monochrome bitmap over a domain on which obstacles are drawn dilated by
/// the node diameter. Pixels are evaluated on demand against a spatial index
/// rather than stored, so the resolution does not cost memory.
///
/// A pixel is occupied when its center lies closer than
/// `obstacle radius + diameter + half pixel diagonal` to some obstacle, or
/// lies outside the domain. Any point inside a free pixel is therefore at
/// least `radius + diameter` away from every obstacle.
pub struct OverlapCanvas {
    pub domain: Rect,
    pub diameter: f64,
    pub pixel: f64,
    pub cols: i64,
    pub rows: i64,
    /// Chebyshev ring bound for the free-pixel search; `None` scans everything.
    pub search_rings: Option<i64>,
    obstacles: RTree<Obstacle>,
    max_radius: f64,
}

impl OverlapCanvas {
    /// Pixel size `diameter / 4`, coarsened so that the longer side of the
    /// domain has at most [`MAX_BITMAP_SIDE`] pixels. Search is bounded to
    /// `10 * diameter` (at least 8 rings).
    pub fn for_layer(domain: Rect, diameter: f64) -> Self {
        let long = domain.width().max(domain.height());
        let pixel = (diameter / 4.0).max(long / MAX_BITMAP_SIDE);
        let rings = ((10.0 * diameter / pixel).ceil() as i64).max(8);
        Self::new(domain, diameter, pixel, Some(rings))
    }

    pub fn new(domain: Rect, diameter: f64, pixel: f64, search_rings: Option<i64>) -> Self {
        Self {
            domain,
            diameter,
            pixel,
            cols: ((domain.width() / pixel).ceil() as i64).max(1),
            rows: ((domain.height() / pixel).ceil() as i64).max(1),
            search_rings,
            obstacles: RTree::new(),
            max_radius: 0.0,
        }
    }

    fn half_diag(&self) -> f64 {
        self.pixel * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn pixel_of(&self, p: Point) -> (i64, i64) {
        let c = ((p.x - self.domain.min_x) / self.pixel).floor() as i64;
        let r = ((p.y - self.domain.min_y) / self.pixel).floor() as i64;
        (c.clamp(0, self.cols - 1), r.clamp(0, self.rows - 1))
    }

    pub fn pixel_center(&self, col: i64, row: i64) -> Point {
        Point::new(
            self.domain.min_x + (col as f64 + 0.5) * self.pixel,
            self.domain.min_y + (row as f64 + 0.5) * self.pixel,
        )
    }

    pub fn add_disk(&mut self, center: Point, radius: f64) {
        self.add(Segment::new(center, center), radius);
    }

    pub fn add_segment(&mut self, s: Segment) {
        self.add(s, 0.0);
    }

    fn add(&mut self, s: Segment, radius: f64) {
        self.max_radius = self.max_radius.max(radius);
        self.obstacles.insert(GeomWithData::new(Line::new([s.a.x, s.a.y], [s.b.x, s.b.y]), radius));
    }

    pub fn is_free(&self, col: i64, row: i64) -> bool {
        let c = self.pixel_center(col, row);
        let hd = self.half_diag();
        if !self.domain.contains(c) {
            return false;
        }
        let reach = self.max_radius + self.diameter + hd;
        let env = AABB::from_corners([c.x - reach, c.y - reach], [c.x + reach, c.y + reach]);
        !self.obstacles.locate_in_envelope_intersecting(env).any(|o| {
            let l = o.geom();
            let d = point_segment_distance(c, Point::new(l.from[0], l.from[1]), Point::new(l.to[0], l.to[1]));
            d < o.data + self.diameter + hd
        })
    }

    /// Position for a node whose preferred location is `p`: `p` itself when
    /// its pixel is free, otherwise the center of the free pixel on the
    /// nearest Chebyshev ring around it, ties broken by Euclidean distance,
    /// then row, then column. `None` when no pixel within the bound is free.
    pub fn place(&self, p: Point) -> Option<Point> {
        let (pc, pr) = self.pixel_of(p);
        if self.is_free(pc, pr) {
            return Some(p);
        }
        let max_ring = self.search_rings.unwrap_or(self.cols.max(self.rows));
        for k in 1..=max_ring {
            let mut best: Option<(f64, i64, i64)> = None;
            let mut visit = |c: i64, r: i64| {
                if c < 0 || r < 0 || c >= self.cols || r >= self.rows || !self.is_free(c, r) {
                    return;
                }
                let d2 = {
                    let q = self.pixel_center(c, r) - p;
                    q.dot(q)
                };
                let key = (d2, r, c);
                if best.is_none_or(|b| key.0 < b.0 || (key.0 == b.0 && (key.1, key.2) < (b.1, b.2))) {
                    best = Some(key);
                }
            };
            for c in (pc - k)..=(pc + k) {
                visit(c, pr - k);
                visit(c, pr + k);
            }
            for r in (pr - k + 1)..=(pr + k - 1) {
                visit(pc - k, r);
                visit(pc + k, r);
            }
            if let Some((_, r, c)) = best {
                return Some(self.pixel_center(c, r));
            }
            if pc - k < 0 && pr - k < 0 && pc + k >= self.cols && pr + k >= self.rows {
                break;
            }
        }
        None
    }

    /// Place `p` and draw the placed node onto the canvas.
    pub fn place_and_draw(&mut self, p: Point) -> Option<Point> {
        let q = self.place(p)?;
        self.add_disk(q, self.diameter / 2.0);
        Some(q)
    }
}

/// Fixed entities for [`remove_overlaps`].
#[derive(Clone, Debug, Default)]
pub struct FixedSet {
    pub nodes: Vec<Point>,
    pub rails: Vec<Segment>,
}

/// Move each candidate, in order, to a position clear of the fixed nodes
/// and rails and of the candidates placed before it.
pub fn remove_overlaps(
    domain: Rect,
    fixed: &FixedSet,
    candidates: &[Point],
    node_diameter: f64,
) -> Result<Vec<Point>, OverlapError> {
    if !(node_diameter > 0.0 && node_diameter.is_finite()) {
        return Err(OverlapError::BadDiameter(node_diameter));
    }
    let mut canvas = OverlapCanvas::for_layer(domain, node_diameter);
    for &p in &fixed.nodes {
        canvas.add_disk(p, node_diameter / 2.0);
    }
    for &s in &fixed.rails {
        canvas.add_segment(s);
    }
    candidates
        .iter()
        .enumerate()
        .map(|(index, &p)| canvas.place_and_draw(p).ok_or(OverlapError::Saturated { index, position: p }))
        .collect()
}
