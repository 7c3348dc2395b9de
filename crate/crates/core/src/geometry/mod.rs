//! Planar geometry kernel: points, rectangles, segments, node boundaries,
//! the constrained mesh and shortest-path routing over it.

mod mesh;
mod route;

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mesh::{generate_mesh, Mesh, MeshEdge, MeshInput};
pub use route::{route, Route};

/// Number of sides of the regular polygon approximating a node boundary.
pub const BOUNDARY_SIDES: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Bit pattern of both coordinates, usable as an exact hash key.
    pub fn bits(self) -> (u64, u64) {
        (self.x.to_bits(), self.y.to_bits())
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn from_center(center: Point, width: f64, height: f64) -> Self {
        Self::new(center.x - width / 2.0, center.y - height / 2.0, center.x + width / 2.0, center.y + height / 2.0)
    }

    /// Smallest rectangle containing every point; `None` for an empty iterator.
    pub fn bounding<I: IntoIterator<Item = Point>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut r = Rect::new(first.x, first.y, first.x, first.y);
        for p in it {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
        Some(r)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn diag(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn min(&self) -> Point {
        Point::new(self.min_x, self.min_y)
    }

    pub fn max(&self) -> Point {
        Point::new(self.max_x, self.max_y)
    }

    pub fn center(&self) -> Point {
        Point::new((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.min_x, self.min_y),
            Point::new(self.max_x, self.min_y),
            Point::new(self.max_x, self.max_y),
            Point::new(self.min_x, self.max_y),
        ]
    }

    pub fn inflate(&self, by: f64) -> Rect {
        Rect::new(self.min_x - by, self.min_y - by, self.max_x + by, self.max_y + by)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.min_x >= self.min_x && other.max_x <= self.max_x && other.min_y >= self.min_y && other.max_y <= self.max_y
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min_x <= other.max_x && other.min_x <= self.max_x && self.min_y <= other.max_y && other.min_y <= self.max_y
    }

    /// Closed disk against closed rectangle; boundary contact counts.
    pub fn intersects_disk(&self, center: Point, radius: f64) -> bool {
        let dx = (self.min_x - center.x).max(0.0).max(center.x - self.max_x);
        let dy = (self.min_y - center.y).max(0.0).max(center.y - self.max_y);
        dx * dx + dy * dy <= radius * radius
    }

    /// Closed segment against closed rectangle (Liang–Barsky clipping).
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for (p, q) in
            [(-d.x, a.x - self.min_x), (d.x, self.max_x - a.x), (-d.y, a.y - self.min_y), (d.y, self.max_y - a.y)]
        {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        point_segment_distance(p, self.a, self.b)
    }
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

/// True when the two closed segments share a point other than a common
/// endpoint. Used to name offending inputs, not on hot paths.
pub fn segments_cross(s: &Segment, t: &Segment) -> bool {
    let shared = |p: Point| p == t.a || p == t.b;
    let d1 = orient(t.a, t.b, s.a);
    let d2 = orient(t.a, t.b, s.b);
    let d3 = orient(s.a, s.b, t.a);
    let d4 = orient(s.a, s.b, t.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, a: Point, b: Point, o: f64| {
        o == 0.0 && p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    (on(s.a, t.a, t.b, d1) && !shared(s.a))
        || (on(s.b, t.a, t.b, d2) && !shared(s.b))
        || (on(t.a, s.a, s.b, d3) && !(t.a == s.a || t.a == s.b))
        || (on(t.b, s.a, s.b, d4) && !(t.b == s.a || t.b == s.b))
}

/// A node's boundary: its center plus a regular polygon around it.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeBoundary {
    pub center: Point,
    pub radius: f64,
    pub polygon: Vec<Point>,
}

impl NodeBoundary {
    /// Regular octagon of circumradius `radius`, first vertex at 22.5°.
    pub fn octagon(center: Point, radius: f64) -> Self {
        let polygon = (0..BOUNDARY_SIDES)
            .map(|k| {
                let a = std::f64::consts::TAU * (k as f64 + 0.5) / BOUNDARY_SIDES as f64;
                center + Point::new(a.cos(), a.sin()) * radius
            })
            .collect();
        Self { center, radius, polygon }
    }

    /// Boundary with explicit polygon offsets from the center.
    pub fn with_offsets(center: Point, radius: f64, offsets: &[Point]) -> Self {
        Self { center, radius, polygon: offsets.iter().map(|&o| center + o).collect() }
    }

    /// Radius of the inscribed circle of the polygon.
    pub fn inner_radius(&self) -> f64 {
        self.polygon
            .iter()
            .zip(self.polygon.iter().cycle().skip(1))
            .map(|(&a, &b)| point_segment_distance(self.center, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Power-of-two coordinate grid. Every snapped coordinate is an exact
/// multiple of `step`, so sums, differences and halvings of snapped values
/// stay exact and collinear points stay exactly collinear.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub step: f64,
}

/// Bits of integer headroom kept below the f64 mantissa.
const LATTICE_BITS: i32 = 50;

impl Lattice {
    pub fn for_extent(bbox: &Rect) -> Self {
        let magnitude = [bbox.min_x, bbox.min_y, bbox.max_x, bbox.max_y]
            .iter()
            .map(|v| v.abs())
            .fold(bbox.diag(), f64::max)
            .max(f64::MIN_POSITIVE);
        let exp = magnitude.log2().ceil() as i32 - LATTICE_BITS;
        Self { step: 2f64.powi(exp) }
    }

    pub fn snap_value(&self, v: f64) -> f64 {
        (v / self.step).round() * self.step
    }

    pub fn snap(&self, p: Point) -> Point {
        Point::new(self.snap_value(p.x), self.snap_value(p.y))
    }

    /// Octagon offsets for circumradius `radius` whose coordinates are
    /// multiples of `step * 2^halvings`, so the offsets stay on the lattice
    /// after being halved `halvings` times.
    pub fn octagon_offsets(&self, radius: f64, halvings: u32) -> Result<Vec<Point>, GeometryError> {
        let unit = self.step * 2f64.powi(halvings as i32);
        if radius / unit < 64.0 {
            return Err(GeometryError::LatticeTooCoarse { radius, halvings });
        }
        let snap = |v: f64| (v / unit).round() * unit;
        Ok(NodeBoundary::octagon(Point::default(), radius)
            .polygon
            .into_iter()
            .map(|p| Point::new(snap(p.x), snap(p.y)))
            .collect())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("constraint segment {first} ({first_seg:?}) crosses constraint segment {second} ({second_seg:?})")]
    CrossingConstraints { first: String, first_seg: Segment, second: String, second_seg: Segment },
    #[error("invalid coordinate in mesh input: {0:?}")]
    InvalidPoint(Point),
    #[error("constraint {0} could not be traced through the mesh")]
    ConstraintLost(usize),
    #[error("no route between boundary {source_node} and boundary {target_node}: mesh is disconnected")]
    Unroutable { source_node: usize, target_node: usize },
    #[error("boundary index {0} is not part of the mesh")]
    UnknownBoundary(usize),
    #[error("rail discount {0} must lie in (0, 1]")]
    BadDiscount(f64),
    #[error("coordinate lattice too coarse for node radius {radius} over {halvings} halvings")]
    LatticeTooCoarse { radius: f64, halvings: u32 },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_touching_corner_intersects_closed_rect() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        // the anti-diagonal x + y = 2 touches only the corner (1, 1)
        assert!(r.intersects_segment(Point::new(0.0, 2.0), Point::new(2.0, 0.0)));
        assert!(!r.intersects_segment(Point::new(0.0, 2.5), Point::new(2.5, 0.0)));
        assert!(r.intersects_segment(Point::new(1.0, 2.0), Point::new(1.0, 1.0)));
        assert!(r.intersects_segment(Point::new(0.2, 0.2), Point::new(0.3, 0.3)));
    }

    #[test]
    fn disk_rect_boundary_contact() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        assert!(r.intersects_disk(Point::new(0.5, 0.5), 0.1));
        assert!(r.intersects_disk(Point::new(1.5, 0.5), 0.5));
        assert!(!r.intersects_disk(Point::new(2.5, 0.5), 0.5));
    }

    #[test]
    fn crossing_detection() {
        let s = Segment::new(Point::new(0.0, 0.0), Point::new(2.0, 2.0));
        let t = Segment::new(Point::new(0.0, 2.0), Point::new(2.0, 0.0));
        assert!(segments_cross(&s, &t));
        let u = Segment::new(Point::new(2.0, 2.0), Point::new(3.0, 0.0));
        assert!(!segments_cross(&s, &u));
        let v = Segment::new(Point::new(1.0, 1.0), Point::new(3.0, 3.0));
        assert!(segments_cross(&s, &v));
    }

    #[test]
    fn lattice_offsets_halve_exactly() {
        let bbox = Rect::new(-3.0, 2.0, 120.0, 77.0);
        let lat = Lattice::for_extent(&bbox);
        let offsets = lat.octagon_offsets(2.0, 26).unwrap();
        for o in offsets {
            let mut v = o;
            for _ in 0..26 {
                v = v * 0.5;
                assert_eq!(lat.snap(v), v);
            }
        }
    }
}
