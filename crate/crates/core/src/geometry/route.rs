use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{GeometryError, Mesh};

/// A path of mesh edges between two node centers.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    f: f64,
    v: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // min-heap on (f, v)
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.v.cmp(&self.v))
    }
}

const TIE: f64 = 1e-12;

fn ties(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (a - b).abs() <= TIE * a.abs().max(b.abs()) + f64::MIN_POSITIVE
}

/// Weighted shortest path from the center of boundary `source` to the center
/// of boundary `target`.
///
/// Edge weight is `length * rail_discount` for edges flagged in `rails` and
/// `length` otherwise. Among equal-cost paths the one with the
/// lexicographically smallest vertex sequence wins.
///
/// The search runs A* backwards from the target with the heuristic
/// `rail_discount * distance(v, source)`, which never exceeds the true cost
/// since no edge is cheaper than its discounted length. Every vertex whose
/// key does not exceed the optimum is settled, so each keeps the smallest
/// next hop over all tied optimal continuations.
pub fn route(
    mesh: &Mesh,
    source: usize,
    target: usize,
    rail_discount: f64,
    rails: &[bool],
) -> Result<Route, GeometryError> {
    if !(rail_discount > 0.0 && rail_discount <= 1.0) {
        return Err(GeometryError::BadDiscount(rail_discount));
    }
    let &s = mesh.centers.get(source).ok_or(GeometryError::UnknownBoundary(source))?;
    let &t = mesh.centers.get(target).ok_or(GeometryError::UnknownBoundary(target))?;
    let unroutable = GeometryError::Unroutable { source_node: source, target_node: target };
    if s == t {
        return Err(unroutable);
    }
    let n = mesh.vertices.len();
    let src_pos = mesh.vertices[s];
    let h = |v: usize| rail_discount * mesh.vertices[v].dist(src_pos);
    let weight = |e: usize| {
        let len = mesh.edges[e].length;
        if rails.get(e).copied().unwrap_or(false) {
            len * rail_discount
        } else {
            len
        }
    };

    let mut g = vec![f64::INFINITY; n];
    let mut next = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    g[t] = 0.0;
    heap.push(Entry { f: h(t), v: t });
    while let Some(Entry { f, v }) = heap.pop() {
        let best = g[s];
        if best.is_finite() && f > best && !ties(f, best) {
            break;
        }
        if f > g[v] + h(v) && !ties(f, g[v] + h(v)) {
            continue; // stale
        }
        for &(w, e) in mesh.neighbors(v) {
            if !mesh.edge_allowed(e, source, target) {
                continue;
            }
            let cand = g[v] + weight(e);
            if cand < g[w] && !ties(cand, g[w]) {
                g[w] = cand;
                next[w] = v;
                heap.push(Entry { f: cand + h(w), v: w });
            } else if ties(cand, g[w]) && v < next[w] {
                next[w] = v;
            }
        }
    }
    if !g[s].is_finite() {
        return Err(unroutable);
    }

    let mut vertices = vec![s];
    let mut edges = Vec::new();
    let mut cost = 0.0;
    let mut cur = s;
    while cur != t {
        let nx = next[cur];
        if nx == usize::MAX || vertices.len() > n {
            return Err(unroutable);
        }
        let e =
            mesh.edge_between(cur, nx).ok_or(GeometryError::Unroutable { source_node: source, target_node: target })?;
        cost += weight(e);
        edges.push(e);
        vertices.push(nx);
        cur = nx;
    }
    Ok(Route { vertices, edges, cost })
}
