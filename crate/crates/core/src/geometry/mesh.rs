use std::collections::HashMap;

use spade::handles::FixedVertexHandle;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{segments_cross, GeometryError, NodeBoundary, Point, Segment};

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

/// Everything the mesh generator needs.
#[derive(Clone, Debug, Default)]
pub struct MeshInput<'a> {
    pub boundaries: &'a [NodeBoundary],
    /// Fixed segments that must be traceable in the output (prior rails).
    pub segments: &'a [Segment],
    /// Free points, e.g. the corners of the bounding frame.
    pub points: &'a [Point],
    /// Minimum triangle angle in degrees, only used when `refine` is set.
    pub min_angle: f64,
    pub refine: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshEdge {
    /// Vertex indices, `v[0] < v[1]`.
    pub v: [usize; 2],
    pub length: f64,
    pub constrained: bool,
}

/// Constrained triangulation of node boundaries and fixed segments.
///
/// Each boundary contributes its center, its polygon sides and the spokes
/// from the center to every polygon vertex. Routes enter and leave a node
/// through a spoke; spokes of other nodes are off limits.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub edges: Vec<MeshEdge>,
    /// Input segment each mesh edge subdivides, if any.
    pub constraint_parent: Vec<Option<usize>>,
    /// Mesh edges covering each input segment, ordered from `a` to `b`.
    pub segment_children: Vec<Vec<usize>>,
    /// Center vertex of each boundary.
    pub centers: Vec<usize>,
    /// Polygon vertex indices of each boundary.
    pub boundary_vertices: Vec<Vec<usize>>,
    /// Boundary whose interior an edge runs through, if any.
    pub interior_of: Vec<Option<usize>>,
    adjacency: Vec<Vec<(usize, usize)>>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl Mesh {
    /// Neighbors of a vertex as `(neighbor, edge)`, sorted by neighbor index.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn edge_segment(&self, e: usize) -> Segment {
        let [a, b] = self.edges[e].v;
        Segment::new(self.vertices[a], self.vertices[b])
    }

    /// Whether a route from boundary `source` to boundary `target` may use edge `e`.
    pub fn edge_allowed(&self, e: usize, source: usize, target: usize) -> bool {
        match self.interior_of[e] {
            Some(owner) => owner == source || owner == target,
            None => true,
        }
    }

    pub fn triangle_count(&self) -> usize {
        let mut count = 0;
        for (a, adj) in self.adjacency.iter().enumerate() {
            for &(b, _) in adj.iter().filter(|(b, _)| *b > a) {
                for &(c, _) in self.adjacency[b].iter().filter(|(c, _)| *c > b) {
                    if self.edge_between(a, c).is_some() && self.is_face(a, b, c) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    /// A vertex triple that is mutually adjacent is a face unless some other
    /// vertex lies inside it.
    fn is_face(&self, a: usize, b: usize, c: usize) -> bool {
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let area = (pb - pa).cross(pc - pa);
        if area == 0.0 {
            return false;
        }
        !self.adjacency[a].iter().any(|&(d, _)| {
            if d == b || d == c {
                return false;
            }
            let pd = self.vertices[d];
            let s1 = (pb - pa).cross(pd - pa) * area;
            let s2 = (pc - pb).cross(pd - pb) * area;
            let s3 = (pa - pc).cross(pd - pc) * area;
            s1 > 0.0 && s2 > 0.0 && s3 > 0.0
        })
    }

    /// Minimum interior angle over all faces, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut best = 180.0f64;
        for (a, adj) in self.adjacency.iter().enumerate() {
            for &(b, _) in adj.iter().filter(|(b, _)| *b > a) {
                for &(c, _) in self.adjacency[b].iter().filter(|(c, _)| *c > b) {
                    if self.edge_between(a, c).is_some() && self.is_face(a, b, c) {
                        let p = [self.vertices[a], self.vertices[b], self.vertices[c]];
                        for i in 0..3 {
                            let u = p[(i + 1) % 3] - p[i];
                            let v = p[(i + 2) % 3] - p[i];
                            let ang = u.cross(v).abs().atan2(u.dot(v)).to_degrees();
                            best = best.min(ang);
                        }
                    }
                }
            }
        }
        best
    }
}

fn to_spade(p: Point) -> Point2<f64> {
    Point2::new(p.x, p.y)
}

#[derive(Clone, Copy, Debug)]
enum ConstraintKind {
    Segment(usize),
    Side(usize, usize),
    Spoke(usize, usize),
}

impl ConstraintKind {
    fn describe(self) -> String {
        match self {
            ConstraintKind::Segment(i) => format!("segment #{i}"),
            ConstraintKind::Side(b, k) => format!("side {k} of boundary #{b}"),
            ConstraintKind::Spoke(b, k) => format!("spoke {k} of boundary #{b}"),
        }
    }
}

/// Build the constrained triangulation. Deterministic for a fixed input order.
pub fn generate_mesh(input: &MeshInput<'_>) -> Result<Mesh, GeometryError> {
    let mut cdt = Cdt::new();
    let insert = |cdt: &mut Cdt, p: Point| -> Result<FixedVertexHandle, GeometryError> {
        if !p.is_finite() {
            return Err(GeometryError::InvalidPoint(p));
        }
        cdt.insert(to_spade(p)).map_err(|_| GeometryError::InvalidPoint(p))
    };

    for &p in input.points {
        insert(&mut cdt, p)?;
    }
    let mut center_handles = Vec::with_capacity(input.boundaries.len());
    let mut polygon_handles = Vec::with_capacity(input.boundaries.len());
    for b in input.boundaries {
        center_handles.push(insert(&mut cdt, b.center)?);
        let mut hs = Vec::with_capacity(b.polygon.len());
        for &p in &b.polygon {
            hs.push(insert(&mut cdt, p)?);
        }
        polygon_handles.push(hs);
    }
    let mut segment_handles = Vec::with_capacity(input.segments.len());
    for s in input.segments {
        segment_handles.push((insert(&mut cdt, s.a)?, insert(&mut cdt, s.b)?));
    }

    // Constraint order: fixed segments, then polygon sides, then spokes.
    let mut constraints: Vec<(ConstraintKind, FixedVertexHandle, FixedVertexHandle, Segment)> = Vec::new();
    for (i, (s, &(ha, hb))) in input.segments.iter().zip(&segment_handles).enumerate() {
        constraints.push((ConstraintKind::Segment(i), ha, hb, *s));
    }
    for (bi, (b, hs)) in input.boundaries.iter().zip(&polygon_handles).enumerate() {
        let k = hs.len();
        for j in 0..k {
            let seg = Segment::new(b.polygon[j], b.polygon[(j + 1) % k]);
            constraints.push((ConstraintKind::Side(bi, j), hs[j], hs[(j + 1) % k], seg));
        }
    }
    for (bi, (b, hs)) in input.boundaries.iter().zip(&polygon_handles).enumerate() {
        for (j, &h) in hs.iter().enumerate() {
            let seg = Segment::new(b.center, b.polygon[j]);
            constraints.push((ConstraintKind::Spoke(bi, j), center_handles[bi], h, seg));
        }
    }

    for (idx, &(kind, ha, hb, seg)) in constraints.iter().enumerate() {
        if ha == hb {
            continue;
        }
        if !cdt.can_add_constraint(ha, hb) {
            let other = constraints[..idx]
                .iter()
                .find(|(_, _, _, s)| segments_cross(&seg, s))
                .map(|&(k, _, _, s)| (k.describe(), s))
                .unwrap_or_else(|| ("an earlier constraint".to_string(), seg));
            return Err(GeometryError::CrossingConstraints {
                first: other.0,
                first_seg: other.1,
                second: kind.describe(),
                second_seg: seg,
            });
        }
        cdt.try_add_constraint(ha, hb);
    }

    if input.refine {
        let limit = input.min_angle.clamp(0.0, 33.0);
        let params = RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(limit))
            .with_max_additional_vertices(10 * cdt.num_vertices() + 16);
        cdt.refine(params);
    }

    let vertices: Vec<Point> = cdt
        .vertices()
        .map(|v| {
            let p = v.position();
            Point::new(p.x, p.y)
        })
        .collect();
    let mut edges = Vec::with_capacity(cdt.num_undirected_edges());
    for e in cdt.undirected_edges() {
        let [a, b] = e.vertices();
        let (a, b) = (a.fix().index(), b.fix().index());
        let v = [a.min(b), a.max(b)];
        edges.push(MeshEdge {
            v,
            length: vertices[v[0]].dist(vertices[v[1]]),
            constrained: cdt.is_constraint_edge(e.fix()),
        });
    }
    // spade's edge order is deterministic, but sort for a canonical layout
    edges.sort_by_key(|e| e.v);

    let mut adjacency = vec![Vec::new(); vertices.len()];
    let mut edge_index = HashMap::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        adjacency[e.v[0]].push((e.v[1], i));
        adjacency[e.v[1]].push((e.v[0], i));
        edge_index.insert((e.v[0], e.v[1]), i);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }

    let mut mesh = Mesh {
        vertices,
        constraint_parent: vec![None; edges.len()],
        segment_children: Vec::with_capacity(input.segments.len()),
        centers: center_handles.iter().map(|h| h.index()).collect(),
        boundary_vertices: polygon_handles.iter().map(|hs| hs.iter().map(|h| h.index()).collect()).collect(),
        interior_of: vec![None; edges.len()],
        edges,
        adjacency,
        edge_index,
    };

    for (i, &(ha, hb)) in segment_handles.iter().enumerate() {
        let children = trace_constraint(&mesh, ha.index(), hb.index()).ok_or(GeometryError::ConstraintLost(i))?;
        for &e in &children {
            mesh.constraint_parent[e] = Some(i);
        }
        mesh.segment_children.push(children);
    }
    mark_interiors(&mut mesh, input.boundaries);
    Ok(mesh)
}

/// Walk constraint edges from `from` to `to` along the straight line between them.
fn trace_constraint(mesh: &Mesh, from: usize, to: usize) -> Option<Vec<usize>> {
    if from == to {
        return Some(Vec::new());
    }
    let a = mesh.vertices[from];
    let dir = mesh.vertices[to] - a;
    let len2 = dir.dot(dir);
    let len = len2.sqrt();
    let mut out = Vec::new();
    let mut cur = from;
    let mut t_cur = 0.0;
    while cur != to {
        let mut best: Option<(f64, usize, usize)> = None;
        for &(nb, e) in mesh.neighbors(cur) {
            if !mesh.edges[e].constrained {
                continue;
            }
            let rel = mesh.vertices[nb] - a;
            let t = rel.dot(dir) / len2;
            let off = rel.cross(dir).abs() / len;
            if off > 1e-9 * len || t <= t_cur || t > 1.0 + 1e-12 {
                continue;
            }
            if best.is_none_or(|(bt, _, _)| t < bt) {
                best = Some((t, nb, e));
            }
        }
        let (t, nb, e) = best?;
        out.push(e);
        cur = nb;
        t_cur = t;
        if out.len() > mesh.edges.len() {
            return None;
        }
    }
    Some(out)
}

/// Flag edges that run through the interior of a node polygon. Spokes touch
/// the center; refinement may add further interior vertices and chords.
fn mark_interiors(mesh: &mut Mesh, boundaries: &[NodeBoundary]) {
    if boundaries.is_empty() {
        return;
    }
    let max_r = boundaries.iter().map(|b| b.radius).fold(0.0, f64::max);
    if max_r <= 0.0 {
        return;
    }
    let cell = 2.0 * max_r;
    let key = |p: Point| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, b) in boundaries.iter().enumerate() {
        grid.entry(key(b.center)).or_default().push(i);
    }
    let inner: Vec<f64> = boundaries.iter().map(|b| b.inner_radius()).collect();
    let owner_of = |p: Point| -> Option<usize> {
        let (cx, cy) = key(p);
        let mut found = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = grid.get(&(cx + dx, cy + dy)) {
                    for &i in list {
                        if p.dist(boundaries[i].center) < inner[i] * (1.0 - 1e-9) {
                            found = Some(found.map_or(i, |f: usize| f.min(i)));
                        }
                    }
                }
            }
        }
        found
    };
    let vertex_owner: Vec<Option<usize>> = mesh.vertices.iter().map(|&p| owner_of(p)).collect();
    for (e, edge) in mesh.edges.iter().enumerate() {
        let [a, b] = edge.v;
        let mid = (mesh.vertices[a] + mesh.vertices[b]) * 0.5;
        mesh.interior_of[e] = vertex_owner[a].or(vertex_owner[b]).or_else(|| owner_of(mid));
    }
}
