use std::collections::HashMap;

use super::overlap::OverlapCanvas;
use super::tiles::TileCounter;
use super::{BuildParams, Layer, LayerError, LayerSet, Rail};
use crate::geometry::{
    generate_mesh, route, Lattice, Mesh, MeshInput, NodeBoundary, Point, Rect, Segment, BOUNDARY_SIDES,
};
use crate::ingest::RankedGraph;

/// Relative tolerance (times `diag(B)`) for the inflated tile tests and the
/// geometric containment assertions.
pub const TOLERANCE: f64 = 1e-9;

/// Extra halvings of headroom in the octagon lattice beyond the layer cap.
const LATTICE_SPARE_HALVINGS: u32 = 2;

/// Whether `inner` lies on `outer`, within `tol`.
pub fn segment_covers(outer: &Segment, inner: &Segment, tol: f64) -> bool {
    outer.distance_to(inner.a) <= tol && outer.distance_to(inner.b) <= tol
}

/// The mesh edges among `route_edges` that are not already rails of the
/// layer being built (carried from the previous layer or added earlier),
/// deduplicated, in first-appearance order. These are new maximal rails.
pub fn find_maximal_rails(route_edges: &[usize], rail_of_edge: &[Option<usize>]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &e in route_edges {
        if rail_of_edge[e].is_none() && !out.contains(&e) {
            out.push(e);
        }
    }
    out
}

fn snap_outward(lattice: &Lattice, r: &Rect) -> Rect {
    let s = lattice.step;
    Rect::new((r.min_x / s).floor() * s, (r.min_y / s).floor() * s, (r.max_x / s).ceil() * s, (r.max_y / s).ceil() * s)
}

struct State<'g> {
    graph: &'g RankedGraph,
    params: BuildParams,
    lattice: Lattice,
    offsets0: Vec<Point>,
    frame: [Point; 4],
    eps: f64,
    initial: Vec<Point>,
    adjacency: Vec<Vec<(usize, usize)>>,
    position: Vec<Option<Point>>,
    layer_of: Vec<Option<u32>>,
    /// Committed nodes, in commit order (always a prefix of the order).
    assigned: Vec<usize>,
    maximal: Vec<Segment>,
    /// Per node and boundary direction, the farthest route terminal: the
    /// stub from the center to it is drawn as part of the node.
    stubs: Vec<[Option<Point>; BOUNDARY_SIDES]>,
    /// Per graph edge, the route terminals at its first and second endpoint.
    terminals: Vec<Option<(Point, Point)>>,
    next_rail_id: usize,
    layers: Vec<Layer>,
}

/// Assign every node a zoom level and route every edge, layer by layer,
/// keeping each tile of each layer within the node and rail quotas.
pub fn build_layers(graph: &RankedGraph, params: BuildParams) -> Result<LayerSet, LayerError> {
    params.validate()?;
    if graph.is_empty() {
        return Err(LayerError::Empty);
    }
    let bbox = graph.bbox;
    let lattice = Lattice::for_extent(&bbox.inflate(graph.node_radius));
    let offsets0 = lattice.octagon_offsets(graph.node_radius, params.max_layers + LATTICE_SPARE_HALVINGS)?;
    let frame = snap_outward(&lattice, &bbox.inflate(graph.node_radius)).corners();
    let n = graph.len();
    let mut adjacency = vec![Vec::new(); n];
    for (e, &(a, b)) in graph.edges.iter().enumerate() {
        adjacency[a].push((b, e));
        adjacency[b].push((a, e));
    }
    let mut rank = vec![0; n];
    for (i, &v) in graph.order.iter().enumerate() {
        rank[v] = i;
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(u, e)| (rank[u], e));
    }
    let mut st = State {
        graph,
        params,
        lattice,
        offsets0,
        frame,
        eps: TOLERANCE * bbox.diag(),
        initial: graph.positions.iter().map(|&p| lattice.snap(p)).collect(),
        adjacency,
        position: vec![None; n],
        layer_of: vec![None; n],
        assigned: Vec::new(),
        maximal: Vec::new(),
        stubs: vec![[None; BOUNDARY_SIDES]; n],
        terminals: vec![None; graph.edges.len()],
        next_rail_id: 0,
        layers: Vec::new(),
    };
    for level in 0..params.max_layers {
        let forced = params.force_final_layer && level + 1 == params.max_layers;
        process_layer(&mut st, level, forced)?;
        if st.assigned.len() == n {
            break;
        }
    }
    if st.assigned.len() < n {
        return Err(LayerError::LayerCap { max_layers: params.max_layers, unassigned: n - st.assigned.len() });
    }
    Ok(LayerSet {
        bbox,
        params,
        positions: st.position.into_iter().map(|p| p.expect("all assigned")).collect(),
        layer_of: st.layer_of.into_iter().map(|z| z.expect("all assigned")).collect(),
        layers: st.layers,
        terminals: st.terminals.into_iter().map(|t| t.expect("all routed")).collect(),
        order: graph.order.clone(),
        edges: graph.edges.clone(),
    })
}

/// One call of the per-layer procedure. Returns the number of nodes
/// committed to layer `level`.
fn process_layer(st: &mut State<'_>, level: u32, forced: bool) -> Result<usize, LayerError> {
    let graph = st.graph;
    let scale = 2f64.powi(-(level as i32));
    let radius = graph.node_radius * scale;
    let offsets: Vec<Point> = st.offsets0.iter().map(|&o| o * scale).collect();
    let node_limit = st.params.qn / 4;
    let rail_limit = st.params.qr / 4;
    let prev_rails: Vec<Rail> = st.layers.last().map(|l| l.rails.clone()).unwrap_or_default();

    // Tile map over assigned nodes and all maximal rails so far.
    let mut counter = TileCounter::new(&graph.bbox, level, st.eps, &st.maximal);
    let mut canvas = OverlapCanvas::for_layer(graph.bbox, 2.0 * radius);
    if forced {
        canvas.search_rings = None;
    }
    for &v in &st.assigned {
        let p = st.position[v].expect("assigned");
        counter.add_node(p, radius);
        canvas.add_disk(p, radius);
    }
    for r in &prev_rails {
        canvas.add_segment(r.segment());
    }
    let stubs = stub_segments(st);
    for (_, s) in &stubs {
        canvas.add_segment(*s);
    }

    // Candidates: unassigned nodes in order, each moved clear of everything
    // placed so far, until one would overfill a tile.
    let mut candidates: Vec<(usize, Point)> = Vec::new();
    for &v in &graph.order[st.assigned.len()..] {
        let Some(p) = canvas.place(st.initial[v]) else {
            if forced {
                return Err(LayerError::ForcedPlacement {
                    layer: level,
                    source: super::OverlapError::Saturated { index: v, position: st.initial[v] },
                });
            }
            break;
        };
        let p = st.lattice.snap(p);
        if !forced && counter.node_would_exceed(p, radius, node_limit) {
            break;
        }
        counter.add_node(p, radius);
        canvas.add_disk(p, radius);
        candidates.push((v, p));
    }

    // Mesh over assigned and candidate boundaries plus the previous rails.
    let mut boundary_of = HashMap::with_capacity(st.assigned.len() + candidates.len());
    let mut boundaries = Vec::with_capacity(st.assigned.len() + candidates.len());
    for &v in &st.assigned {
        boundary_of.insert(v, boundaries.len());
        boundaries.push(NodeBoundary::with_offsets(st.position[v].expect("assigned"), radius, &offsets));
    }
    for &(v, p) in &candidates {
        boundary_of.insert(v, boundaries.len());
        boundaries.push(NodeBoundary::with_offsets(p, radius, &offsets));
    }
    let mut segments: Vec<Segment> = prev_rails.iter().map(Rail::segment).collect();
    segments.extend(stubs.iter().map(|(_, s)| *s));
    let mut mesh = generate_mesh(&MeshInput {
        boundaries: &boundaries,
        segments: &segments,
        points: &st.frame,
        min_angle: st.params.min_angle,
        refine: st.params.refine,
    })?;
    for (i, (owner, _)) in stubs.iter().enumerate() {
        for &e in &mesh.segment_children[prev_rails.len() + i] {
            mesh.interior_of[e] = Some(boundary_of[owner]);
        }
    }

    // Previous rails carry over, split where the mesh splits them.
    let mut rails: Vec<Rail> = Vec::new();
    let mut rail_of_edge: Vec<Option<usize>> = vec![None; mesh.edges.len()];
    for (i, prev) in prev_rails.iter().enumerate() {
        for &e in &mesh.segment_children[i] {
            let s = mesh.edge_segment(e);
            debug_assert!(segment_covers(&prev.segment(), &s, st.eps));
            rail_of_edge[e] = Some(rails.len());
            rails.push(Rail {
                id: 0,
                a: s.a,
                b: s.b,
                layer: level,
                edges: prev.edges.clone(),
                source: Some(prev.id),
                cover: Some(prev.maximal_id()),
            });
        }
    }
    let carried = rails.len();

    let mut committed = 0;
    let mut is_rail: Vec<bool> = rail_of_edge.iter().map(Option::is_some).collect();
    for &(v, p) in &candidates {
        let routes = route_candidate(st, &mesh, &boundary_of, &mut is_rail, v)?;
        let all_edges: Vec<usize> = routes.iter().flat_map(|r| r.rails.iter().copied()).collect();
        let new_edges = find_maximal_rails(&all_edges, &rail_of_edge);
        let new_segments: Vec<Segment> = new_edges.iter().map(|&e| mesh.edge_segment(e)).collect();
        if !forced && counter.rails_would_exceed(&new_segments, rail_limit) {
            for &e in &new_edges {
                is_rail[e] = false;
            }
            break;
        }
        st.layer_of[v] = Some(level);
        st.position[v] = Some(p);
        st.assigned.push(v);
        committed += 1;
        for (&e, &s) in new_edges.iter().zip(&new_segments) {
            counter.add_rail(s);
            st.maximal.push(s);
            rail_of_edge[e] = Some(rails.len());
            rails.push(Rail { id: 0, a: s.a, b: s.b, layer: level, edges: Vec::new(), source: None, cover: None });
        }
        for r in &routes {
            for &e in &r.rails {
                let idx = rail_of_edge[e].expect("route edge is a rail after commit");
                rails[idx].edges.push(r.edge);
            }
            let (a, _) = graph.edges[r.edge];
            st.terminals[r.edge] = Some(if a == v { (r.near, r.far) } else { (r.far, r.near) });
            let u = if a == v { graph.edges[r.edge].1 } else { a };
            add_stub(st, v, r.near);
            add_stub(st, u, r.far);
        }
    }
    debug_assert!(rails[..carried].iter().all(|r| !r.is_maximal()));

    for r in &mut rails {
        r.id = st.next_rail_id;
        st.next_rail_id += 1;
        r.edges.sort_unstable();
        r.edges.dedup();
    }
    st.layers.push(Layer {
        index: level,
        node_radius: radius,
        nodes: st.assigned.clone(),
        stubs: st.assigned.iter().map(|&v| st.stubs[v].iter().flatten().copied().collect()).collect(),
        rails,
        forced,
    });
    Ok(committed)
}

fn stub_segments(st: &State<'_>) -> Vec<(usize, Segment)> {
    let mut out = Vec::new();
    for &v in &st.assigned {
        let c = st.position[v].expect("assigned");
        for tip in st.stubs[v].iter().flatten() {
            out.push((v, Segment::new(c, *tip)));
        }
    }
    out
}

fn add_stub(st: &mut State<'_>, v: usize, terminal: Point) {
    let c = st.position[v].expect("assigned");
    let dir = terminal - c;
    let Some(k) = (0..BOUNDARY_SIDES).max_by(|&a, &b| {
        let da = dir.dot(st.offsets0[a]) / st.offsets0[a].norm();
        let db = dir.dot(st.offsets0[b]) / st.offsets0[b].norm();
        da.total_cmp(&db).then(b.cmp(&a))
    }) else {
        return;
    };
    let slot = &mut st.stubs[v][k];
    if slot.is_none_or(|tip| tip.dist(c) < terminal.dist(c)) {
        *slot = Some(terminal);
    }
}

/// One routed graph edge: the mesh edges outside both endpoint nodes, and
/// the route terminals where it leaves the near node and enters the far one.
struct EdgeRoute {
    edge: usize,
    rails: Vec<usize>,
    near: Point,
    far: Point,
}

/// Route every edge from `v` to an already committed neighbor, in neighbor
/// rank order. Edges used by earlier routes of `v` are discounted for later
/// ones; they are left flagged in `is_rail`.
fn route_candidate(
    st: &State<'_>,
    mesh: &Mesh,
    boundary_of: &HashMap<usize, usize>,
    is_rail: &mut [bool],
    v: usize,
) -> Result<Vec<EdgeRoute>, LayerError> {
    let mut routes = Vec::new();
    for &(u, graph_edge) in &st.adjacency[v] {
        if st.layer_of[u].is_none() {
            continue;
        }
        let (bv, bu) = (boundary_of[&v], boundary_of[&u]);
        let r = route(mesh, bv, bu, st.params.rail_discount, is_rail)?;
        let inside = |e: usize, b: usize| mesh.interior_of[e] == Some(b);
        let start = r.edges.iter().position(|&e| !inside(e, bv)).unwrap_or(r.edges.len());
        let end = r.edges.iter().rposition(|&e| !inside(e, bu)).map_or(start, |i| (i + 1).max(start));
        let rails = r.edges[start..end].to_vec();
        for &e in &rails {
            is_rail[e] = true;
        }
        routes.push(EdgeRoute {
            edge: graph_edge,
            rails,
            near: mesh.vertices[r.vertices[start]],
            far: mesh.vertices[r.vertices[end]],
        });
    }
    Ok(routes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximal_rails_skip_known_edges() {
        let known = vec![None, Some(0), None, None];
        assert_eq!(find_maximal_rails(&[2, 1, 2, 0], &known), vec![2, 0]);
        assert!(find_maximal_rails(&[1], &known).is_empty());
    }

    #[test]
    fn covers_with_tolerance() {
        let outer = Segment::new(Point::new(0.0, 0.0), Point::new(2.0, 0.0));
        assert!(segment_covers(&outer, &outer, 0.0));
        assert!(segment_covers(&outer, &Segment::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0)), 0.0));
        assert!(!segment_covers(&outer, &Segment::new(Point::new(2.0, 0.0), Point::new(3.0, 0.0)), 1e-9));
    }
}
