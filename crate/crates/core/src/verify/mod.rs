//! Executable checks of the quota guarantees and structural invariants of a
//! built layer set.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstar::primitives::{GeomWithData, Line};
use rstar::{RTree, AABB};
use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Rect, Segment};
use crate::layers::{crowded_tiles, Crowding, Entity, LayerSet, TileGrid};

/// `l(H) = min(w(B) / w(H), h(B) / h(H))`.
pub fn zoom_level(h: &Rect, b: &Rect) -> f64 {
    (b.width() / h.width()).min(b.height() / h.height())
}

/// `max(0, floor(log2 Z))`, with `log2 Z` snapped to an integer when it is
/// within rounding noise of one, so a viewport built from a layer-n tile
/// lands on layer n.
pub fn layer_index(z: f64) -> u32 {
    let l = z.log2();
    let r = l.round();
    let l = if (l - r).abs() <= 1e-12 * r.abs().max(1.0) { r } else { l.floor() };
    if l.is_nan() || l < 1.0 {
        0
    } else {
        l as u32
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleSet {
    pub layer: u32,
    pub nodes: Vec<usize>,
    pub rails: Vec<usize>,
    /// Maximal rails covering `rails`.
    pub maximal: Vec<usize>,
}

type Indexed = GeomWithData<Line<[f64; 2]>, usize>;

fn aabb(r: &Rect) -> AABB<[f64; 2]> {
    AABB::from_corners([r.min_x, r.min_y], [r.max_x, r.max_y])
}

fn line(s: Segment) -> Line<[f64; 2]> {
    Line::new([s.a.x, s.a.y], [s.b.x, s.b.y])
}

/// Per-layer spatial indexes for answering viewport queries.
pub struct Viewer<'a> {
    pub set: &'a LayerSet,
    nodes: Vec<RTree<Indexed>>,
    rails: Vec<RTree<Indexed>>,
}

impl<'a> Viewer<'a> {
    pub fn new(set: &'a LayerSet) -> Self {
        let nodes = set
            .layers
            .iter()
            .map(|l| {
                RTree::bulk_load(
                    l.nodes
                        .iter()
                        .map(|&v| {
                            let p = set.positions[v];
                            GeomWithData::new(line(Segment::new(p, p)), v)
                        })
                        .collect(),
                )
            })
            .collect();
        let rails = set
            .layers
            .iter()
            .map(|l| {
                RTree::bulk_load(
                    l.rails.iter().enumerate().map(|(i, r)| GeomWithData::new(line(r.segment()), i)).collect(),
                )
            })
            .collect();
        Self { set, nodes, rails }
    }

    pub fn layer_for(&self, p: &Rect) -> u32 {
        let last = self.set.layers.len() as u32 - 1;
        layer_index(zoom_level(p, &self.set.bbox)).min(last)
    }

    /// Nodes and rails of the layer selected by `p` that intersect `p`.
    pub fn visible_set(&self, p: &Rect) -> VisibleSet {
        let n = self.layer_for(p);
        let layer = &self.set.layers[n as usize];
        let r = layer.node_radius;
        let mut nodes: Vec<usize> = self.nodes[n as usize]
            .locate_in_envelope_intersecting(aabb(&p.inflate(r)))
            .map(|g| g.data)
            .filter(|&v| p.intersects_disk(self.set.positions[v], r))
            .collect();
        nodes.sort_unstable();
        let mut rails = Vec::new();
        let mut maximal = BTreeSet::new();
        for g in self.rails[n as usize].locate_in_envelope_intersecting(aabb(p)) {
            let rail = &layer.rails[g.data];
            if p.intersects_segment(rail.a, rail.b) {
                rails.push(rail.id);
                maximal.insert(rail.maximal_id());
            }
        }
        rails.sort_unstable();
        VisibleSet { layer: n, nodes, rails, maximal: maximal.into_iter().collect() }
    }
}

/// Convenience wrapper building the indexes for a single query.
pub fn visible_set(set: &LayerSet, p: &Rect) -> VisibleSet {
    Viewer::new(set).visible_set(p)
}

/// Seeded viewports: zoom log-uniform in `[0.25, 2^(k+2)]` for `k` layers,
/// aspect chosen so that `l(P)` equals the drawn zoom, center uniform over
/// `B` scaled by 1.5 about its center.
pub fn sample_viewports(bbox: &Rect, layer_count: usize, samples: usize, seed: u64) -> Vec<Rect> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (0.25f64.ln(), (2f64.powi(layer_count as i32 + 2)).ln());
    let c = bbox.center();
    let (w, h) = (bbox.width(), bbox.height());
    (0..samples)
        .map(|_| {
            let z = rng.random_range(lo..hi).exp();
            let shrink = rng.random_range(0.25..=1.0);
            let (pw, ph) = if rng.random_bool(0.5) { (w / z, h / z * shrink) } else { (w / z * shrink, h / z) };
            let center = Point::new(c.x + rng.random_range(-0.75..0.75) * w, c.y + rng.random_range(-0.75..0.75) * h);
            Rect::from_center(center, pw, ph)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: String,
    pub layer: u32,
    pub detail: String,
    /// Violations on a forced final layer are expected and reported apart.
    pub on_forced_layer: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuotaReport {
    pub samples: usize,
    pub seed: u64,
    pub qn: u32,
    pub qr: u32,
    pub max_nodes: usize,
    pub max_maximal_rails: usize,
    pub max_tile_nodes: usize,
    pub max_tile_rails: usize,
    pub max_tiles_per_viewport: usize,
    pub tiles_checked: usize,
    pub forced_layer: Option<u32>,
    pub violations: Vec<Violation>,
}

impl QuotaReport {
    /// No violation outside a forced final layer.
    pub fn passed(&self) -> bool {
        self.violations.iter().all(|v| v.on_forced_layer)
    }

    pub fn node_ratio(&self) -> f64 {
        self.max_nodes as f64 / self.qn as f64
    }

    pub fn rail_ratio(&self) -> f64 {
        self.max_maximal_rails as f64 / self.qr as f64
    }
}

/// Closed-tile counts of one layer: node disks and distinct maximal rails.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TileCrowding {
    pub nodes: Crowding,
    pub rails: Crowding,
}

/// Exhaustive per-tile check of layer `n` against `node_limit` and
/// `rail_limit`, with the exact maximum of each count.
pub fn tile_crowding(set: &LayerSet, n: usize, node_limit: usize, rail_limit: usize) -> TileCrowding {
    let layer = &set.layers[n];
    let grid = TileGrid::new(&set.bbox, layer.index);
    let mut counts: HashMap<(i64, i64), usize> = HashMap::new();
    for &v in &layer.nodes {
        let disk = Entity::Disk { center: set.positions[v], radius: layer.node_radius };
        for t in grid.tiles_of(&disk, 0.0) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut over: Vec<((i64, i64), usize)> =
        counts.iter().filter(|(_, &c)| c > node_limit).map(|(&t, &c)| (t, c)).collect();
    over.sort_unstable();
    let nodes = Crowding { max: counts.values().copied().max().unwrap_or(0), over, tiles: counts.len() };

    let index: RTree<Indexed> =
        RTree::bulk_load(layer.rails.iter().map(|r| GeomWithData::new(line(r.segment()), r.maximal_id())).collect());
    let top = TileGrid::new(&set.bbox, 0);
    let roots: Vec<(i64, i64)> =
        layer.rails.iter().flat_map(|r| top.tiles_of(&Entity::Segment(r.segment()), 0.0)).collect();
    let rails = crowded_tiles(&set.bbox, layer.index, 0.0, rail_limit, true, roots, |rect| {
        index
            .locate_in_envelope_intersecting(AABB::from_corners([rect.min_x, rect.min_y], [rect.max_x, rect.max_y]))
            .filter(|l| {
                let g = l.geom();
                rect.intersects_segment(Point::new(g.from[0], g.from[1]), Point::new(g.to[0], g.to[1]))
            })
            .map(|l| l.data)
            .collect::<HashSet<usize>>()
            .len()
    });
    TileCrowding { nodes, rails }
}

/// Sampled check of `|V_P| <= Q_N` and `|R_P^max| <= Q_R`, the exhaustive
/// per-tile check of `Q_N / 4` and `Q_R / 4`, and the bound of four tiles
/// met by any viewport of zoom at least 1.
pub fn verify_quotas(set: &LayerSet, samples: usize, seed: u64) -> QuotaReport {
    let (qn, qr) = (set.params.qn, set.params.qr);
    let forced = set.forced_layer();
    let mut report = QuotaReport { samples, seed, qn, qr, forced_layer: forced, ..Default::default() };
    let violate = |report: &mut QuotaReport, kind: &str, layer: u32, detail: String| {
        report.violations.push(Violation {
            kind: kind.to_string(),
            layer,
            detail,
            on_forced_layer: Some(layer) == forced,
        });
    };

    for n in 0..set.layers.len() {
        let c = tile_crowding(set, n, (qn / 4) as usize, (qr / 4) as usize);
        report.tiles_checked += c.nodes.tiles + c.rails.tiles;
        report.max_tile_nodes = report.max_tile_nodes.max(c.nodes.max);
        report.max_tile_rails = report.max_tile_rails.max(c.rails.max);
        for ((i, j), nodes) in c.nodes.over {
            violate(&mut report, "tile-nodes", n as u32, format!("tile ({i},{j}) meets {nodes} nodes"));
        }
        for ((i, j), rails) in c.rails.over {
            violate(&mut report, "tile-rails", n as u32, format!("tile ({i},{j}) meets {rails} maximal rails"));
        }
    }

    let viewer = Viewer::new(set);
    for p in sample_viewports(&set.bbox, set.layers.len(), samples, seed) {
        let vis = viewer.visible_set(&p);
        report.max_nodes = report.max_nodes.max(vis.nodes.len());
        report.max_maximal_rails = report.max_maximal_rails.max(vis.maximal.len());
        if vis.nodes.len() > qn as usize {
            violate(&mut report, "viewport-nodes", vis.layer, format!("{p:?}: {} nodes", vis.nodes.len()));
        }
        if vis.maximal.len() > qr as usize {
            violate(&mut report, "viewport-rails", vis.layer, format!("{p:?}: {} maximal rails", vis.maximal.len()));
        }
        if vis.layer >= 1 {
            let grid = TileGrid::new(&set.bbox, vis.layer);
            let (i0, i1, j0, j1) = grid.candidate_range(&p);
            let mut met = 0;
            for i in i0..=i1 {
                for j in j0..=j1 {
                    if grid.tile(i, j).intersects(&p) {
                        met += 1;
                    }
                }
            }
            report.max_tiles_per_viewport = report.max_tiles_per_viewport.max(met);
            if met > 4 {
                violate(&mut report, "viewport-tiles", vis.layer, format!("{p:?} meets {met} tiles"));
            }
        }
    }
    report
}

/// A viewport with the entity set a viewer must show for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewportFixture {
    pub name: String,
    pub viewport: Rect,
    pub zoom: f64,
    pub layer: u32,
    pub nodes: Vec<usize>,
    pub rails: Vec<usize>,
    pub maximal: Vec<usize>,
}

/// The whole box, a viewport beside it, tile `(0, 0)` of layer 1 (when
/// present) and `samples` seeded viewports.
pub fn fixture_viewports(set: &LayerSet, samples: usize, seed: u64) -> Vec<ViewportFixture> {
    let b = set.bbox;
    let mut named = vec![
        ("whole".to_string(), b),
        ("outside".to_string(), Rect::new(b.max_x + b.width(), b.min_y, b.max_x + 2.0 * b.width(), b.max_y)),
    ];
    if set.layers.len() > 1 {
        named.push(("layer-1-tile-0-0".to_string(), TileGrid::new(&b, 1).tile(0, 0)));
    }
    for (k, p) in sample_viewports(&b, set.layers.len(), samples, seed).into_iter().enumerate() {
        named.push((format!("sample-{k}"), p));
    }
    let viewer = Viewer::new(set);
    named
        .into_iter()
        .map(|(name, p)| {
            let vis = viewer.visible_set(&p);
            ViewportFixture {
                name,
                viewport: p,
                zoom: zoom_level(&p, &b),
                layer: vis.layer,
                nodes: vis.nodes,
                rails: vis.rails,
                maximal: vis.maximal,
            }
        })
        .collect()
}

/// Every rail of each layer, as a point set, lies on rails of the next
/// layer (within `tol`). Returns a description of each failure.
pub fn check_stability(set: &LayerSet, tol: f64) -> Vec<String> {
    let mut failures = Vec::new();
    for w in set.layers.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        let index: RTree<Indexed> = RTree::bulk_load(
            next.rails.iter().enumerate().map(|(i, r)| GeomWithData::new(line(r.segment()), i)).collect(),
        );
        for r in &prev.rails {
            let s = r.segment();
            let len = s.length();
            if len == 0.0 {
                continue;
            }
            let dir = (s.b - s.a) * (1.0 / len);
            let env = Rect::bounding([s.a, s.b]).expect("points").inflate(tol);
            let mut spans: Vec<(f64, f64)> = index
                .locate_in_envelope_intersecting(aabb(&env))
                .map(|g| next.rails[g.data].segment())
                .filter(|t| s.distance_to(t.a) <= tol && s.distance_to(t.b) <= tol)
                .map(|t| {
                    let (u, v) = ((t.a - s.a).dot(dir), (t.b - s.a).dot(dir));
                    (u.min(v), u.max(v))
                })
                .collect();
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut reach = 0.0f64;
            for (lo, hi) in spans {
                if lo > reach + tol {
                    break;
                }
                reach = reach.max(hi);
            }
            if reach < len - tol {
                failures.push(format!(
                    "layer {} rail {} is not covered by layer {} rails (covered up to {reach} of {len})",
                    prev.index, r.id, next.index
                ));
            }
        }
    }
    failures
}

/// Octagon vertices are snapped to a lattice at least 64 times finer than
/// the radius, so they can stray from the circle by this fraction.
pub const OCTAGON_SNAP_SLACK: f64 = 1.0 / 64.0;

/// For each layer and each edge with both endpoints present: the rails of
/// that layer carrying the edge connect its two terminals, and each terminal
/// lies on its node glyph of that layer (the disk or one of its stubs).
pub fn check_routes(set: &LayerSet, tol: f64) -> Vec<String> {
    let mut failures = Vec::new();
    for layer in &set.layers {
        let slot: HashMap<usize, usize> = layer.nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut by_edge: HashMap<usize, Vec<Segment>> = HashMap::new();
        for r in &layer.rails {
            for &e in &r.edges {
                by_edge.entry(e).or_default().push(r.segment());
            }
        }
        let on_glyph = |v: usize, t: Point| {
            let c = set.positions[v];
            c.dist(t) <= layer.node_radius * (1.0 + OCTAGON_SNAP_SLACK)
                || layer.stubs[slot[&v]].iter().any(|&tip| Segment::new(c, tip).distance_to(t) <= tol)
        };
        // routes start no earlier than the node's own layer, so every stub
        // fits in the node's disk on that layer
        for (&v, stubs) in layer.nodes.iter().zip(&layer.stubs) {
            let reach = set.layers[set.layer_of[v] as usize].node_radius * (1.0 + OCTAGON_SNAP_SLACK) + tol;
            for tip in stubs {
                if set.positions[v].dist(*tip) > reach {
                    failures.push(format!("layer {}: stub {tip:?} of node {v} is longer than its disk", layer.index));
                }
            }
        }
        for (e, &(a, b)) in set.edges.iter().enumerate() {
            if !(slot.contains_key(&a) && slot.contains_key(&b)) {
                continue;
            }
            let (ta, tb) = set.terminals[e];
            for (v, t) in [(a, ta), (b, tb)] {
                if !on_glyph(v, t) {
                    failures.push(format!("layer {}: terminal {t:?} of edge {e} is off node {v}", layer.index));
                }
            }
            let segs = by_edge.get(&e).map(Vec::as_slice).unwrap_or(&[]);
            if !connected(segs, ta, tb) {
                failures.push(format!("layer {}: edge {e} ({a}-{b}) has no connected rail path", layer.index));
            }
        }
    }
    failures
}

fn connected(segs: &[Segment], from: Point, to: Point) -> bool {
    if from == to {
        return true;
    }
    let mut adj: HashMap<(u64, u64), Vec<(u64, u64)>> = HashMap::new();
    for s in segs {
        adj.entry(s.a.bits()).or_default().push(s.b.bits());
        adj.entry(s.b.bits()).or_default().push(s.a.bits());
    }
    let goal = to.bits();
    let mut seen = HashSet::from([from.bits()]);
    let mut queue = VecDeque::from([from.bits()]);
    while let Some(p) = queue.pop_front() {
        if p == goal {
            return true;
        }
        for &q in adj.get(&p).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(q) {
                queue.push_back(q);
            }
        }
    }
    false
}

/// Nodes of each layer form a prefix-closed chain and rails carry the zoom
/// of their layer. Returns failures.
pub fn check_structure(set: &LayerSet) -> Vec<String> {
    let mut failures = Vec::new();
    let rank = set.rank_of();
    for (n, layer) in set.layers.iter().enumerate() {
        if layer.index as usize != n {
            failures.push(format!("layer {n} has index {}", layer.index));
        }
        let expect: Vec<usize> = set.order.iter().copied().filter(|&v| set.layer_of[v] as usize <= n).collect();
        if layer.nodes != expect {
            failures.push(format!("layer {n}: node set differs from {{v : z(v) <= 2^{n}}}"));
        }
        if let Some(w) = set.layers.get(n + 1) {
            if !layer.nodes.iter().all(|v| w.nodes.contains(v)) {
                failures.push(format!("layer {n} nodes missing from layer {}", n + 1));
            }
        }
        if layer.rails.iter().any(|r| r.layer != layer.index) {
            failures.push(format!("layer {n}: rail with foreign z"));
        }
    }
    // assigned levels never decrease along the order
    let mut by_rank: Vec<usize> = (0..set.order.len()).collect();
    by_rank.sort_by_key(|&v| rank[v]);
    if by_rank.windows(2).any(|w| set.layer_of[w[0]] > set.layer_of[w[1]]) {
        failures.push("zoom levels decrease along the order".into());
    }
    failures
}

/// Relative tolerance, scaled by the diagonal of `B`, for geometric
/// containment checks.
pub const GEOMETRIC_TOLERANCE: f64 = 1e-9;

/// Every check run against an exported dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub quotas: QuotaReport,
    pub structure: Vec<String>,
    pub stability: Vec<String>,
    pub routes: Vec<String>,
    pub labels: Vec<String>,
    pub rasters: Vec<String>,
}

impl DatasetReport {
    pub fn passed(&self) -> bool {
        self.quotas.passed()
            && self.structure.is_empty()
            && self.stability.is_empty()
            && self.routes.is_empty()
            && self.labels.is_empty()
            && self.rasters.is_empty()
    }
}

impl std::fmt::Display for DatasetReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let q = &self.quotas;
        writeln!(
            f,
            "quotas: {} viewports (seed {}), max {} / {} nodes, max {} / {} maximal rails, max {} tiles per viewport",
            q.samples, q.seed, q.max_nodes, q.qn, q.max_maximal_rails, q.qr, q.max_tiles_per_viewport
        )?;
        writeln!(
            f,
            "tiles: {} checked, max {} / {} nodes, max {} / {} maximal rails",
            q.tiles_checked,
            q.max_tile_nodes,
            q.qn / 4,
            q.max_tile_rails,
            q.qr / 4
        )?;
        for v in &q.violations {
            let note = if v.on_forced_layer { " (forced layer)" } else { "" };
            writeln!(f, "  {} on layer {}{note}: {}", v.kind, v.layer, v.detail)?;
        }
        for (name, list) in [
            ("structure", &self.structure),
            ("stability", &self.stability),
            ("routes", &self.routes),
            ("labels", &self.labels),
            ("rasters", &self.rasters),
        ] {
            writeln!(
                f,
                "{name}: {}",
                if list.is_empty() { "ok".to_string() } else { format!("{} failures", list.len()) }
            )?;
            for m in list.iter().take(10) {
                writeln!(f, "  {m}")?;
            }
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Run all checks on a loaded dataset whose rasters are `rasters_on_disk`.
pub fn check_dataset(
    ds: &crate::dataset::Dataset,
    rasters_on_disk: &[[i64; 3]],
    samples: usize,
    seed: u64,
) -> DatasetReport {
    let set = &ds.set;
    let tol = GEOMETRIC_TOLERANCE * set.bbox.diag();
    let expected: Vec<[i64; 3]> = crate::dataset::hint_tiles(
        &set.bbox,
        &set.positions,
        &set.layer_of,
        set.layers.len() as u32,
        ds.meta.hint_threshold,
    )
    .iter()
    .map(|t| [t.level as i64, t.i, t.j])
    .collect();
    let mut rasters = Vec::new();
    if expected != rasters_on_disk {
        let want: HashSet<_> = expected.iter().collect();
        let have: HashSet<_> = rasters_on_disk.iter().collect();
        rasters.extend(want.difference(&have).map(|t| format!("missing raster {t:?}")));
        rasters.extend(have.difference(&want).map(|t| format!("unexpected raster {t:?}")));
        rasters.sort();
    }
    DatasetReport {
        quotas: verify_quotas(set, samples, seed),
        structure: check_structure(set),
        stability: check_stability(set, tol),
        routes: check_routes(set, tol),
        labels: crate::labeling::check_labels(set, &ds.labels),
        rasters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zoom_formula() {
        let b = Rect::new(0.0, 0.0, 8.0, 4.0);
        assert_eq!(zoom_level(&b, &b), 1.0);
        assert_eq!(zoom_level(&Rect::new(0.0, 0.0, 2.0, 2.0), &b), 2.0);
    }

    #[test]
    fn layer_formula() {
        assert_eq!(layer_index(0.5), 0);
        assert_eq!(layer_index(1.0), 0);
        assert_eq!(layer_index(8.0), 3);
        assert_eq!(layer_index(9.26), 3);
        assert_eq!(layer_index(7.999), 2);
    }

    #[test]
    fn sampled_viewports_hit_their_zoom() {
        let b = Rect::new(-3.0, 1.0, 17.0, 6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in sample_viewports(&b, 3, 200, rng.random()) {
            let z = zoom_level(&p, &b);
            assert!((0.25 * (1.0 - 1e-12)..=32.0 * (1.0 + 1e-12)).contains(&z), "{z}");
            assert!(p.width() > 0.0 && p.height() > 0.0);
        }
    }
}
