use std::collections::{BTreeMap, HashMap};

use graphmaps::geometry::{Point, Rect, Segment};
use graphmaps::ingest::{Graph, Node, RankMethod, RankedGraph};
use graphmaps::layers::{
    build_layers, count_tile_intersections, segment_covers, BuildParams, Entity, LayerError, LayerSet, OverlapCanvas,
    TileGrid,
};
use graphmaps::pipeline::{compile, CompileOptions};
use graphmaps::verify::{check_routes, check_stability, check_structure, tile_crowding, verify_quotas};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ABSTRACT: &str = include_str!("data/abstract.dot");

fn graph(positions: &[Point], edges: &[(usize, usize)]) -> Graph {
    let nodes = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| Node { id: format!("n{i}"), label: format!("n{i}"), pos: Some(p), attrs: BTreeMap::new() })
        .collect();
    let mut e: Vec<(usize, usize)> = edges.iter().filter(|(a, b)| a != b).map(|&(a, b)| (a.min(b), a.max(b))).collect();
    e.sort_unstable();
    e.dedup();
    Graph { nodes, edges: e, ..Default::default() }
}

fn ranked(positions: &[Point], edges: &[(usize, usize)]) -> RankedGraph {
    let n = positions.len();
    RankedGraph::new(graph(positions, edges), (0..n).collect(), None).unwrap()
}

fn params(qn: u32, qr: u32) -> BuildParams {
    BuildParams { qn, qr, ..Default::default() }
}

fn star(leaves: usize) -> (Vec<Point>, Vec<(usize, usize)>) {
    let mut pos = vec![Point::new(0.0, 0.0)];
    let mut edges = Vec::new();
    for k in 0..leaves {
        let a = std::f64::consts::TAU * k as f64 / leaves as f64;
        pos.push(Point::new(100.0 * a.cos(), 100.0 * a.sin()));
        edges.push((0, k + 1));
    }
    (pos, edges)
}

/// Every rail lies inside the maximal rail it names.
fn check_covers(set: &LayerSet, tol: f64) -> Vec<String> {
    let maximal: HashMap<usize, Segment> = set
        .layers
        .iter()
        .flat_map(|l| l.rails.iter())
        .filter(|r| r.is_maximal())
        .map(|r| (r.id, r.segment()))
        .collect();
    let mut out = Vec::new();
    for l in &set.layers {
        for r in &l.rails {
            match maximal.get(&r.maximal_id()) {
                Some(m) if segment_covers(m, &r.segment(), tol) => {}
                _ => out.push(format!("layer {} rail {} is not inside maximal rail {}", l.index, r.id, r.maximal_id())),
            }
        }
    }
    out
}

fn assert_invariants(set: &LayerSet) {
    let tol = 1e-9 * set.bbox.diag();
    assert_eq!(check_structure(set), Vec::<String>::new());
    assert_eq!(check_stability(set, tol), Vec::<String>::new());
    assert_eq!(check_routes(set, tol), Vec::<String>::new());
    assert_eq!(check_covers(set, tol), Vec::<String>::new());
}

#[test]
fn k2_with_huge_quotas_is_one_layer() {
    let g = ranked(&[Point::new(0.0, 0.0), Point::new(10.0, 3.0)], &[(0, 1)]);
    let set = build_layers(&g, params(400, 400)).unwrap();
    assert_eq!(set.layers.len(), 1);
    assert_eq!(set.layers[0].nodes, vec![0, 1]);
    assert!(!set.layers[0].rails.is_empty());
    assert!(set.layers[0].rails.iter().all(|r| r.edges == vec![0]));
    assert_invariants(&set);
}

#[test]
fn huge_quotas_commit_everything_at_once() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pos: Vec<Point> =
        (0..30).map(|_| Point::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0))).collect();
    let edges: Vec<(usize, usize)> = (1..30).map(|i| (i, rng.random_range(0..i))).collect();
    let set = build_layers(&ranked(&pos, &edges), params(4000, 4000)).unwrap();
    assert_eq!(set.layers.len(), 1);
    assert_eq!(set.layers[0].nodes.len(), 30);
    assert_invariants(&set);
}

#[test]
fn abstract_graph_layer_structure() {
    let opts = CompileOptions { layout: true, seed: 1, ..Default::default() };
    let c = compile(ABSTRACT, &opts).unwrap();
    let set = &c.set;
    assert_eq!(set.layers.len(), 3);
    let l0 = &set.layers[0].nodes;
    assert!(l0.len() <= 20);
    assert_eq!(l0, &set.order[..l0.len()]);
    let stop = set.layers[1].nodes.len();
    assert!((21..47).contains(&stop), "layer 1 stops at {stop}");
    assert_eq!(set.layers[2].nodes.len(), 47);
    assert_invariants(set);
    let again = compile(ABSTRACT, &opts).unwrap();
    assert_eq!(again.set, c.set);
}

#[test]
fn one_layer_one_tile_view_stays_within_tile_quotas() {
    let opts = CompileOptions { layout: true, seed: 1, ..Default::default() };
    let set = compile(ABSTRACT, &opts).unwrap().set;
    let viewer = graphmaps::verify::Viewer::new(&set);
    let grid = TileGrid::new(&set.bbox, 1);
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let vis = viewer.visible_set(&grid.tile(i, j));
        assert_eq!(vis.layer, 1);
        assert!(vis.nodes.len() <= 20);
        assert!(vis.maximal.len() <= 45);
    }
}

/// Greedy prefix that keeps every closed tile of `level` at or under
/// `limit` node disks, using the final positions.
fn node_quota_prefix(set: &LayerSet, level: u32, limit: usize) -> usize {
    let grid = TileGrid::new(&set.bbox, level);
    let r = set.layers[0].node_radius / 2f64.powi(level as i32);
    let mut counts: HashMap<(i64, i64), usize> = HashMap::new();
    for (k, &v) in set.order.iter().enumerate() {
        let disk = Entity::Disk { center: set.positions[v], radius: r };
        let (i0, i1, j0, j1) = grid.candidate_range(&disk.bounds());
        let tiles: Vec<(i64, i64)> = (i0..=i1)
            .flat_map(|i| (j0..=j1).map(move |j| (i, j)))
            .filter(|&(i, j)| count_tile_intersections(&grid.tile(i, j), &disk))
            .collect();
        if tiles.iter().any(|t| counts.get(t).copied().unwrap_or(0) + 1 > limit) {
            return k;
        }
        for t in tiles {
            *counts.entry(t).or_default() += 1;
        }
    }
    set.order.len()
}

#[test]
fn star_with_small_node_quota() {
    let (pos, edges) = star(100);
    let set = build_layers(&ranked(&pos, &edges), params(8, 180)).unwrap();
    assert_eq!(set.layers[0].nodes, vec![0, 1]);
    assert_eq!(node_quota_prefix(&set, 0, 2), 2);
    let counts: Vec<usize> = set.layers.iter().map(|l| l.nodes.len()).collect();
    for (n, l) in set.layers.iter().enumerate() {
        assert!(l.nodes.len() <= node_quota_prefix(&set, n as u32, 2), "layer {n}: {counts:?}");
    }
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    assert!(counts.windows(2).any(|w| w[0] < w[1]));
    assert_eq!(*counts.last().unwrap(), 101);
    assert_invariants(&set);
    assert!(verify_quotas(&set, 2000, 5).passed());
}

#[test]
fn isolated_candidates_cost_no_rails() {
    let pos: Vec<Point> = (0..10).map(|i| Point::new(i as f64 * 7.0, (i % 3) as f64 * 5.0)).collect();
    let set = build_layers(&ranked(&pos, &[]), params(400, 4)).unwrap();
    assert_eq!(set.layers.len(), 1);
    assert!(set.layers[0].rails.is_empty());
}

#[test]
fn layer_cap_and_forced_final_layer() {
    let (pos, edges) = star(100);
    let g = ranked(&pos, &edges);
    let capped = BuildParams { max_layers: 2, ..params(8, 180) };
    match build_layers(&g, capped) {
        Err(LayerError::LayerCap { max_layers: 2, unassigned }) => assert!(unassigned > 0),
        other => panic!("expected the layer cap, got {other:?}"),
    }
    let forced = build_layers(&g, BuildParams { force_final_layer: true, ..capped }).unwrap();
    assert_eq!(forced.layers.len(), 2);
    assert_eq!(forced.forced_layer(), Some(1));
    assert_eq!(forced.layers[1].nodes.len(), 101);
    assert_invariants(&forced);
    let report = verify_quotas(&forced, 2000, 1);
    assert!(report.passed());
    assert!(!report.violations.is_empty());
    assert!(report.violations.iter().all(|v| v.on_forced_layer && v.layer == 1));
}

#[test]
fn bad_quotas_are_rejected() {
    let g = ranked(&[Point::new(0.0, 0.0), Point::new(1.0, 1.0)], &[(0, 1)]);
    let err = build_layers(&g, params(6, 180)).unwrap_err();
    assert_eq!(err.to_string(), "Q_N must be divisible by 4");
    assert!(build_layers(&g, params(80, 10)).is_err());
}

#[test]
fn coverage_examples() {
    let m = Segment::new(Point::new(0.0, 0.0), Point::new(4.0, 2.0));
    assert!(segment_covers(&m, &m, 1e-9));
    assert!(segment_covers(&m, &Segment::new(Point::new(0.0, 0.0), Point::new(2.0, 1.0)), 1e-9));
    assert!(!segment_covers(&m, &Segment::new(Point::new(4.0, 2.0), Point::new(6.0, 2.0)), 1e-9));
}

#[test]
fn free_pixel_search_matches_brute_force() {
    // 64 x 64 pixels of size 1
    let domain = Rect::new(0.0, 0.0, 64.0, 64.0);
    let d = 4.0;
    let rail = Segment::new(Point::new(3.0, 30.2), Point::new(61.0, 33.7));
    let disk = (Point::new(20.0, 20.0), 2.0);
    let mut canvas = OverlapCanvas::new(domain, d, 1.0, Some(40));
    canvas.add_segment(rail);
    canvas.add_disk(disk.0, disk.1);
    let half_diag = std::f64::consts::FRAC_1_SQRT_2;
    let occupied = |c: i64, r: i64| {
        let p = Point::new(c as f64 + 0.5, r as f64 + 0.5);
        !domain.contains(p) || rail.distance_to(p) < d + half_diag || p.dist(disk.0) < disk.1 + d + half_diag
    };
    for p in [Point::new(32.3, 31.9), Point::new(20.0, 20.0), Point::new(10.5, 30.6), Point::new(0.2, 0.1)] {
        let (pc, pr) = ((p.x.floor() as i64).clamp(0, 63), (p.y.floor() as i64).clamp(0, 63));
        let expect = if !occupied(pc, pr) {
            Some(p)
        } else {
            let mut best: Option<(i64, f64, i64, i64)> = None;
            for r in 0..64 {
                for c in 0..64 {
                    let ring = (c - pc).abs().max((r - pr).abs());
                    if occupied(c, r) || ring > 40 {
                        continue;
                    }
                    let q = Point::new(c as f64 + 0.5, r as f64 + 0.5);
                    let key = (ring, (q.x - p.x).powi(2) + (q.y - p.y).powi(2), r, c);
                    if best.is_none_or(|b| (key.0, key.1, key.2, key.3) < (b.0, b.1, b.2, b.3)) {
                        best = Some(key);
                    }
                }
            }
            best.map(|(_, _, r, c)| Point::new(c as f64 + 0.5, r as f64 + 0.5))
        };
        let got = canvas.place(p);
        assert_eq!(got, expect, "candidate {p:?}");
        if let Some(q) = got {
            assert!(rail.distance_to(q) >= d && q.dist(disk.0) >= disk.1 + d);
            assert!(q.dist(p) <= 40.0 * std::f64::consts::SQRT_2 + 1.0);
        }
    }
}

fn random_graph(seed: u64, n: usize, extra: usize) -> RankedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt() * 10.0;
    let pos: Vec<Point> =
        (0..n).map(|_| Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side))).collect();
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i, rng.random_range(0..i))).collect();
    for _ in 0..extra {
        edges.push((rng.random_range(0..n), rng.random_range(0..n)));
    }
    let g = graph(&pos, &edges);
    let order = graphmaps::ingest::rank_nodes(&g, RankMethod::PageRank);
    RankedGraph::new(g, order, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn built_layers_satisfy_quotas_and_invariants(seed in 0u64..10_000, n in 2usize..80, extra in 0usize..60, q in 1u32..6) {
        let g = random_graph(seed, n, extra);
        // small quotas can make a node unplaceable on any layer
        let p = BuildParams { force_final_layer: true, max_layers: 16, ..params(8 * q, 24 * q) };
        let set = build_layers(&g, p).unwrap();
        for k in 0..set.layers.len() {
            if set.layers[k].forced {
                continue;
            }
            let c = tile_crowding(&set, k, (p.qn / 4) as usize, (p.qr / 4) as usize);
            prop_assert!(c.nodes.over.is_empty() && c.rails.over.is_empty(), "layer {}: {:?}", k, c);
        }
        let tol = 1e-9 * set.bbox.diag();
        prop_assert!(check_structure(&set).is_empty());
        prop_assert!(check_stability(&set, tol).is_empty());
        prop_assert!(check_routes(&set, tol).is_empty());
        prop_assert!(check_covers(&set, tol).is_empty());
        prop_assert!(verify_quotas(&set, 300, seed).passed());
    }
}
