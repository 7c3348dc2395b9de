use std::collections::BTreeMap;

use graphmaps::geometry::{Point, Rect};
use graphmaps::ingest::{Graph, Node, RankedGraph};
use graphmaps::labeling::{check_labels, label_offset, plan_labels, LabelError, LabelParams, LabelPlan, LabelPosition};
use graphmaps::layers::{build_layers, BuildParams, LayerSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Node diameter 2, so every radius at zoom 1 is 1.
fn layers(positions: &[Point], edges: &[(usize, usize)], qn: u32) -> LayerSet {
    let nodes = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| Node { id: format!("n{i}"), label: format!("n{i}"), pos: Some(p), attrs: BTreeMap::new() })
        .collect();
    let g = Graph { nodes, edges: edges.to_vec(), ..Default::default() };
    let n = positions.len();
    let rg = RankedGraph::new(g, (0..n).collect(), Some(2.0)).unwrap();
    build_layers(&rg, BuildParams { qn, qr: 400, ..Default::default() }).unwrap()
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

fn plan(set: &LayerSet) -> LabelPlan {
    plan_labels(set, &texts(set.positions.len()), &LabelParams::for_layers(set)).unwrap()
}

fn assert_positions(set: &LayerSet, expect: &[Point]) {
    for (p, q) in set.positions.iter().zip(expect) {
        assert!(p.dist(*q) < 1e-9, "node moved from {q:?} to {p:?}");
    }
}

#[test]
fn single_node_label_goes_left_at_its_own_zoom() {
    let set = layers(&[Point::new(0.0, 0.0)], &[], 80);
    let plan = plan(&set);
    let l = &plan.labels[0];
    assert_eq!(l.zoom, 1.0);
    assert_eq!(l.level, 32);
    assert_eq!(l.position, LabelPosition::Left);
    // width: 2 characters of 0.6 x height, height = node diameter
    assert_eq!(l.rect, Rect::new(-3.4, -1.0, -1.0, 1.0));
    assert!(check_labels(&set, &plan).is_empty());
}

#[test]
fn blocked_left_falls_back_to_right() {
    let pos = [Point::new(0.0, 0.0), Point::new(-4.0, 0.0)];
    let set = layers(&pos, &[(0, 1)], 80);
    assert_positions(&set, &pos);
    let plan = plan(&set);
    // the left box [-3.4, -1] meets the disk [-5, -3] at zoom 1
    assert_eq!(plan.labels[0].position, LabelPosition::Right);
    assert_eq!(plan.labels[0].zoom, 1.0);
    assert_eq!(plan.labels[1].position, LabelPosition::Left);
    assert_eq!(plan.labels[1].zoom, 1.0);
    assert!(check_labels(&set, &plan).is_empty());
}

#[test]
fn crowded_node_waits_for_a_larger_zoom() {
    let pos = [
        Point::new(0.0, 0.0),
        Point::new(-3.8, 0.0),
        Point::new(3.8, 0.0),
        Point::new(0.0, 3.8),
        Point::new(0.0, -3.8),
    ];
    let set = layers(&pos, &[], 80);
    assert_positions(&set, &pos);
    let plan = plan(&set);
    // above: box top 3/Z clears the disk bottom 3.8 - 1/Z once Z > 4/3.8;
    // left: box end 3.4/Z clears 3.8 - 1/Z once Z > 4.4/3.8; the first
    // level past 4/3.8 ~ 1.053 is 2^(1/8) ~ 1.091, which only frees the
    // box above
    let l = &plan.labels[0];
    assert_eq!(l.level, 33);
    assert_eq!(l.zoom, 2f64.powf(0.125));
    assert_eq!(l.position, LabelPosition::Above);
    assert!(check_labels(&set, &plan).is_empty());
}

#[test]
fn later_nodes_cannot_push_out_earlier_labels() {
    // node 1 is more important and sits where node 0's left label would go
    let pos = [Point::new(0.0, 0.0), Point::new(-4.0, 0.0)];
    let nodes = pos
        .iter()
        .enumerate()
        .map(|(i, &p)| Node { id: format!("n{i}"), label: format!("n{i}"), pos: Some(p), attrs: BTreeMap::new() })
        .collect();
    let g = Graph { nodes, edges: vec![], ..Default::default() };
    let rg = RankedGraph::new(g, vec![1, 0], Some(2.0)).unwrap();
    let set = build_layers(&rg, BuildParams::default()).unwrap();
    let plan = plan(&set);
    assert_eq!(plan.labels[1].position, LabelPosition::Left);
    assert_eq!(plan.labels[0].position, LabelPosition::Right);
}

#[test]
fn labels_appear_no_earlier_than_their_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pos: Vec<Point> =
        (0..60).map(|_| Point::new(rng.random_range(0.0..60.0), rng.random_range(0.0..60.0))).collect();
    let edges: Vec<(usize, usize)> = (1..60).map(|i| (rng.random_range(0..i), i)).collect();
    let set = layers(&pos, &edges, 8);
    assert!(set.layers.len() > 1);
    let params = LabelParams::for_layers(&set);
    let plan = plan_labels(&set, &texts(60), &params).unwrap();
    for (v, l) in plan.labels.iter().enumerate() {
        assert!(l.zoom >= set.z(v));
        assert_eq!(l.zoom, params.level(l.level));
        assert!(l.level >= params.first_level_at_least(set.z(v)));
    }
    assert!(check_labels(&set, &plan).is_empty());
    assert_eq!(plan, plan_labels(&set, &texts(60), &params).unwrap());
}

#[test]
fn level_cap_is_reported() {
    let pos = [
        Point::new(0.0, 0.0),
        Point::new(-3.8, 0.0),
        Point::new(3.8, 0.0),
        Point::new(0.0, 3.8),
        Point::new(0.0, -3.8),
    ];
    let set = layers(&pos, &[], 80);
    let params = LabelParams { max_levels: 0, ..LabelParams::for_layers(&set) };
    match plan_labels(&set, &texts(5), &params) {
        Err(LabelError::Unplaced { levels: 0, nodes }) => assert_eq!(nodes, vec![0]),
        other => panic!("expected an unplaced label, got {other:?}"),
    }
    let bad = LabelParams { log2_delta: 0.0, ..params };
    assert_eq!(plan_labels(&set, &texts(5), &bad), Err(LabelError::BadParams));
}

#[test]
fn offsets_touch_the_node_disk() {
    for p in LabelPosition::ALL {
        let r = label_offset(p, 1.0, 3.0, 2.0);
        let gap_x = r.min_x.max(0.0).max(-r.max_x);
        let gap_y = r.min_y.max(0.0).max(-r.max_y);
        assert_eq!(gap_x.hypot(gap_y), 1.0, "{p:?}");
    }
}

fn overlaps_at(set: &LayerSet, plan: &LabelPlan, z: f64) -> usize {
    let r = plan.node_radius / z;
    let shown: Vec<(usize, Rect)> = plan
        .labels
        .iter()
        .filter(|l| l.zoom <= z)
        .map(|l| (l.node, plan.rect_at(l, set.positions[l.node], z)))
        .collect();
    let mut bad = 0;
    for (k, (v, a)) in shown.iter().enumerate() {
        for (_, b) in &shown[k + 1..] {
            if a.min_x < b.max_x && b.min_x < a.max_x && a.min_y < b.max_y && b.min_y < a.max_y {
                bad += 1;
            }
        }
        for u in (0..set.positions.len()).filter(|&u| u != *v && set.z(u) <= z) {
            let c = set.positions[u];
            let dx = (a.min_x - c.x).max(0.0).max(c.x - a.max_x);
            let dy = (a.min_y - c.y).max(0.0).max(c.y - a.max_y);
            if dx * dx + dy * dy < r * r {
                bad += 1;
            }
        }
    }
    bad
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn no_overlap_at_any_zoom(seed in 0u64..10_000, n in 1usize..40, spread in 4.0..40.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos: Vec<Point> = (0..n).map(|_| Point::new(rng.random_range(0.0..spread), rng.random_range(0.0..spread))).collect();
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
        let set = layers(&pos, &edges, 16);
        let plan = plan(&set);
        prop_assert!(check_labels(&set, &plan).is_empty());
        // zooms between and beyond the visited levels
        let top = plan.level(plan.last_level) * 8.0;
        for _ in 0..40 {
            let z = (rng.random_range(0.0..top.log2() + 4.0) - 4.0).exp2();
            prop_assert_eq!(overlaps_at(&set, &plan, z), 0, "zoom {}", z);
        }
    }
}
