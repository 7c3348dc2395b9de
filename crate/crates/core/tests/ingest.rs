use graphmaps::geometry::Point;
use graphmaps::ingest::{
    fallback_layout, pagerank, parse_dot, rank_nodes, write_dot, Graph, IngestError, RankMethod, RankedGraph,
};
use proptest::prelude::*;

const ABSTRACT: &str = include_str!("data/abstract.dot");

#[test]
fn minimal_positioned_graph() {
    let g = parse_dot(r#"graph { a [pos="0,0"]; b [pos="1,0"]; a -- b; }"#).unwrap();
    assert_eq!(g.nodes.len(), 2);
    assert_eq!(g.edges, vec![(0, 1)]);
    assert!(g.is_position_complete());
}

#[test]
fn missing_position_is_flagged() {
    let g = parse_dot("graph { a; }").unwrap();
    assert_eq!(g.nodes.len(), 1);
    assert!(g.edges.is_empty());
    assert!(!g.is_position_complete());
    let err = RankedGraph::new(g, vec![0], None).unwrap_err();
    assert_eq!(err, IngestError::PositionIncomplete("a".into()));
    assert!(err.to_string().contains("position-incomplete"));
}

#[test]
fn abstract_graph_has_47_nodes() {
    let g = parse_dot(ABSTRACT).unwrap();
    assert_eq!(g.nodes.len(), 47);
}

#[test]
fn pagerank_examples() {
    let one = parse_dot("graph { a; }").unwrap();
    assert_eq!(pagerank(&one), vec![1.0]);
    assert_eq!(rank_nodes(&one, RankMethod::PageRank), vec![0]);

    let two = parse_dot("graph { a -- b; }").unwrap();
    let s = pagerank(&two);
    assert!((s[0] - 0.5).abs() < 1e-9 && (s[1] - 0.5).abs() < 1e-9);
    assert_eq!(rank_nodes(&two, RankMethod::PageRank), vec![0, 1]);

    // closed form on a path a-b-c: pb = (1-d)/3 + d (pa + pc), pa = pc = (1-d)/3 + d pb / 2
    let path = parse_dot("graph { a -- b -- c; }").unwrap();
    let d = 0.85;
    let pb = ((1.0 - d) / 3.0 * (1.0 + 2.0 * d)) / (1.0 - d * d);
    let s = pagerank(&path);
    assert!((s[1] - pb).abs() < 1e-8, "{} vs {pb}", s[1]);
    assert!((pb - 18.0 / 37.0).abs() < 1e-12);
    assert_eq!(rank_nodes(&path, RankMethod::PageRank)[0], 1);
}

#[test]
fn input_order_is_identity() {
    let g = parse_dot(ABSTRACT).unwrap();
    assert_eq!(rank_nodes(&g, RankMethod::Input), (0..47).collect::<Vec<_>>());
}

#[test]
fn fallback_layout_contract() {
    let one = parse_dot("graph { a; }").unwrap();
    assert_eq!(fallback_layout(&one, 3), vec![Point::new(0.0, 0.0)]);
    let g = parse_dot(ABSTRACT).unwrap();
    let a = fallback_layout(&g, 7);
    assert_eq!(a, fallback_layout(&g, 7));
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            assert_ne!(a[i], a[j]);
        }
    }
}

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (1usize..25).prop_flat_map(|n| {
        (prop::collection::vec((-1e6..1e6f64, -1e6..1e6f64), n), prop::collection::vec((0..n, 0..n), 0..3 * n))
            .prop_map(|(pos, edges)| {
                let mut text = String::from("graph g {\n");
                for (i, (x, y)) in pos.iter().enumerate() {
                    text += &format!("  \"n{i}\" [pos=\"{x:?},{y:?}\", label=\"node {i}\"];\n");
                }
                for (a, b) in edges {
                    text += &format!("  \"n{a}\" -- \"n{b}\";\n");
                }
                text += "}\n";
                parse_dot(&text).unwrap()
            })
    })
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    let mut s = order.to_vec();
    s.sort_unstable();
    s == (0..n).collect::<Vec<_>>()
}

proptest! {
    #[test]
    fn dot_round_trip(g in graph_strategy()) {
        let again = parse_dot(&write_dot(&g)).unwrap();
        prop_assert_eq!(&again.nodes, &g.nodes);
        prop_assert_eq!(&again.edges, &g.edges);
        let third = parse_dot(&write_dot(&again)).unwrap();
        prop_assert_eq!(third.nodes, again.nodes);
    }

    #[test]
    fn every_ranking_is_a_permutation(g in graph_strategy()) {
        for m in [RankMethod::Input, RankMethod::Degree, RankMethod::PageRank] {
            prop_assert!(is_permutation(&rank_nodes(&g, m), g.nodes.len()));
        }
        let total: f64 = pagerank(&g).iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn degree_order_ignores_node_names(g in graph_strategy()) {
        let mut renamed = g.clone();
        for (i, n) in renamed.nodes.iter_mut().enumerate() {
            n.id = format!("renamed_{}", 1000 - i);
        }
        prop_assert_eq!(rank_nodes(&g, RankMethod::Degree), rank_nodes(&renamed, RankMethod::Degree));
    }
}
