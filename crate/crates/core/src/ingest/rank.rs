use std::str::FromStr;

use super::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RankMethod {
    Input,
    Degree,
    #[default]
    PageRank,
}

impl FromStr for RankMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input" | "input-order" => Ok(RankMethod::Input),
            "degree" => Ok(RankMethod::Degree),
            "pagerank" => Ok(RankMethod::PageRank),
            other => Err(format!("unknown rank method {other:?} (input|degree|pagerank)")),
        }
    }
}

const DAMPING: f64 = 0.85;
const RESIDUAL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 10_000;

/// Undirected PageRank by power iteration. Dangling nodes spread their mass
/// uniformly. Scores sum to one.
pub fn pagerank(graph: &Graph) -> Vec<f64> {
    let n = graph.nodes.len();
    if n == 0 {
        return Vec::new();
    }
    let adj = graph.adjacency();
    let nf = n as f64;
    let mut score = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        let dangling: f64 = (0..n).filter(|&v| adj[v].is_empty()).map(|v| score[v]).sum();
        let base = (1.0 - DAMPING) / nf + DAMPING * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for v in 0..n {
            if adj[v].is_empty() {
                continue;
            }
            let share = DAMPING * score[v] / adj[v].len() as f64;
            for &w in &adj[v] {
                next[w] += share;
            }
        }
        let residual: f64 = score.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut score, &mut next);
        if residual < RESIDUAL {
            break;
        }
    }
    score
}

pub fn degree_scores(graph: &Graph) -> Vec<f64> {
    graph.adjacency().iter().map(|a| a.len() as f64).collect()
}

fn sort_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps input order among ties
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Importance order of the nodes, most important first.
pub fn rank_nodes(graph: &Graph, method: RankMethod) -> Vec<usize> {
    match method {
        RankMethod::Input => (0..graph.nodes.len()).collect(),
        RankMethod::Degree => sort_desc(&degree_scores(graph)),
        RankMethod::PageRank => sort_desc(&pagerank(graph)),
    }
}
