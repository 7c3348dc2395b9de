use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::geometry::Point;

const IDEAL: f64 = 1.0;
const ITERATIONS: usize = 300;

/// Seeded Fruchterman-Reingold placement with ideal edge length 1.
///
/// Nodes that share a position after the iterations are nudged apart
/// deterministically so that no two coincide.
pub fn fallback_layout(graph: &Graph, seed: u64) -> Vec<Point> {
    let n = graph.nodes.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Point::new(0.0, 0.0)];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt() * IDEAL;
    let mut pos: Vec<Point> =
        (0..n).map(|_| Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side))).collect();
    let k = IDEAL;
    let mut temp = side / 10.0;
    let cooling = temp / ITERATIONS as f64;
    let mut disp = vec![Point::new(0.0, 0.0); n];
    for _ in 0..ITERATIONS {
        disp.iter_mut().for_each(|d| *d = Point::new(0.0, 0.0));
        for a in 0..n {
            for b in (a + 1)..n {
                let mut d = pos[a] - pos[b];
                let mut len = d.norm();
                if len < 1e-9 {
                    // deterministic jitter for coincident pairs
                    d = Point::new(((a * 31 + b) % 7) as f64 - 3.0 + 0.5, 1.0);
                    len = d.norm();
                }
                let f = k * k / len;
                let push = d * (f / len);
                disp[a] = disp[a] + push;
                disp[b] = disp[b] - push;
            }
        }
        for &(a, b) in &graph.edges {
            let d = pos[a] - pos[b];
            let len = d.norm().max(1e-9);
            let f = len * len / k;
            let pull = d * (f / len);
            disp[a] = disp[a] - pull;
            disp[b] = disp[b] + pull;
        }
        for v in 0..n {
            let len = disp[v].norm();
            if len > 0.0 {
                pos[v] = pos[v] + disp[v] * (len.min(temp) / len);
            }
        }
        temp = (temp - cooling).max(1e-3);
    }
    separate(&mut pos);
    pos
}

fn separate(pos: &mut [Point]) {
    let mut seen = std::collections::HashSet::new();
    for p in pos.iter_mut() {
        while !seen.insert(p.bits()) {
            p.x += IDEAL * 0.01;
        }
    }
}
