use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Edge, MetricKind, MetricMeasureSpace, SpaceKind, SpaceMeta};
use crate::error::Result;
use crate::scalar::Real;

/// Weighted graph with the hop metric. `d_h`/`d_w` are set to 1 and 2 as
/// placeholders; graphs carry no scaling structure.
pub fn from_graph<T: Real>(name: &str, measure: Vec<T>, edges: Vec<Edge<T>>) -> Result<MetricMeasureSpace<T>> {
    let meta = SpaceMeta {
        name: name.to_string(),
        kind: SpaceKind::Graph,
        level: None,
        d_h: T::one(),
        d_w: Some(T::lit(2.0)),
        diameter: T::zero(),
        mesh: T::one(),
        metric: MetricKind::Graph,
    };
    MetricMeasureSpace::assemble(meta, Vec::new(), measure, edges, Vec::new())
}

/// Random connected graph: a random spanning tree plus each remaining pair
/// with probability `0.3`, conductances and (normalized) measure drawn from
/// `[0.5, 2]`.
pub fn random_connected_graph<T: Real>(n: usize, seed: u64) -> Result<MetricMeasureSpace<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut linked = vec![false; n * n];
    for b in 1..n {
        let a = rng.gen_range(0..b);
        linked[a * n + b] = true;
        edges.push(Edge { a, b, w: T::lit(rng.gen_range(0.5..2.0)) });
    }
    for a in 0..n {
        for b in a + 1..n {
            if !linked[a * n + b] && rng.gen_bool(0.3) {
                edges.push(Edge { a, b, w: T::lit(rng.gen_range(0.5..2.0)) });
            }
        }
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let total: f64 = raw.iter().sum();
    let measure = raw.into_iter().map(|m| T::lit(m / total)).collect();
    from_graph(&format!("random{n}-{seed}"), measure, edges)
}

pub(super) fn hop_distances<T: Real>(n: usize, edges: &[Edge<T>]) -> Vec<u32> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    let mut out = vec![u32::MAX; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        out[s * n + s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = out[s * n + u];
            for &v in &adj[u] {
                if out[s * n + v] == u32::MAX {
                    out[s * n + v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    out
}

pub(super) fn components<T: Real>(n: usize, edges: &[Edge<T>]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in edges {
        let (a, b) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..n {
        let r = find(&mut parent, x);
        groups.entry(r).or_default().push(x);
    }
    groups.into_values().collect()
}
