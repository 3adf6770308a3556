//! Vertex-weighted shortest paths used as the separation oracle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{ModulusProblem, Reduced};

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    v: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on (dist, v).
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.v.cmp(&self.v))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra where a path's weight is the sum of its vertex
/// weights (endpoints included). Returns the lightest path from a source to
/// a target, ties broken by vertex index. Targets are not expanded.
pub(crate) fn dijkstra<N, I>(
    n: usize,
    weights: &[f64],
    sources: impl Iterator<Item = usize>,
    is_target: impl Fn(usize) -> bool,
    neighbors: N,
) -> Option<(f64, Vec<usize>)>
where
    N: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for s in sources {
        if weights[s] < dist[s] {
            dist[s] = weights[s];
            heap.push(Entry { dist: weights[s], v: s });
        }
    }
    while let Some(Entry { dist: d, v }) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        if is_target(v) {
            let mut path = vec![v];
            let mut cur = v;
            while pred[cur] != usize::MAX {
                cur = pred[cur];
                path.push(cur);
            }
            path.reverse();
            return Some((d, path));
        }
        for u in neighbors(v) {
            let nd = d + weights[u];
            if !done[u] && nd < dist[u] {
                dist[u] = nd;
                pred[u] = v;
                heap.push(Entry { dist: nd, v: u });
            }
        }
    }
    None
}

/// Lightest path of the reduced problem under vertex weights `w`.
pub(crate) fn lightest_reduced(red: &Reduced, w: &[f64]) -> Option<(f64, Vec<u32>)> {
    dijkstra(
        red.len(),
        w,
        0..red.n_e,
        |v| red.is_f(v),
        |v| red.adjacency[v].iter().map(|&u| u as usize),
    )
    .map(|(d, p)| (d, p.into_iter().map(|v| v as u32).collect()))
}

/// Lightest `E → F` path of the problem under the vertex weights `density`,
/// or `None` if `F` is unreachable from `E`.
pub fn lightest_path(problem: &ModulusProblem, density: &[f64]) -> Option<(f64, Vec<usize>)> {
    let mut is_f = vec![false; problem.len()];
    for &v in &problem.f {
        is_f[v] = true;
    }
    dijkstra(
        problem.len(),
        density,
        problem.e.iter().copied(),
        |v| is_f[v],
        |v| problem.adjacency[v].iter().copied(),
    )
}
