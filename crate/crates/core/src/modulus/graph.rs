use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metric::{FiniteMetricSpace, RADIUS_SLACK};
use crate::net::NetHierarchy;

/// When two net points are joined by an edge of the path graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyRule {
    /// `d(q, q') <= 2 · scale`.
    #[default]
    DistanceSurrogate,
    /// Some ground point lies within `scale` of both `q` and `q'`.
    WitnessPoint,
}

impl AdjacencyRule {
    pub fn name(self) -> &'static str {
        match self {
            AdjacencyRule::DistanceSurrogate => "surrogate",
            AdjacencyRule::WitnessPoint => "witness",
        }
    }
}

/// Undirected graph on the points of one net level.
#[derive(Clone, Debug, Serialize)]
pub struct PathGraph {
    pub level: usize,
    pub lambda: f64,
    /// Ball radius `λ · base^(-level)`.
    pub scale: f64,
    pub rule: AdjacencyRule,
    /// Ground-space index of each vertex.
    pub vertices: Vec<usize>,
    /// Sorted neighbor lists in vertex (local) indices.
    pub adjacency: Vec<Vec<usize>>,
}

impl PathGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Sorted list of edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, nb) in self.adjacency.iter().enumerate() {
            out.extend(nb.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Graph on vertices `0..n` with the given undirected edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return invalid(format!("edge ({a},{b}) out of range for {n} vertices"));
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
            nb.dedup();
        }
        Ok(Self {
            level: 0,
            lambda: 1.0,
            scale: 1.0,
            rule: AdjacencyRule::DistanceSurrogate,
            vertices: (0..n).collect(),
            adjacency,
        })
    }

    /// Induced subgraph on the given local vertices (in the given order).
    pub fn induced(&self, keep: &[usize]) -> PathGraph {
        let mut local = vec![usize::MAX; self.len()];
        for (i, &v) in keep.iter().enumerate() {
            local[v] = i;
        }
        let adjacency = keep
            .iter()
            .map(|&v| {
                let mut nb: Vec<usize> =
                    self.adjacency[v].iter().map(|&u| local[u]).filter(|&u| u != usize::MAX).collect();
                nb.sort_unstable();
                nb
            })
            .collect();
        PathGraph {
            level: self.level,
            lambda: self.lambda,
            scale: self.scale,
            rule: self.rule,
            vertices: keep.iter().map(|&v| self.vertices[v]).collect(),
            adjacency,
        }
    }
}

/// Path graph on the net `X_k` with balls of radius `λ · base^(-k)`.
pub fn build_path_graph(
    space: &FiniteMetricSpace,
    hierarchy: &NetHierarchy,
    k: usize,
    lambda: f64,
    rule: AdjacencyRule,
) -> Result<PathGraph> {
    if k > hierarchy.k_max() {
        return invalid(format!("level {k} exceeds the hierarchy depth {}", hierarchy.k_max()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda {lambda} must be positive"));
    }
    let mut g = build_path_graph_on(space, hierarchy.level(k), lambda * hierarchy.radius(k), rule);
    g.level = k;
    g.lambda = lambda;
    Ok(g)
}

/// Path graph on an arbitrary vertex subset with ball radius `scale`.
pub fn build_path_graph_on(
    space: &FiniteMetricSpace,
    vertices: &[usize],
    scale: f64,
    rule: AdjacencyRule,
) -> PathGraph {
    let mut local = vec![usize::MAX; space.len()];
    for (i, &v) in vertices.iter().enumerate() {
        local[v] = i;
    }
    let adjacency = match rule {
        AdjacencyRule::DistanceSurrogate => {
            let index = space.ball_index(vertices, 2.0 * scale);
            let mut buf = Vec::new();
            vertices
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    index.within(v, 2.0 * scale, &mut buf);
                    let mut nb: Vec<usize> = buf.iter().map(|&u| local[u]).filter(|&u| u != i).collect();
                    nb.sort_unstable();
                    nb
                })
                .collect()
        }
        AdjacencyRule::WitnessPoint => {
            let index = space.ball_index(vertices, scale);
            let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
            let mut buf = Vec::new();
            for p in 0..space.len() {
                index.within(p, scale, &mut buf);
                for (a, &qa) in buf.iter().enumerate() {
                    for &qb in &buf[a + 1..] {
                        adjacency[local[qa]].push(local[qb]);
                        adjacency[local[qb]].push(local[qa]);
                    }
                }
            }
            for nb in &mut adjacency {
                nb.sort_unstable();
                nb.dedup();
            }
            adjacency
        }
    };
    PathGraph { level: 0, lambda: 1.0, scale, rule, vertices: vertices.to_vec(), adjacency }
}

/// Whether the surrogate rule joins two points at distance `d`.
pub fn surrogate_adjacent(d: f64, scale: f64) -> bool {
    d <= 2.0 * scale * (1.0 + RADIUS_SLACK)
}
