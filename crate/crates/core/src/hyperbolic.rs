//! Gromov products, the four-point hyperbolicity constant, and visual metrics
//! on the leaves of finite rooted trees.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metric::FiniteMetricSpace;

/// Largest space scanned exhaustively by [`four_point_delta`].
pub const EXHAUSTIVE_MAX: usize = 60;

/// `(y, z)_x = (d(x, y) + d(x, z) - d(y, z)) / 2`.
pub fn gromov_product(space: &FiniteMetricSpace, x: usize, y: usize, z: usize) -> f64 {
    0.5 * (space.dist(x, y) + space.dist(x, z) - space.dist(y, z))
}

/// `(d(x,y) + d(z,w) - max(d(x,z) + d(y,w), d(x,w) + d(y,z))) / 2`, set to 0
/// when it is not positive or is within rounding of 0.
pub fn four_point_defect(space: &FiniteMetricSpace, q: [usize; 4]) -> f64 {
    let [x, y, z, w] = q;
    let s1 = space.dist(x, y) + space.dist(z, w);
    let s2 = space.dist(x, z) + space.dist(y, w);
    let s3 = space.dist(x, w) + space.dist(y, z);
    let cross = s2.max(s3);
    let top = s1.max(cross);
    if s1 - cross <= 4.0 * f64::EPSILON * top {
        0.0
    } else {
        0.5 * (s1 - cross)
    }
}

/// Four-point constant `δ` with a quadruple attaining it.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HyperbolicityReport {
    pub delta: f64,
    /// Ground indices `[x, y, z, w]` with `four_point_defect = delta`.
    pub witness: [usize; 4],
    /// Number of points scanned.
    pub points: usize,
    /// False when only a random subsample was scanned.
    pub exhaustive: bool,
}

/// Exact `δ` by scanning every quadruple. Spaces above [`EXHAUSTIVE_MAX`]
/// points are rejected; use [`four_point_delta_sampled`] for those.
pub fn four_point_delta(space: &FiniteMetricSpace) -> Result<HyperbolicityReport> {
    let n = space.len();
    if n > EXHAUSTIVE_MAX {
        return Err(Error::TooLarge(format!(
            "{n} points exceed the exhaustive limit {EXHAUSTIVE_MAX}; use the sampled mode"
        )));
    }
    let idx: Vec<usize> = (0..n).collect();
    Ok(scan(space, &idx, true))
}

/// `δ` of a random subsample of `m` points (the whole space when it has at
/// most `m` points), flagged as approximate in that case.
pub fn four_point_delta_sampled(space: &FiniteMetricSpace, m: usize, seed: u64) -> Result<HyperbolicityReport> {
    let n = space.len();
    if m < 4 {
        return invalid("the sample needs at least 4 points");
    }
    if n <= m {
        let idx: Vec<usize> = (0..n).collect();
        return Ok(scan(space, &idx, true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    Ok(scan(space, &idx, false))
}

fn scan(space: &FiniteMetricSpace, idx: &[usize], exhaustive: bool) -> HyperbolicityReport {
    let n = idx.len();
    let first = |k: usize| idx[k.min(n.saturating_sub(1))];
    let start = (0.0, [first(0), first(1), first(2), first(3)]);
    let per_x: Vec<(f64, [usize; 4])> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut best = (-1.0, [0; 4]);
            for b in a + 1..n {
                for c in b + 1..n {
                    for d in c + 1..n {
                        let (x, y, z, w) = (idx[a], idx[b], idx[c], idx[d]);
                        for q in [[x, y, z, w], [x, z, y, w], [x, w, y, z]] {
                            let v = four_point_defect(space, q);
                            if v > best.0 {
                                best = (v, q);
                            }
                        }
                    }
                }
            }
            best
        })
        .collect();
    let (delta, witness) = per_x.into_iter().fold(start, |acc, b| if b.0 > acc.0 { b } else { acc });
    HyperbolicityReport { delta, witness, points: n, exhaustive }
}

/// Number of quadruples with
/// `(x, z)_w < min((x, y)_w, (y, z)_w) - δ - tol`.
pub fn product_inequality_violations(space: &FiniteMetricSpace, delta: f64, tol: f64) -> usize {
    let n = space.len();
    (0..n)
        .into_par_iter()
        .map(|w| {
            let mut bad = 0;
            for x in 0..n {
                for y in 0..n {
                    let xy = gromov_product(space, w, x, y);
                    for z in 0..n {
                        let lhs = gromov_product(space, w, x, z);
                        let rhs = xy.min(gromov_product(space, w, y, z)) - delta;
                        if lhs < rhs - tol {
                            bad += 1;
                        }
                    }
                }
            }
            bad
        })
        .sum()
}

/// Number of ordered triples with `d(x, z) > max(d(x, y), d(y, z))` beyond a
/// relative `1e-12` slack.
pub fn ultrametric_violations(space: &FiniteMetricSpace) -> usize {
    let n = space.len();
    (0..n)
        .into_par_iter()
        .map(|x| {
            let mut bad = 0;
            for y in 0..n {
                for z in 0..n {
                    if space.dist(x, z) > space.dist(x, y).max(space.dist(y, z)) * (1.0 + 1e-12) {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum()
}

#[derive(Deserialize, Serialize)]
struct TreeDocument {
    edges: Vec<(usize, usize, f64)>,
    root: usize,
}

/// Rooted tree with positive edge lengths and its path metric.
#[derive(Clone, Debug)]
pub struct TreeSpace {
    pub root: usize,
    parent: Vec<Option<(usize, f64)>>,
    children: Vec<Vec<usize>>,
    height: Vec<f64>,
    hops: Vec<usize>,
    labels: Vec<String>,
}

impl TreeSpace {
    /// Tree from `(parent, child, length)` triples on vertices `0..=edges.len()`.
    pub fn from_edges(edges: &[(usize, usize, f64)], root: usize) -> Result<Self> {
        let n = edges.len() + 1;
        if root >= n {
            return invalid(format!("root {root} out of range for {n} vertices"));
        }
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for &(p, c, len) in edges {
            if p >= n || c >= n {
                return invalid(format!("edge ({p}, {c}) out of range for {n} vertices"));
            }
            if !(len > 0.0 && len.is_finite()) {
                return invalid(format!("edge ({p}, {c}) has non-positive length {len}"));
            }
            if c == root || parent[c].is_some() {
                return invalid(format!("vertex {c} has two parents or is the root"));
            }
            parent[c] = Some((p, len));
            children[p].push(c);
        }
        let mut height = vec![f64::NAN; n];
        let mut hops = vec![usize::MAX; n];
        height[root] = 0.0;
        hops[root] = 0;
        let mut stack = vec![root];
        let mut seen = 1;
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                let (_, len) = parent[c].unwrap();
                height[c] = height[v] + len;
                hops[c] = hops[v] + 1;
                seen += 1;
                stack.push(c);
            }
        }
        if seen != n {
            return invalid("edges do not form a tree reachable from the root");
        }
        let labels = (0..n).map(|v| v.to_string()).collect();
        Ok(Self { root, parent, children, height, hops, labels })
    }

    /// Tree from `{"edges": [[parent, child, length], ...], "root": r}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(text)?;
        Self::from_edges(&doc.edges, doc.root)
    }

    pub fn to_json(&self) -> String {
        let edges = (0..self.len()).filter_map(|c| self.parent[c].map(|(p, len)| (p, c, len))).collect();
        serde_json::to_string(&TreeDocument { edges, root: self.root }).expect("tree serializes")
    }

    /// Complete `branching`-ary tree of the given depth with unit edges.
    /// Vertices are numbered breadth-first and labeled by their child-index
    /// words (the root is labeled by the empty word).
    pub fn regular(branching: usize, depth: usize) -> Result<Self> {
        if branching < 2 {
            return invalid("branching must be at least 2");
        }
        let mut edges = Vec::new();
        let mut labels = vec![String::new()];
        let mut frontier = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(frontier.len() * branching);
            for &v in &frontier {
                for b in 0..branching {
                    let c = labels.len();
                    edges.push((v, c, 1.0));
                    labels.push(format!("{}{}", labels[v], digit(b)));
                    next.push(c);
                }
            }
            frontier = next;
        }
        let mut t = Self::from_edges(&edges, 0)?;
        t.labels = labels;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Vertices without children, in increasing order.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| (self.children[v].is_empty() && v != self.root) || self.len() == 1).collect()
    }

    /// Distance from the root.
    pub fn height(&self, v: usize) -> f64 {
        self.height[v]
    }

    /// Lowest common ancestor.
    pub fn meet(&self, mut u: usize, mut v: usize) -> usize {
        while self.hops[u] > self.hops[v] {
            u = self.parent[u].unwrap().0;
        }
        while self.hops[v] > self.hops[u] {
            v = self.parent[v].unwrap().0;
        }
        while u != v {
            u = self.parent[u].unwrap().0;
            v = self.parent[v].unwrap().0;
        }
        u
    }

    /// Path-metric distance.
    pub fn dist(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let m = self.meet(u, v);
        (self.height[u] - self.height[m]) + (self.height[v] - self.height[m])
    }

    /// `(u, v)_root`, the height of the lowest common ancestor.
    pub fn root_product(&self, u: usize, v: usize) -> f64 {
        self.height[self.meet(u, v)]
    }

    /// Path metric on the given vertices (all vertices when `None`).
    pub fn to_metric_space(&self, vertices: Option<&[usize]>) -> Result<FiniteMetricSpace> {
        let all: Vec<usize> = (0..self.len()).collect();
        let vs = vertices.unwrap_or(&all);
        let rows = vs.iter().map(|&u| vs.iter().map(|&v| self.dist(u, v)).collect()).collect();
        FiniteMetricSpace::from_matrix(vs.iter().map(|&v| self.labels[v].clone()).collect(), rows)
    }
}

fn digit(b: usize) -> char {
    std::char::from_digit(b as u32, 36).unwrap_or('?')
}

/// Visual metric `D(z, z') = exp(-a (z, z')_root)` on the leaves of a tree.
/// Trees are 0-hyperbolic, so this is an ultrametric for every `a > 0`.
pub fn standard_visual_metric(tree: &TreeSpace, a: f64) -> Result<FiniteMetricSpace> {
    if !(a > 0.0 && a.is_finite()) {
        return invalid(format!("visual parameter a = {a} must be positive"));
    }
    let leaves = tree.leaves();
    let rows = leaves
        .iter()
        .map(|&u| {
            leaves.iter().map(|&v| if u == v { 0.0 } else { (-a * tree.root_product(u, v)).exp() }).collect()
        })
        .collect();
    FiniteMetricSpace::from_matrix(leaves.iter().map(|&v| tree.labels[v].clone()).collect(), rows)
}

/// Visual-metric candidate on a space that need not be a tree.
#[derive(Clone, Debug, Serialize)]
pub struct VisualCandidate {
    pub basepoint: usize,
    pub a: f64,
    /// `exp(-a (z, z')_x)` off the diagonal.
    pub gauge: Vec<Vec<f64>>,
    /// Whether the gauge itself satisfies the triangle inequality.
    pub gauge_is_metric: bool,
    /// Chain metric: infimum of gauge sums over finite chains.
    pub chain: Vec<Vec<f64>>,
    /// Smallest `V >= 1` with `gauge / V <= chain <= V · gauge`.
    pub v: f64,
}

/// Gauge `exp(-a (z, z')_x)` on all points other than the basepoint, its
/// chain metric, and the comparison constant `V` between the two.
pub fn visual_metric_candidate(space: &FiniteMetricSpace, basepoint: usize, a: f64) -> Result<VisualCandidate> {
    if !(a > 0.0 && a.is_finite()) {
        return invalid(format!("visual parameter a = {a} must be positive"));
    }
    if basepoint >= space.len() {
        return invalid(format!("basepoint {basepoint} out of range"));
    }
    let pts: Vec<usize> = (0..space.len()).filter(|&v| v != basepoint).collect();
    let m = pts.len();
    let gauge: Vec<Vec<f64>> = pts
        .iter()
        .map(|&u| {
            pts.iter()
                .map(|&v| if u == v { 0.0 } else { (-a * gromov_product(space, basepoint, u, v)).exp() })
                .collect()
        })
        .collect();
    let mut gauge_is_metric = true;
    'outer: for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                if gauge[i][k] > (gauge[i][j] + gauge[j][k]) * (1.0 + 1e-12) {
                    gauge_is_metric = false;
                    break 'outer;
                }
            }
        }
    }
    let mut chain = gauge.clone();
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let via = chain[i][k] + chain[k][j];
                if via < chain[i][j] {
                    chain[i][j] = via;
                }
            }
        }
    }
    let mut v: f64 = 1.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                v = v.max(gauge[i][j] / chain[i][j]).max(chain[i][j] / gauge[i][j]);
            }
        }
    }
    Ok(VisualCandidate { basepoint, a, gauge, gauge_is_metric, chain, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_tree_shape() {
        let t = TreeSpace::regular(2, 3).unwrap();
        assert_eq!(t.len(), 15);
        assert_eq!(t.leaves().len(), 8);
        assert_eq!(t.labels()[t.leaves()[0]], "000");
        let l = t.leaves();
        assert_eq!(t.dist(l[0], l[7]), 6.0);
        assert_eq!(t.root_product(l[0], l[1]), 2.0);
        let back = TreeSpace::from_json(&t.to_json()).unwrap();
        assert_eq!(back.dist(l[0], l[5]), t.dist(l[0], l[5]));
    }

    #[test]
    fn rejects_malformed_trees() {
        assert!(TreeSpace::from_edges(&[(0, 1, 1.0), (1, 0, 1.0)], 0).is_err());
        assert!(TreeSpace::from_edges(&[(0, 1, 0.0)], 0).is_err());
        assert!(TreeSpace::from_edges(&[(0, 1, 1.0), (2, 2, 1.0)], 0).is_err());
    }
}
