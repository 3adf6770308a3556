//! Finite metric spaces with either an explicit distance matrix or an
//! ambient Euclidean point cloud behind them.
//!
//! Point clouds may carry a power `ε ∈ (0, 1]`, in which case the distance is
//! `|x - y|^ε` (a snowflaked Euclidean metric). Keeping the coordinates around
//! lets ball queries use a uniform grid instead of a linear scan.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative slack used when comparing a distance against a radius.
pub const RADIUS_SLACK: f64 = 1e-12;

/// Largest matrix size for which the triangle inequality is checked over
/// every triple; above it a fixed-seed sample of triples is checked.
const EXHAUSTIVE_TRIANGLE_MAX: usize = 300;
const SAMPLED_TRIANGLES: usize = 200_000;

const GRID_MAX_DIM: usize = 3;

#[derive(Clone, Debug)]
enum Backend {
    /// Row-major `n × n` distance matrix.
    Matrix(Vec<f64>),
    /// Coordinates in `R^dim`; distance is the Euclidean norm raised to `power`.
    Cloud { dim: usize, coords: Vec<f64>, power: f64 },
}

/// A finite metric space. Immutable after construction.
#[derive(Clone, Debug)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    backend: Backend,
    diameter: f64,
    min_positive: f64,
}

/// JSON form of a space.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SpaceDocument {
    Matrix {
        labels: Vec<String>,
        dist: Vec<Vec<f64>>,
    },
    Cloud {
        dim: usize,
        points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
        /// Exponent applied to Euclidean distances (snowflakes).
        #[serde(default = "unit_power", skip_serializing_if = "is_unit_power")]
        power: f64,
    },
}

fn unit_power() -> f64 {
    1.0
}

fn is_unit_power(p: &f64) -> bool {
    *p == 1.0
}

impl FiniteMetricSpace {
    /// Builds a matrix-backed space, validating the metric axioms. The
    /// triangle inequality is checked up to `1e-9 · diameter`.
    pub fn from_matrix(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return invalid("empty metric space");
        }
        if labels.len() != n {
            return invalid(format!("{} labels for {} points", labels.len(), n));
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return invalid(format!("row {i} has length {}, expected {n}", row.len()));
            }
            dist.extend_from_slice(row);
        }
        let mut diameter = 0.0f64;
        let mut min_positive = f64::INFINITY;
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return invalid(format!("dist({i},{i}) = {} is not zero", dist[i * n + i]));
            }
            for j in (i + 1)..n {
                let a = dist[i * n + j];
                let b = dist[j * n + i];
                if !a.is_finite() || a < 0.0 {
                    return invalid(format!("dist({i},{j}) = {a} is not a nonnegative real"));
                }
                if a != b {
                    return invalid(format!("dist({i},{j}) = {a} but dist({j},{i}) = {b}"));
                }
                if a == 0.0 {
                    return invalid(format!("points {i} and {j} coincide"));
                }
                diameter = diameter.max(a);
                min_positive = min_positive.min(a);
            }
        }
        if n == 1 {
            min_positive = 0.0;
        }
        let space = Self { labels, backend: Backend::Matrix(dist), diameter, min_positive };
        space.check_triangle_inequality()?;
        Ok(space)
    }

    /// Builds a Euclidean point cloud. Coincident points are rejected.
    pub fn from_cloud(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..points.len()).map(|i| i.to_string()).collect();
        Self::from_labeled_cloud(dim, points, labels)
    }

    pub fn from_labeled_cloud(dim: usize, points: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if points.is_empty() {
            return invalid("empty metric space");
        }
        if dim == 0 {
            return invalid("ambient dimension must be positive");
        }
        if labels.len() != points.len() {
            return invalid(format!("{} labels for {} points", labels.len(), points.len()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return invalid(format!("point {i} has {} coordinates, expected {dim}", p.len()));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return invalid(format!("point {i} has a non-finite coordinate"));
            }
            coords.extend_from_slice(p);
        }
        Self::from_coords(dim, coords, 1.0, labels)
    }

    fn from_coords(dim: usize, coords: Vec<f64>, power: f64, labels: Vec<String>) -> Result<Self> {
        let mut space = Self {
            labels,
            backend: Backend::Cloud { dim, coords, power },
            diameter: 0.0,
            min_positive: 0.0,
        };
        let (diam_e, min_e) = space.cloud_extremes();
        if space.len() > 1 && min_e == 0.0 {
            return invalid("point cloud contains coincident points");
        }
        space.diameter = diam_e.powf(power);
        space.min_positive = if space.len() > 1 { min_e.powf(power) } else { 0.0 };
        Ok(space)
    }

    pub fn from_document(doc: SpaceDocument) -> Result<Self> {
        match doc {
            SpaceDocument::Matrix { labels, dist } => Self::from_matrix(labels, dist),
            SpaceDocument::Cloud { dim, points, labels, power } => {
                let space = match labels {
                    Some(l) => Self::from_labeled_cloud(dim, points, l)?,
                    None => Self::from_cloud(dim, points)?,
                };
                if power == 1.0 {
                    Ok(space)
                } else {
                    space.snowflake(power)
                }
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    /// Cloud document for cloud-backed spaces, matrix otherwise.
    pub fn to_document(&self) -> SpaceDocument {
        match &self.backend {
            Backend::Cloud { dim, coords, power } => SpaceDocument::Cloud {
                dim: *dim,
                points: coords.chunks(*dim).map(<[f64]>::to_vec).collect(),
                labels: Some(self.labels.clone()),
                power: *power,
            },
            Backend::Matrix(_) => SpaceDocument::Matrix {
                labels: self.labels.clone(),
                dist: (0..self.len()).map(|i| (0..self.len()).map(|j| self.dist(i, j)).collect()).collect(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.backend {
            Backend::Matrix(d) => d[i * self.len() + j],
            Backend::Cloud { dim, coords, power } => {
                let e = euclid_sq(&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim]).sqrt();
                if *power == 1.0 {
                    e
                } else {
                    e.powf(*power)
                }
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Smallest distance between two distinct points (0 for a single point).
    pub fn min_positive_distance(&self) -> f64 {
        self.min_positive
    }

    /// Scale below which statistics of the sample are not trusted: twice the
    /// smallest positive pairwise distance.
    pub fn resolution_floor(&self) -> f64 {
        2.0 * self.min_positive
    }

    /// Ambient dimension for plain Euclidean clouds.
    pub fn ambient_dim(&self) -> Option<usize> {
        match &self.backend {
            Backend::Cloud { dim, power, .. } if *power == 1.0 => Some(*dim),
            _ => None,
        }
    }

    /// Coordinates of point `i` for cloud-backed spaces.
    pub fn point(&self, i: usize) -> Option<&[f64]> {
        match &self.backend {
            Backend::Cloud { dim, coords, .. } => Some(&coords[i * dim..(i + 1) * dim]),
            Backend::Matrix(_) => None,
        }
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self.backend, Backend::Matrix(_))
    }

    /// The space with metric `d^eps`, `0 < eps <= 1`.
    pub fn snowflake(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return invalid(format!("snowflake exponent {eps} outside (0, 1]"));
        }
        match &self.backend {
            Backend::Cloud { dim, coords, power } => {
                Self::from_coords(*dim, coords.clone(), power * eps, self.labels.clone())
            }
            Backend::Matrix(d) => {
                let n = self.len();
                let rows = (0..n).map(|i| d[i * n..(i + 1) * n].iter().map(|x| x.powf(eps)).collect()).collect();
                Self::from_matrix(self.labels.clone(), rows)
            }
        }
    }

    /// The space with every distance multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return invalid(format!("scale factor {c} must be positive"));
        }
        match &self.backend {
            Backend::Cloud { dim, coords, power } => {
                let s = c.powf(1.0 / power);
                Self::from_coords(*dim, coords.iter().map(|x| x * s).collect(), *power, self.labels.clone())
            }
            Backend::Matrix(d) => {
                let n = self.len();
                let rows = (0..n).map(|i| d[i * n..(i + 1) * n].iter().map(|x| x * c).collect()).collect();
                Self::from_matrix(self.labels.clone(), rows)
            }
        }
    }

    /// Sub-space on the given point indices (in the given order).
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let labels: Vec<String> = idx.iter().map(|&i| self.labels[i].clone()).collect();
        match &self.backend {
            Backend::Cloud { dim, coords, power } => {
                let c = idx.iter().flat_map(|&i| coords[i * dim..(i + 1) * dim].iter().copied()).collect();
                Self::from_coords(*dim, c, *power, labels)
            }
            Backend::Matrix(_) => {
                let rows = idx.iter().map(|&i| idx.iter().map(|&j| self.dist(i, j)).collect()).collect();
                Self::from_matrix(labels, rows)
            }
        }
    }

    /// Index answering closed-ball queries against `members`, tuned for radii
    /// up to `radius`.
    pub fn ball_index(&self, members: &[usize], radius: f64) -> BallIndex<'_> {
        BallIndex::new(self, members.to_vec(), radius)
    }

    fn check_triangle_inequality(&self) -> Result<()> {
        let n = self.len();
        let tol = 1e-9 * self.diameter;
        let bad = |i: usize, j: usize, k: usize| self.dist(i, k) > self.dist(i, j) + self.dist(j, k) + tol;
        if n <= EXHAUSTIVE_TRIANGLE_MAX {
            let violation = (0..n).into_par_iter().find_map_first(|i| {
                for j in 0..n {
                    for k in 0..n {
                        if bad(i, j, k) {
                            return Some((i, j, k));
                        }
                    }
                }
                None
            });
            if let Some((i, j, k)) = violation {
                return invalid(format!("triangle inequality fails for ({i},{j},{k})"));
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for _ in 0..SAMPLED_TRIANGLES {
                let (i, j, k) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if bad(i, j, k) {
                    return invalid(format!("triangle inequality fails for ({i},{j},{k})"));
                }
            }
        }
        Ok(())
    }

    /// Euclidean (unpowered) diameter and minimum positive distance.
    fn cloud_extremes(&self) -> (f64, f64) {
        let Backend::Cloud { dim, coords, .. } = &self.backend else { unreachable!() };
        let n = self.len();
        let dim = *dim;
        let p = |i: usize| &coords[i * dim..(i + 1) * dim];
        let diam_sq = (0..n)
            .into_par_iter()
            .map(|i| ((i + 1)..n).map(|j| euclid_sq(p(i), p(j))).fold(0.0f64, f64::max))
            .reduce(|| 0.0, f64::max);
        if n < 2 {
            return (diam_sq.sqrt(), 0.0);
        }
        if dim > GRID_MAX_DIM || n < 2048 {
            let min_sq = (0..n)
                .into_par_iter()
                .map(|i| ((i + 1)..n).map(|j| euclid_sq(p(i), p(j))).fold(f64::INFINITY, f64::min))
                .reduce(|| f64::INFINITY, f64::min);
            return (diam_sq.sqrt(), min_sq.sqrt());
        }
        // Any pair closer than the cell size sits in adjacent cells, so the
        // first cell size that yields a candidate pair yields the exact minimum.
        let mut cell = diam_sq.sqrt() / (n as f64).powf(1.0 / dim as f64);
        loop {
            let all: Vec<usize> = (0..n).collect();
            let grid = Grid::build(coords, dim, cell, &all);
            let min_sq = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut best = f64::INFINITY;
                    grid.for_each_near(p(i), cell, |j| {
                        if j != i {
                            best = best.min(euclid_sq(p(i), p(j)));
                        }
                    });
                    best
                })
                .reduce(|| f64::INFINITY, f64::min);
            if min_sq <= cell * cell {
                return (diam_sq.sqrt(), min_sq.sqrt());
            }
            cell *= 2.0;
        }
    }

    pub(crate) fn cloud_parts(&self) -> Option<(usize, &[f64], f64)> {
        match &self.backend {
            Backend::Cloud { dim, coords, power } => Some((*dim, coords.as_slice(), *power)),
            Backend::Matrix(_) => None,
        }
    }
}

#[inline]
pub(crate) fn euclid_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform grid over ambient coordinates, keyed by integer cell coordinates.
#[derive(Clone, Debug)]
pub(crate) struct Grid {
    dim: usize,
    cell: f64,
    cells: HashMap<[i64; GRID_MAX_DIM], Vec<usize>>,
}

impl Grid {
    pub(crate) fn new(dim: usize, cell: f64) -> Self {
        debug_assert!(dim <= GRID_MAX_DIM);
        Self { dim, cell, cells: HashMap::new() }
    }

    pub(crate) fn build(coords: &[f64], dim: usize, cell: f64, members: &[usize]) -> Self {
        let mut g = Self::new(dim, cell);
        for &m in members {
            g.insert(&coords[m * dim..(m + 1) * dim], m);
        }
        g
    }

    fn key(&self, x: &[f64]) -> [i64; GRID_MAX_DIM] {
        let mut k = [0i64; GRID_MAX_DIM];
        for (d, v) in x.iter().enumerate() {
            k[d] = (v / self.cell).floor() as i64;
        }
        k
    }

    pub(crate) fn insert(&mut self, x: &[f64], id: usize) {
        let k = self.key(x);
        self.cells.entry(k).or_default().push(id);
    }

    /// Calls `f` on every stored id whose cell intersects the box of
    /// half-width `radius` around `x`.
    pub(crate) fn for_each_near(&self, x: &[f64], radius: f64, mut f: impl FnMut(usize)) {
        let mut lo = [0i64; GRID_MAX_DIM];
        let mut hi = [0i64; GRID_MAX_DIM];
        for d in 0..self.dim {
            lo[d] = ((x[d] - radius) / self.cell).floor() as i64;
            hi[d] = ((x[d] + radius) / self.cell).floor() as i64;
        }
        let span: i64 = (0..self.dim).map(|d| hi[d] - lo[d] + 1).product();
        if span as usize > 4 * self.cells.len() {
            for ids in self.cells.values() {
                ids.iter().copied().for_each(&mut f);
            }
            return;
        }
        let mut cur = lo;
        loop {
            if let Some(ids) = self.cells.get(&cur) {
                ids.iter().copied().for_each(&mut f);
            }
            let mut d = 0;
            loop {
                if d == self.dim {
                    return;
                }
                cur[d] += 1;
                if cur[d] <= hi[d] {
                    break;
                }
                cur[d] = lo[d];
                d += 1;
            }
        }
    }
}

/// Closed-ball queries `{m ∈ members : d(center, m) <= r}`.
pub struct BallIndex<'a> {
    space: &'a FiniteMetricSpace,
    members: Vec<usize>,
    grid: Option<Grid>,
}

impl<'a> BallIndex<'a> {
    fn new(space: &'a FiniteMetricSpace, members: Vec<usize>, radius: f64) -> Self {
        let grid = match space.cloud_parts() {
            Some((dim, coords, power)) if dim <= GRID_MAX_DIM && members.len() > 64 && radius > 0.0 => {
                let cell = radius.powf(1.0 / power);
                Some(Grid::build(coords, dim, cell, &members))
            }
            _ => None,
        };
        Self { space, members, grid }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Members within distance `r` of ground point `center`, sorted by index.
    pub fn within(&self, center: usize, r: f64, out: &mut Vec<usize>) {
        out.clear();
        let r = r * (1.0 + RADIUS_SLACK);
        match (&self.grid, self.space.cloud_parts()) {
            (Some(grid), Some((_, _, power))) => {
                let x = self.space.point(center).expect("cloud point");
                grid.for_each_near(x, r.powf(1.0 / power), |m| {
                    if self.space.dist(center, m) <= r {
                        out.push(m);
                    }
                });
                out.sort_unstable();
            }
            _ => out.extend(self.members.iter().copied().filter(|&m| self.space.dist(center, m) <= r)),
        }
    }

    /// Largest distance from `center` to a member inside the closed ball of
    /// radius `r` (0 if only the center itself is there).
    pub fn farthest_within(&self, center: usize, r: f64) -> f64 {
        let mut buf = Vec::new();
        self.within(center, r, &mut buf);
        buf.iter().map(|&m| self.space.dist(center, m)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> FiniteMetricSpace {
        let pts = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        FiniteMetricSpace::from_cloud(1, pts).unwrap()
    }

    #[test]
    fn matrix_rejects_asymmetry_and_triangle_violations() {
        let l = vec!["a".into(), "b".into()];
        assert!(FiniteMetricSpace::from_matrix(l.clone(), vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        let l3: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::from_matrix(l3, bad).is_err());
        assert!(FiniteMetricSpace::from_matrix(vec![], vec![]).is_err());
    }

    #[test]
    fn cloud_extremes_match_brute_force() {
        let s = line(3001);
        assert!((s.diameter() - 1.0).abs() < 1e-15);
        assert!((s.min_positive_distance() - 1.0 / 3000.0).abs() < 1e-12);
        assert!((s.resolution_floor() - 2.0 / 3000.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_cloud_points_are_rejected() {
        assert!(FiniteMetricSpace::from_cloud(1, vec![vec![0.5], vec![0.5]]).is_err());
    }

    #[test]
    fn ball_index_agrees_with_scan() {
        let pts: Vec<Vec<f64>> =
            (0..40).flat_map(|i| (0..40).map(move |j| vec![i as f64 / 39.0, j as f64 / 39.0])).collect();
        let s = FiniteMetricSpace::from_cloud(2, pts).unwrap().snowflake(0.7).unwrap();
        let members: Vec<usize> = (0..s.len()).step_by(3).collect();
        let idx = s.ball_index(&members, 0.2);
        let mut out = Vec::new();
        for c in [0, 17, 800, 1599] {
            idx.within(c, 0.2, &mut out);
            let brute: Vec<usize> = members.iter().copied().filter(|&m| s.dist(c, m) <= 0.2).collect();
            assert_eq!(out, brute);
        }
    }

    #[test]
    fn document_round_trip() {
        let s = line(5);
        let text = serde_json::to_string(&s.to_document()).unwrap();
        assert!(text.contains("\"type\":\"cloud\""));
        let back = FiniteMetricSpace::from_json(&text).unwrap();
        assert_eq!(back.len(), 5);
        let m = s.snowflake(0.5).unwrap().to_document();
        assert!(matches!(m, SpaceDocument::Cloud { power, .. } if power == 0.5));
        let back = FiniteMetricSpace::from_document(m).unwrap();
        assert!((back.dist(0, 4) - 1.0).abs() < 1e-15);
    }
}
