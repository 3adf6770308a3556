//! Hierarchies of maximal separated subsets (nets) at geometric scales.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::metric::{FiniteMetricSpace, Grid, RADIUS_SLACK};

/// Whether two points at distance `d` count as `r`-separated. Distances equal
/// to `r` up to rounding are not separated.
#[inline]
pub fn is_separated(d: f64, r: f64) -> bool {
    d > r * (1.0 + RADIUS_SLACK)
}

/// Per-level nets `X_k` with radius `unit · base^(-k)`.
#[derive(Clone, Debug, Serialize)]
pub struct NetHierarchy {
    pub base: f64,
    pub unit: f64,
    pub levels: Vec<Vec<usize>>,
    pub resolution_floor: f64,
}

impl NetHierarchy {
    pub fn k_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.unit * self.base.powi(-(k as i32))
    }

    pub fn level(&self, k: usize) -> &[usize] {
        &self.levels[k]
    }

    /// A level is valid when its radius is not below the resolution floor.
    pub fn is_valid(&self, k: usize) -> bool {
        k < self.levels.len() && self.radius(k) >= self.resolution_floor * (1.0 - RADIUS_SLACK)
    }

    /// Finest valid level, if any.
    pub fn finest_valid(&self) -> Option<usize> {
        (0..self.levels.len()).rev().find(|&k| self.is_valid(k))
    }

    pub fn require_valid(&self, k: usize) -> Result<()> {
        if k >= self.levels.len() {
            return Err(Error::InsufficientResolution(format!(
                "level {k} exceeds the hierarchy depth {}",
                self.k_max()
            )));
        }
        if !self.is_valid(k) {
            return Err(Error::InsufficientResolution(format!(
                "level {k} has radius {} below the resolution floor {}",
                self.radius(k),
                self.resolution_floor
            )));
        }
        Ok(())
    }
}

/// Builds nets for `k = 0..=k_max` with radii `base^(-k)`.
pub fn build_net_hierarchy(space: &FiniteMetricSpace, base: f64, k_max: usize) -> Result<NetHierarchy> {
    build_net_hierarchy_with_unit(space, base, k_max, 1.0)
}

/// Builds nets with radii `unit · base^(-k)`.
pub fn build_net_hierarchy_with_unit(
    space: &FiniteMetricSpace,
    base: f64,
    k_max: usize,
    unit: f64,
) -> Result<NetHierarchy> {
    if space.is_empty() {
        return invalid("cannot build nets on an empty space");
    }
    if !(base > 1.0 && base.is_finite()) {
        return invalid(format!("base {base} must exceed 1"));
    }
    if !(unit > 0.0 && unit.is_finite()) {
        return invalid(format!("unit {unit} must be positive"));
    }
    let levels = (0..=k_max)
        .into_par_iter()
        .map(|k| greedy_net(space, unit * base.powi(-(k as i32))))
        .collect();
    Ok(NetHierarchy { base, unit, levels, resolution_floor: space.resolution_floor() })
}

/// Maximal `r`-separated subset obtained by scanning points in index order.
pub fn greedy_net(space: &FiniteMetricSpace, r: f64) -> Vec<usize> {
    let mut net = Vec::new();
    match space.cloud_parts() {
        Some((dim, coords, power)) if dim <= 3 => {
            let reach = (r * (1.0 + RADIUS_SLACK)).powf(1.0 / power);
            let mut grid = Grid::new(dim, reach);
            for i in 0..space.len() {
                let x = &coords[i * dim..(i + 1) * dim];
                let mut ok = true;
                grid.for_each_near(x, reach, |j| {
                    if ok && !is_separated(space.dist(i, j), r) {
                        ok = false;
                    }
                });
                if ok {
                    grid.insert(x, i);
                    net.push(i);
                }
            }
        }
        _ => {
            for i in 0..space.len() {
                if net.iter().all(|&j| is_separated(space.dist(i, j), r)) {
                    net.push(i);
                }
            }
        }
    }
    net
}
