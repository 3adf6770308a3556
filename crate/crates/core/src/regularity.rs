//! Doubling, uniform perfectness and Ahlfors regularity diagnostics.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::net::{is_separated, NetHierarchy};

/// Summary of the regularity diagnostics of a sample.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub doubling_lower_bound: usize,
    pub perfectness_constant: f64,
    pub perfectness_rho_grid: Vec<f64>,
    pub ahlfors_exponent: f64,
    pub ahlfors_constant: f64,
    pub ahlfors_levels: Vec<usize>,
    pub resolution_floor: f64,
}

/// Result of the Ahlfors regularity fit.
#[derive(Clone, Debug, Serialize)]
pub struct AhlforsFit {
    pub s: f64,
    pub a: f64,
    /// Level whose net carries the counting measure.
    pub measure_level: usize,
    /// Levels whose radii enter the regression.
    pub levels: Vec<usize>,
}

/// Lower bound on the doubling constant: the largest greedy `ρ/2`-separated
/// subset of a ball `B(x, ρ)` over net centers `x ∈ X_k`, `ρ = radius(k)`,
/// over all levels `k` (levels below the resolution floor still yield genuine
/// separated sets).
pub fn estimate_doubling(space: &FiniteMetricSpace, hierarchy: &NetHierarchy) -> usize {
    let all: Vec<usize> = (0..space.len()).collect();
    let mut best = 1;
    for k in 0..=hierarchy.k_max() {
        let rho = hierarchy.radius(k);
        let index = space.ball_index(&all, rho);
        let level_best = hierarchy
            .level(k)
            .par_iter()
            .map_init(Vec::new, |buf, &x| {
                index.within(x, rho, buf);
                greedy_separated(space, buf, rho / 2.0).len()
            })
            .max()
            .unwrap_or(1);
        best = best.max(level_best);
    }
    best
}

/// Greedy `r`-separated subset of `candidates`, scanned in the given order.
pub fn greedy_separated(space: &FiniteMetricSpace, candidates: &[usize], r: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for &c in candidates {
        if chosen.iter().all(|&q| is_separated(space.dist(c, q), r)) {
            chosen.push(c);
        }
    }
    chosen
}

/// Largest `a` on the grid `{0.01, …, 0.99}` such that every closed annulus
/// `{y : aρ <= d(x, y) <= ρ}` is nonempty, over all sample points `x` and all
/// `ρ` in `rho_grid`. Returns 0 if even `a = 0.01` fails.
pub fn estimate_uniform_perfectness(space: &FiniteMetricSpace, rho_grid: &[f64]) -> Result<f64> {
    let centers: Vec<usize> = (0..space.len()).collect();
    estimate_uniform_perfectness_at(space, &centers, rho_grid)
}

/// As [`estimate_uniform_perfectness`] with an explicit set of centers.
pub fn estimate_uniform_perfectness_at(space: &FiniteMetricSpace, centers: &[usize], rho_grid: &[f64]) -> Result<f64> {
    if rho_grid.is_empty() {
        return invalid("empty radius grid");
    }
    if let Some(r) = rho_grid.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return invalid(format!("radius {r} must be positive"));
    }
    let all: Vec<usize> = (0..space.len()).collect();
    let mut ratio = f64::INFINITY;
    for &rho in rho_grid {
        let index = space.ball_index(&all, rho);
        let level = centers
            .par_iter()
            .map(|&x| index.farthest_within(x, rho) / rho)
            .reduce(|| f64::INFINITY, f64::min);
        ratio = ratio.min(level);
    }
    Ok(snap_to_grid(ratio))
}

/// Largest grid value `a ∈ {0.01, …, 0.99}` with `a <= ratio`, or 0.
fn snap_to_grid(ratio: f64) -> f64 {
    let steps = ((ratio * 100.0) + 1e-9).floor().min(99.0);
    if steps < 1.0 {
        0.0
    } else {
        steps / 100.0
    }
}

/// Fits `μ(B(x, r)) ≈ r^s` where `μ` is the normalized counting measure on
/// the finest valid net. Radii are the radii of the valid levels strictly
/// coarser than that net and below half the diameter; centers are the points
/// of the finest valid net.
pub fn fit_ahlfors_regularity(space: &FiniteMetricSpace, hierarchy: &NetHierarchy) -> Result<AhlforsFit> {
    let finest = hierarchy
        .finest_valid()
        .ok_or_else(|| Error::InsufficientResolution("no level above the resolution floor".into()))?;
    let levels: Vec<usize> = (0..finest)
        .filter(|&k| hierarchy.radius(k) < space.diameter() / 2.0)
        .collect();
    if levels.len() < 3 {
        return Err(Error::InsufficientResolution(format!(
            "{} usable levels for the Ahlfors fit, need 3",
            levels.len()
        )));
    }
    let net = hierarchy.level(finest);
    let mass = 1.0 / net.len() as f64;
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(levels.len() * net.len());
    for &k in &levels {
        let r = hierarchy.radius(k);
        let index = space.ball_index(net, r);
        let counts: Vec<usize> = net
            .par_iter()
            .map_init(Vec::new, |buf, &x| {
                index.within(x, r, buf);
                buf.len()
            })
            .collect();
        samples.extend(counts.into_iter().map(|c| (r.ln(), (c as f64 * mass).ln())));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx) * (s.0 - mx)).sum();
    let s = (sxy / sxx).max(0.0);
    let a = samples
        .iter()
        .map(|&(lr, lm)| (lm - s * lr).abs().exp())
        .fold(1.0, f64::max);
    Ok(AhlforsFit { s, a, measure_level: finest, levels })
}

/// `A^(-2/s)`: supremum of the uniform-perfectness constants guaranteed for
/// an `(A, s)`-Ahlfors regular space.
pub fn lemma21_perfectness_bound(a: f64, s: f64) -> Result<f64> {
    if !(a >= 1.0) || !(s > 0.0) {
        return invalid(format!("need A >= 1 and s > 0, got A = {a}, s = {s}"));
    }
    Ok(a.powf(-2.0 / s))
}

/// Uniform-perfectness constant `c0 / (2 L0 diam)` implied by the
/// quasi-selfsimilarity constants, clamped below 1.
pub fn derive_qss_perfectness_constants(l0: f64, rho0: f64, c0: f64, diam: f64) -> Result<f64> {
    if !(l0 >= 1.0) || !(rho0 > 0.0) || !(c0 > 0.0) || !(diam >= rho0) {
        return invalid(format!(
            "need L0 >= 1, rho0 > 0, c0 > 0, diam >= rho0; got {l0}, {rho0}, {c0}, {diam}"
        ));
    }
    Ok((c0 / (2.0 * l0 * diam)).min(1.0 - f64::EPSILON))
}

/// Inverse relation `c0 = a0 · ρ0 / L0`.
pub fn qss_diameter_bound(a0: f64, rho0: f64, l0: f64) -> Result<f64> {
    if !(a0 > 0.0 && a0 < 1.0) || !(rho0 > 0.0) || !(l0 >= 1.0) {
        return invalid(format!("need 0 < a0 < 1, rho0 > 0, L0 >= 1; got {a0}, {rho0}, {l0}"));
    }
    Ok(a0 * rho0 / l0)
}

/// Runs all diagnostics. The perfectness grid is the set of valid net radii
/// strictly below the diameter.
pub fn regularity_report(space: &FiniteMetricSpace, hierarchy: &NetHierarchy) -> Result<RegularityReport> {
    let rho_grid: Vec<f64> = (0..=hierarchy.k_max())
        .filter(|&k| hierarchy.is_valid(k))
        .map(|k| hierarchy.radius(k))
        .filter(|&r| r < space.diameter())
        .collect();
    let perfectness = if rho_grid.is_empty() { 0.0 } else { estimate_uniform_perfectness(space, &rho_grid)? };
    let fit = fit_ahlfors_regularity(space, hierarchy)?;
    Ok(RegularityReport {
        doubling_lower_bound: estimate_doubling(space, hierarchy),
        perfectness_constant: perfectness,
        perfectness_rho_grid: rho_grid,
        ahlfors_exponent: fit.s,
        ahlfors_constant: fit.a,
        ahlfors_levels: fit.levels,
        resolution_floor: space.resolution_floor(),
    })
}
