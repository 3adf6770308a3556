//! Moduli of annuli and the curves `k ↦ sup_{i, y} p-Mod_k(y)`.
//!
//! For a center `y ∈ X_i` the annulus modulus at depth `k` is the modulus,
//! in the path graph of level `i + k`, between the net points in the closed
//! ball `B̄(y, L1·base^(-i))` and the net points at distance at least
//! `L2·base^(-i)` from `y`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fmt::sig;
use crate::metric::{BallIndex, FiniteMetricSpace, RADIUS_SLACK};
use crate::modulus::{
    build_path_graph, solve_modulus_with, AdjacencyRule, ModulusProblem, ModulusResult, PathGraph, SolverOptions,
};
use crate::net::NetHierarchy;

/// Geometry of the annuli and solver tolerance.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CurveConfig {
    pub lambda: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub rule: AdjacencyRule,
    pub tol: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { lambda: 10.0, l1: 3.0, l2: 4.0, rule: AdjacencyRule::DistanceSurrogate, tol: 1e-5 }
    }
}

impl CurveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return invalid(format!("lambda {} must be positive", self.lambda));
        }
        if !(self.l1 >= 1.0 && self.l2 > self.l1 && self.l2.is_finite()) {
            return invalid(format!("need 1 <= L1 < L2, got L1 = {}, L2 = {}", self.l1, self.l2));
        }
        if !(self.tol > 0.0) {
            return invalid("tolerance must be positive");
        }
        Ok(())
    }
}

/// One annulus: center `y ∈ X_i`, outer level `i`, depth `k`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AnnulusSpec {
    pub center: usize,
    pub i: usize,
    pub k: usize,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub lambda: f64,
}

/// Range of outer levels `i` over which the supremum is taken.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Truncation {
    Full { i_max: usize },
    Truncated { n0: usize },
}

impl Truncation {
    pub fn top(self) -> usize {
        match self {
            Truncation::Full { i_max } => i_max,
            Truncation::Truncated { n0 } => n0,
        }
    }

    pub fn label(self) -> String {
        match self {
            Truncation::Full { i_max } => format!("full({i_max})"),
            Truncation::Truncated { n0 } => format!("truncated({n0})"),
        }
    }
}

/// Modulus of one annulus, with the subgraph it was solved on.
#[derive(Clone, Debug, Serialize)]
pub struct AnnulusModulus {
    pub value: f64,
    /// Ground indices of the subgraph vertices; `result.density` is indexed
    /// like this list.
    pub vertices: Vec<usize>,
    pub result: ModulusResult,
}

/// Supremum at one depth, with the maximizing annulus.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CurveEntry {
    pub k: usize,
    pub value: f64,
    pub i_star: Option<usize>,
    pub y_star: Option<usize>,
    /// Number of annuli whose solve hit its iteration budget.
    pub unconverged: usize,
}

/// The sequence `k ↦ sup_{i, y} p-Mod_k(y)` with its configuration.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModulusCurve {
    pub p: f64,
    pub base: f64,
    pub config: CurveConfig,
    pub truncation: Truncation,
    pub entries: Vec<CurveEntry>,
}

impl ModulusCurve {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub const CSV_HEADER: &'static str = "k,p,value,i_star,y_star,truncation,lambda,L1,L2,base,adjacency_rule";

    /// CSV rows (without header).
    pub fn csv_rows(&self) -> Vec<String> {
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        self.entries
            .iter()
            .map(|e| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    e.k,
                    sig(self.p),
                    sig(e.value),
                    opt(e.i_star),
                    opt(e.y_star),
                    self.truncation.label(),
                    sig(self.config.lambda),
                    sig(self.config.l1),
                    sig(self.config.l2),
                    sig(self.base),
                    self.config.rule.name()
                )
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in self.csv_rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }
}

struct Level<'a> {
    graph: PathGraph,
    index: BallIndex<'a>,
    local: Vec<u32>,
}

/// Shared per-space state: lazily built path graphs and ball indexes for
/// each level. Safe to share between threads.
pub struct AnnulusContext<'a> {
    pub space: &'a FiniteMetricSpace,
    pub hierarchy: &'a NetHierarchy,
    pub config: CurveConfig,
    levels: Vec<OnceLock<Result<Level<'a>>>>,
}

impl<'a> AnnulusContext<'a> {
    pub fn new(space: &'a FiniteMetricSpace, hierarchy: &'a NetHierarchy, config: CurveConfig) -> Result<Self> {
        config.validate()?;
        let levels = (0..=hierarchy.k_max()).map(|_| OnceLock::new()).collect();
        Ok(Self { space, hierarchy, config, levels })
    }

    fn level(&self, k: usize) -> Result<&Level<'a>> {
        self.hierarchy.require_valid(k)?;
        let slot = self.levels[k].get_or_init(|| {
            let graph = build_path_graph(self.space, self.hierarchy, k, self.config.lambda, self.config.rule)?;
            let reach = self.config.l2 * self.hierarchy.radius(0);
            let index = self.space.ball_index(self.hierarchy.level(k), reach.min(self.space.diameter()));
            let mut local = vec![u32::MAX; self.space.len()];
            for (j, &v) in graph.vertices.iter().enumerate() {
                local[v] = j as u32;
            }
            Ok(Level { graph, index, local })
        });
        slot.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// Path graph of level `k`.
    pub fn graph(&self, k: usize) -> Result<&PathGraph> {
        Ok(&self.level(k)?.graph)
    }

    /// Modulus of the annulus around `center ∈ X_i` at depth `k`.
    pub fn annulus(&self, center: usize, i: usize, k: usize, p: f64) -> Result<AnnulusModulus> {
        let lvl = self.level(i + k)?;
        let ri = self.hierarchy.radius(i);
        let inner = self.config.l1 * ri * (1.0 + RADIUS_SLACK);
        let outer = self.config.l2 * ri * (1.0 - RADIUS_SLACK);
        let reach = outer + 2.0 * lvl.graph.scale * (1.0 + RADIUS_SLACK);
        let mut ground = Vec::new();
        lvl.index.within(center, reach, &mut ground);
        let keep: Vec<usize> = ground.iter().map(|&g| lvl.local[g] as usize).collect();
        let mut e = Vec::new();
        let mut f = Vec::new();
        for (j, &g) in ground.iter().enumerate() {
            let d = self.space.dist(center, g);
            if d <= inner {
                e.push(j);
            }
            if d >= outer {
                f.push(j);
            }
        }
        if e.is_empty() || f.is_empty() {
            return Ok(AnnulusModulus {
                value: 0.0,
                vertices: ground.clone(),
                result: ModulusResult::disconnected(ground.len()),
            });
        }
        let sub = lvl.graph.induced(&keep);
        let problem = ModulusProblem::from_adjacency(sub.adjacency, e, f, p)?;
        let result = solve_modulus_with(&problem, &SolverOptions::with_tol(self.config.tol))?;
        Ok(AnnulusModulus { value: result.value, vertices: ground, result })
    }

    /// Supremum of the annulus moduli at depth `k` over all centers of the
    /// levels `i ∈ i_range`. The first maximizer in `(i, y)` order is kept.
    pub fn modulus_at_depth(&self, p: f64, k: usize, i_range: std::ops::RangeInclusive<usize>) -> Result<CurveEntry> {
        Ok(self.curve_entries(p, &[k], i_range)?.remove(0))
    }

    /// The curve over `ks` with the supremum restricted by `truncation`.
    pub fn curve(&self, p: f64, ks: &[usize], truncation: Truncation) -> Result<ModulusCurve> {
        let entries = self.curve_entries(p, ks, 0..=truncation.top())?;
        Ok(ModulusCurve { p, base: self.hierarchy.base, config: self.config, truncation, entries })
    }

    fn curve_entries(&self, p: f64, ks: &[usize], i_range: std::ops::RangeInclusive<usize>) -> Result<Vec<CurveEntry>> {
        if i_range.is_empty() {
            return invalid("empty range of outer levels");
        }
        let mut jobs = Vec::new();
        for (slot, &k) in ks.iter().enumerate() {
            for i in i_range.clone() {
                self.hierarchy.require_valid(i + k)?;
                jobs.extend(self.hierarchy.level(i).iter().map(|&y| (slot, i, y)));
            }
        }
        for &k in ks {
            for i in i_range.clone() {
                self.level(i + k)?;
            }
        }
        let values: Vec<Result<(f64, bool)>> = jobs
            .par_iter()
            .map(|&(slot, i, y)| self.annulus(y, i, ks[slot], p).map(|a| (a.value, a.result.converged)))
            .collect();
        let mut entries: Vec<CurveEntry> =
            ks.iter().map(|&k| CurveEntry { k, value: 0.0, i_star: None, y_star: None, unconverged: 0 }).collect();
        for (&(slot, i, y), v) in jobs.iter().zip(values) {
            let (value, converged) = v?;
            let e = &mut entries[slot];
            if !converged {
                e.unconverged += 1;
            }
            if value > e.value {
                e.value = value;
                e.i_star = Some(i);
                e.y_star = Some(y);
            }
        }
        Ok(entries)
    }
}

/// Annulus modulus for a single specification.
pub fn annulus_modulus(
    space: &FiniteMetricSpace,
    hierarchy: &NetHierarchy,
    spec: &AnnulusSpec,
    p: f64,
    tol: f64,
    rule: AdjacencyRule,
) -> Result<AnnulusModulus> {
    let config = CurveConfig { lambda: spec.lambda, l1: spec.l1, l2: spec.l2, rule, tol };
    if !hierarchy.level(spec.i).contains(&spec.center) {
        return invalid(format!("point {} is not in the net of level {}", spec.center, spec.i));
    }
    AnnulusContext::new(space, hierarchy, config)?.annulus(spec.center, spec.i, spec.k, p)
}

/// `p-Mod_k(X, n0)` over the given depths.
pub fn truncated_modulus_curve(
    space: &FiniteMetricSpace,
    hierarchy: &NetHierarchy,
    p: f64,
    ks: &[usize],
    n0: usize,
    config: CurveConfig,
) -> Result<ModulusCurve> {
    AnnulusContext::new(space, hierarchy, config)?.curve(p, ks, Truncation::Truncated { n0 })
}

/// Scale constants of a quasi-selfsimilar space.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ScaleConstants {
    /// Smallest `i >= 0` with `2 (L0 + 5)^2 base^(-i) <= ρ0`.
    pub i0: usize,
    /// Largest `i` with `(L0 + 5) base^(-i) >= base^(-i0)`.
    pub n0: usize,
}

pub fn compute_scale_constants(l0: f64, rho0: f64, base: f64) -> Result<ScaleConstants> {
    if !(l0 >= 1.0) || !(rho0 > 0.0) || !(base > 1.0) || !l0.is_finite() || !rho0.is_finite() {
        return invalid(format!("need L0 >= 1, rho0 > 0, base > 1; got {l0}, {rho0}, {base}"));
    }
    let slack = 1e-12;
    let c = l0 + 5.0;
    let mut i0 = 0usize;
    while 2.0 * c * c * base.powi(-(i0 as i32)) > rho0 * (1.0 + slack) {
        i0 += 1;
    }
    let mut n0 = i0;
    while c * base.powi(-((n0 + 1) as i32)) >= base.powi(-(i0 as i32)) * (1.0 - slack) {
        n0 += 1;
    }
    Ok(ScaleConstants { i0, n0 })
}

/// `log_base(2 / (L2 - L1))`, the depth beyond which shrinking `λ` changes
/// the modulus by at most a bounded factor.
pub fn lambda_depth_threshold(l1: f64, l2: f64, base: f64) -> f64 {
    (2.0 / (l2 - l1)).ln() / base.ln()
}

/// Smallest `C` (over shifts `ℓ` in `ells`) with
/// `full[k + ℓ] <= C · truncated[k]` on all depths present in both curves.
/// Returns `(C, ℓ)`; `C` is infinite when no shift works.
pub fn fit_truncation_relation(full: &ModulusCurve, truncated: &ModulusCurve, ells: &[usize]) -> (f64, usize) {
    let lookup = |c: &ModulusCurve, k: usize| c.entries.iter().find(|e| e.k == k).map(|e| e.value);
    let mut best = (f64::INFINITY, ells.first().copied().unwrap_or(0));
    for &ell in ells {
        let mut c: f64 = 0.0;
        let mut pairs = 0;
        for e in &truncated.entries {
            if let Some(v) = lookup(full, e.k + ell) {
                pairs += 1;
                if v > 0.0 {
                    c = c.max(if e.value > 0.0 { v / e.value } else { f64::INFINITY });
                }
            }
        }
        if pairs > 0 && c < best.0 {
            best = (c, ell);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_constants() {
        assert_eq!(compute_scale_constants(5.0, 1.0, 10.0).unwrap(), ScaleConstants { i0: 3, n0: 4 });
        assert_eq!(compute_scale_constants(1.0, 72.0, 10.0).unwrap(), ScaleConstants { i0: 0, n0: 0 });
        assert_eq!(compute_scale_constants(4.0, 1.0, 3.0).unwrap(), ScaleConstants { i0: 5, n0: 7 });
        assert!(compute_scale_constants(0.5, 1.0, 3.0).is_err());
    }

    #[test]
    fn threshold_depth() {
        assert!((lambda_depth_threshold(3.0, 4.0, 10.0) - 2f64.log10()).abs() < 1e-15);
    }
}
