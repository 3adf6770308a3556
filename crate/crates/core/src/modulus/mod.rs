//! Combinatorial p-modulus of vertex path families on graphs.
//!
//! For vertex sets `E`, `F` of a graph, `p-Mod(E, F)` is the minimum of
//! `Σ f(q)^p` over densities `f >= 0` with `Σ_{q∈γ} f(q) >= 1` along every
//! path `γ` from `E` to `F`. [`solve_modulus`] computes it by constraint
//! generation with a shortest-path separation oracle.

mod brute;
mod dual;
mod flow;
mod graph;
mod oracle;
mod simplex;

use serde::Serialize;

use crate::error::{invalid, Result};

pub use brute::{brute_force_modulus, enumerate_simple_paths, exhaustive_min_vertex_cut};
pub use flow::{min_vertex_cut, VertexCut};
pub use graph::{build_path_graph, build_path_graph_on, surrogate_adjacent, AdjacencyRule, PathGraph};
pub use oracle::lightest_path;

/// One modulus instance on an explicit graph.
#[derive(Clone, Debug, Serialize)]
pub struct ModulusProblem {
    pub adjacency: Vec<Vec<usize>>,
    pub e: Vec<usize>,
    pub f: Vec<usize>,
    pub p: f64,
}

impl ModulusProblem {
    pub fn new(graph: &PathGraph, e: Vec<usize>, f: Vec<usize>, p: f64) -> Result<Self> {
        Self::from_adjacency(graph.adjacency.clone(), e, f, p)
    }

    pub fn from_adjacency(adjacency: Vec<Vec<usize>>, mut e: Vec<usize>, mut f: Vec<usize>, p: f64) -> Result<Self> {
        let n = adjacency.len();
        if !(p >= 0.0 && p.is_finite()) {
            return invalid(format!("exponent p = {p} must be a nonnegative real"));
        }
        if e.is_empty() || f.is_empty() {
            return invalid("E and F must be nonempty");
        }
        e.sort_unstable();
        e.dedup();
        f.sort_unstable();
        f.dedup();
        if let Some(v) = e.iter().chain(&f).find(|&&v| v >= n) {
            return invalid(format!("vertex {v} out of range for {n} vertices"));
        }
        for (a, nb) in adjacency.iter().enumerate() {
            if let Some(&b) = nb.iter().find(|&&b| b >= n || b == a) {
                return invalid(format!("bad edge ({a},{b})"));
            }
        }
        Ok(Self { adjacency, e, f, p })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusStatus {
    Solved,
    Disconnected,
}

/// Optimal value and density of a modulus problem.
#[derive(Clone, Debug, Serialize)]
pub struct ModulusResult {
    pub value: f64,
    /// Admissible density, indexed by vertex.
    pub density: Vec<f64>,
    /// Paths whose constraints support the optimum.
    pub active_paths: Vec<Vec<usize>>,
    pub status: ModulusStatus,
    pub iterations: usize,
    /// Certified lower bound on the optimum.
    pub lower_bound: f64,
    /// False when the iteration budget ran out before the gap closed.
    pub converged: bool,
}

impl ModulusResult {
    pub(crate) fn disconnected(n: usize) -> Self {
        Self {
            value: 0.0,
            density: vec![0.0; n],
            active_paths: Vec::new(),
            status: ModulusStatus::Disconnected,
            iterations: 0,
            lower_bound: 0.0,
            converged: true,
        }
    }
}

/// Tolerances and budgets of the constraint-generation solver.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverOptions {
    /// Relative optimality gap at termination.
    pub tol: f64,
    /// A path is violated when its weight is below `1 - feasibility_tol`.
    pub feasibility_tol: f64,
    /// Budget of inner Newton iterations (simplex pivots for the linear
    /// program).
    pub max_inner: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-5, feasibility_tol: 1e-7, max_inner: 50_000 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, feasibility_tol: (0.01 * tol).min(1e-7), ..Self::default() }
    }
}

/// `f^p` with the convention `0^p = 0` (also for `p = 0`).
#[inline]
pub fn mass(f: f64, p: f64) -> f64 {
    if f <= 0.0 {
        0.0
    } else {
        f.powf(p)
    }
}

/// `Σ_q f(q)^p`.
pub fn objective(density: &[f64], p: f64) -> f64 {
    density.iter().map(|&f| mass(f, p)).sum()
}

/// Solves the problem to relative accuracy `tol`.
pub fn solve_modulus(problem: &ModulusProblem, tol: f64) -> Result<ModulusResult> {
    solve_modulus_with(problem, &SolverOptions::with_tol(tol))
}

/// Dispatches on the exponent: `p > 1` by the dual method, `p <= 1` by a
/// minimum vertex cut. For `p <= 1` the optimum is attained by the indicator
/// of a minimum cut; at `p = 1` this is the max-flow min-cut duality.
pub fn solve_modulus_with(problem: &ModulusProblem, opts: &SolverOptions) -> Result<ModulusResult> {
    solve_dispatch(problem, opts, false)
}

/// Solves a `p = 1` problem as a linear program by column generation with a
/// simplex method instead of by maximum flow.
pub fn solve_linear_program(problem: &ModulusProblem, opts: &SolverOptions) -> Result<ModulusResult> {
    if problem.p != 1.0 {
        return invalid(format!("the linear program needs p = 1, got {}", problem.p));
    }
    solve_dispatch(problem, opts, true)
}

fn solve_dispatch(problem: &ModulusProblem, opts: &SolverOptions, simplex_route: bool) -> Result<ModulusResult> {
    if !(opts.tol > 0.0) || !(opts.feasibility_tol > 0.0) {
        return invalid("tolerances must be positive");
    }
    let red = Reduced::new(problem);
    if red.fixed.is_empty() && red.n_e == 0 {
        return Ok(ModulusResult::disconnected(problem.len()));
    }
    let mut res = if red.n_e == 0 {
        Inner { density: vec![], paths: vec![], iterations: 0, lower_bound: 0.0, converged: true }
    } else if simplex_route {
        simplex::solve(&red, opts)
    } else if problem.p <= 1.0 {
        flow::solve(&red)
    } else {
        dual::solve(&red, problem.p, opts)
    };
    let mut density = vec![0.0; problem.len()];
    for (i, &v) in red.to_orig.iter().enumerate() {
        density[v] = res.density[i];
    }
    let mut active_paths: Vec<Vec<usize>> = red.fixed.iter().map(|&v| vec![v]).collect();
    for &v in &red.fixed {
        density[v] = 1.0;
    }
    active_paths.extend(res.paths.drain(..).map(|g| g.into_iter().map(|i| red.to_orig[i as usize]).collect()));
    Ok(ModulusResult {
        value: objective(&density, problem.p),
        density,
        active_paths,
        status: ModulusStatus::Solved,
        iterations: res.iterations,
        lower_bound: res.lower_bound + red.fixed.len() as f64,
        converged: res.converged,
    })
}

/// Output of a solver on the reduced graph.
pub(crate) struct Inner {
    pub density: Vec<f64>,
    pub paths: Vec<Vec<u32>>,
    pub iterations: usize,
    pub lower_bound: f64,
    pub converged: bool,
}

/// The problem restricted to vertices lying on some `E → F` path whose
/// interior avoids `E ∪ F`. Vertices of `E ∩ F` are split off (each forms a
/// one-vertex path forcing density 1) and edges inside `E` or inside `F` are
/// dropped; neither change affects the optimum, since every other constraint
/// is implied by one of the remaining paths.
pub(crate) struct Reduced {
    /// Vertices `0..n_e` are in `E`, `n_e..n_e + n_f` in `F`, the rest interior.
    pub adjacency: Vec<Vec<u32>>,
    pub n_e: usize,
    pub n_f: usize,
    pub to_orig: Vec<usize>,
    pub fixed: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    E,
    F,
    Both,
    Interior,
}

impl Reduced {
    pub fn new(pb: &ModulusProblem) -> Self {
        let n = pb.len();
        let mut role = vec![Role::Interior; n];
        for &v in &pb.e {
            role[v] = Role::E;
        }
        for &v in &pb.f {
            role[v] = if role[v] == Role::E { Role::Both } else { Role::F };
        }
        let fixed: Vec<usize> = (0..n).filter(|&v| role[v] == Role::Both).collect();
        let forward = Self::sweep(pb, &role, Role::E, Role::F);
        let backward = Self::sweep(pb, &role, Role::F, Role::E);
        let keep = |v: usize| match role[v] {
            Role::E => backward[v],
            Role::F => forward[v],
            Role::Interior => forward[v] && backward[v],
            Role::Both => false,
        };
        let mut to_orig: Vec<usize> = Vec::new();
        for want in [Role::E, Role::F, Role::Interior] {
            to_orig.extend((0..n).filter(|&v| role[v] == want && keep(v)));
        }
        let n_e = to_orig.iter().filter(|&&v| role[v] == Role::E).count();
        let n_f = to_orig.iter().filter(|&&v| role[v] == Role::F).count();
        if n_e == 0 {
            return Self { adjacency: vec![], n_e: 0, n_f: 0, to_orig: vec![], fixed };
        }
        let mut local = vec![u32::MAX; n];
        for (i, &v) in to_orig.iter().enumerate() {
            local[v] = i as u32;
        }
        let adjacency = to_orig
            .iter()
            .map(|&v| {
                let mut nb: Vec<u32> = pb.adjacency[v]
                    .iter()
                    .filter(|&&u| local[u] != u32::MAX)
                    .filter(|&&u| !(role[u] == role[v] && role[u] != Role::Interior))
                    .map(|&u| local[u])
                    .collect();
                nb.sort_unstable();
                nb
            })
            .collect();
        Self { adjacency, n_e, n_f, to_orig, fixed }
    }

    /// Vertices reachable from `start` vertices through interior vertices;
    /// `stop` vertices are reached but not expanded.
    fn sweep(pb: &ModulusProblem, role: &[Role], start: Role, stop: Role) -> Vec<bool> {
        let n = pb.len();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&v| role[v] == start).collect();
        for &v in &stack {
            seen[v] = true;
        }
        while let Some(u) = stack.pop() {
            for &w in &pb.adjacency[u] {
                if seen[w] || role[w] == Role::Both || role[w] == start {
                    continue;
                }
                seen[w] = true;
                if role[w] != stop {
                    stack.push(w);
                }
            }
        }
        seen
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_e(&self, v: usize) -> bool {
        v < self.n_e
    }

    pub fn is_f(&self, v: usize) -> bool {
        v >= self.n_e && v < self.n_e + self.n_f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Vec<Vec<usize>> {
        PathGraph::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap().adjacency
    }

    #[test]
    fn chain_values() {
        for (p, want) in [(2.0, 1.0 / 3.0), (1.0, 1.0), (0.5, 1.0), (3.0, 1.0 / 9.0)] {
            let pb = ModulusProblem::from_adjacency(chain(3), vec![0], vec![2], p).unwrap();
            let r = solve_modulus(&pb, 1e-9).unwrap();
            assert!((r.value - want).abs() < 1e-7, "p={p}: {} vs {want}", r.value);
        }
    }

    #[test]
    fn overlapping_e_and_f() {
        let pb = ModulusProblem::from_adjacency(chain(3), vec![0, 1], vec![1, 2], 2.0).unwrap();
        let r = solve_modulus(&pb, 1e-9).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
        assert_eq!(r.density, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn disconnected_is_zero() {
        let adj = PathGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap().adjacency;
        let pb = ModulusProblem::from_adjacency(adj, vec![0], vec![3], 2.0).unwrap();
        let r = solve_modulus(&pb, 1e-6).unwrap();
        assert_eq!(r.status, ModulusStatus::Disconnected);
        assert_eq!(r.value, 0.0);
    }
}
