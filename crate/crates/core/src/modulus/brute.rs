//! Exhaustive reference solver used to check [`super::solve_modulus`].
//!
//! Every simple `E → F` path is enumerated and the full convex program is
//! solved by a primal log-barrier interior-point method with Newton steps.
//! For `p < 1` the value is the size of a minimum vertex cut found by
//! exhaustive subset search.

use nalgebra::{DMatrix, DVector};

use super::{objective, ModulusProblem, ModulusResult, ModulusStatus};
use crate::error::{Error, Result};

const MAX_VERTICES: usize = 12;
const MAX_PATHS: usize = 200;
const ENUMERATION_CAP: usize = 1_000_000;
const CUT_MAX_VERTICES: usize = 22;

/// All simple paths starting in `E` and ending in `F` (a vertex of `E ∩ F`
/// is a path on its own). Fails once more than `cap` paths are found.
pub fn enumerate_simple_paths(problem: &ModulusProblem, cap: usize) -> Result<Vec<Vec<usize>>> {
    let n = problem.len();
    let mut is_f = vec![false; n];
    for &v in &problem.f {
        is_f[v] = true;
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; n];
    let mut path = Vec::new();
    fn extend(
        pb: &ModulusProblem,
        is_f: &[bool],
        on_path: &mut [bool],
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> bool {
        let v = *path.last().unwrap();
        if is_f[v] {
            if out.len() == cap {
                return false;
            }
            out.push(path.clone());
        }
        for &u in &pb.adjacency[v] {
            if !on_path[u] {
                on_path[u] = true;
                path.push(u);
                let ok = extend(pb, is_f, on_path, path, out, cap);
                path.pop();
                on_path[u] = false;
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    for &e in &problem.e {
        on_path[e] = true;
        path.push(e);
        let ok = extend(problem, &is_f, &mut on_path, &mut path, &mut out, cap);
        path.pop();
        on_path[e] = false;
        if !ok {
            return Err(Error::TooLarge(format!("more than {cap} simple paths")));
        }
    }
    Ok(out)
}

/// Size of a minimum vertex set meeting every `E → F` path, by trying all
/// subsets in order of size.
pub fn exhaustive_min_vertex_cut(problem: &ModulusProblem) -> Result<usize> {
    let n = problem.len();
    if n > CUT_MAX_VERTICES {
        return Err(Error::TooLarge(format!("{n} vertices exceed {CUT_MAX_VERTICES}")));
    }
    let separates = |mask: u32| {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = problem.e.iter().copied().filter(|&v| mask >> v & 1 == 0).collect();
        for &v in &stack {
            seen[v] = true;
        }
        while let Some(v) = stack.pop() {
            if problem.f.contains(&v) {
                return false;
            }
            for &u in &problem.adjacency[v] {
                if !seen[u] && mask >> u & 1 == 0 {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        true
    };
    let mut best = n;
    for mask in 0u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size < best && separates(mask) {
            best = size;
        }
    }
    Ok(best)
}

/// Exhaustive solve, admissible when the graph has at most 12 vertices or at
/// most 200 simple `E → F` paths.
pub fn brute_force_modulus(problem: &ModulusProblem) -> Result<ModulusResult> {
    let n = problem.len();
    let cap = if n <= MAX_VERTICES { ENUMERATION_CAP } else { MAX_PATHS };
    let paths = enumerate_simple_paths(problem, cap)?;
    if paths.is_empty() {
        return Ok(ModulusResult::disconnected(n));
    }
    if problem.p < 1.0 {
        let size = exhaustive_min_vertex_cut(problem)?;
        return Ok(ModulusResult {
            value: size as f64,
            density: vec![],
            active_paths: vec![],
            status: ModulusStatus::Solved,
            iterations: 0,
            lower_bound: size as f64,
            converged: true,
        });
    }
    let constraints = minimal_vertex_sets(&paths);
    let (density, iterations) = barrier(n, &constraints, problem.p);
    let active_paths = constraints
        .iter()
        .filter(|c| c.iter().map(|&q| density[q]).sum::<f64>() <= 1.0 + 1e-6)
        .cloned()
        .collect();
    let value = objective(&density, problem.p);
    Ok(ModulusResult {
        value,
        density,
        active_paths,
        status: ModulusStatus::Solved,
        iterations,
        lower_bound: value,
        converged: true,
    })
}

/// Sorted vertex sets of the paths with duplicates and strict supersets
/// removed (their constraints are implied).
fn minimal_vertex_sets(paths: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = paths
        .iter()
        .map(|p| {
            let mut s = p.clone();
            s.sort_unstable();
            s
        })
        .collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets.dedup();
    let subset = |a: &[usize], b: &[usize]| a.iter().all(|x| b.binary_search(x).is_ok());
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for s in sets {
        if !kept.iter().any(|k| subset(k, &s)) {
            kept.push(s);
        }
    }
    kept
}

/// Minimizes `Σ x_q^p` subject to `Σ_{q∈c} x_q >= 1` for every constraint
/// set `c` and `x >= 0`. Returns a strictly feasible point whose objective is
/// within about `1e-11` of the optimum, and the number of Newton steps.
fn barrier(n: usize, constraints: &[Vec<usize>], p: f64) -> (Vec<f64>, usize) {
    let mut used: Vec<usize> = constraints.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let d = used.len();
    let local = |q: usize| used.binary_search(&q).unwrap();
    let rows: Vec<Vec<usize>> = constraints.iter().map(|c| c.iter().map(|&q| local(q)).collect()).collect();
    let m = (rows.len() + d) as f64;

    let phi = |x: &DVector<f64>, t: f64| -> f64 {
        let mut v = t * x.iter().map(|&xi| xi.powf(p)).sum::<f64>();
        for xi in x.iter() {
            if *xi <= 0.0 {
                return f64::INFINITY;
            }
            v -= xi.ln();
        }
        for r in &rows {
            let s: f64 = r.iter().map(|&i| x[i]).sum::<f64>() - 1.0;
            if s <= 0.0 {
                return f64::INFINITY;
            }
            v -= s.ln();
        }
        v
    };

    let mut x: DVector<f64> = DVector::from_element(d, 1.5);
    let mut t = 1.0;
    let mut steps = 0;
    loop {
        for _ in 0..200 {
            let mut g = DVector::zeros(d);
            let mut h = DMatrix::zeros(d, d);
            for i in 0..d {
                g[i] = t * p * x[i].powf(p - 1.0) - 1.0 / x[i];
                h[(i, i)] = t * p * (p - 1.0) * x[i].powf(p - 2.0) + 1.0 / (x[i] * x[i]);
            }
            for r in &rows {
                let s: f64 = r.iter().map(|&i| x[i]).sum::<f64>() - 1.0;
                for &i in r {
                    g[i] -= 1.0 / s;
                    for &j in r {
                        h[(i, j)] += 1.0 / (s * s);
                    }
                }
            }
            let dx = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match h.lu().solve(&(-&g)) {
                    Some(v) => v,
                    None => break,
                },
            };
            let decrement = -g.dot(&dx);
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let f0 = phi(&x, t);
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-14 {
                let cand = &x + &dx * step;
                if phi(&cand, t) <= f0 - 0.25 * step * decrement {
                    x = cand;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            steps += 1;
            if !moved {
                break;
            }
        }
        let value: f64 = x.iter().map(|&xi| xi.powf(p)).sum();
        if m / t <= 1e-11 * value.max(1.0) {
            break;
        }
        t *= 8.0;
    }
    let mut out = vec![0.0; n];
    for (i, &q) in used.iter().enumerate() {
        out[q] = x[i];
    }
    (out, steps)
}
