//! `p > 1`: constraint generation with dual coordinate ascent.
//!
//! For an active path set with multipliers `μ_γ >= 0`, the Lagrangian is
//! minimized by `f_q = (s_q / p)^(1/(p-1))` with `s_q = Σ_{γ∋q} μ_γ`, giving
//! the concave dual `D(μ) = Σ μ_γ - (p - 1) Σ_q f_q^p`. Each coordinate step
//! maximizes `D` exactly in one `μ_γ`. `D(μ)` is a lower bound on the
//! modulus; dividing `f` by the weight of the lightest path gives an
//! admissible density and hence an upper bound.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use super::oracle::lightest_reduced;
use super::{objective, Inner, Reduced, SolverOptions};

struct State {
    p: f64,
    alpha: f64,
    paths: Vec<Vec<u32>>,
    mu: Vec<f64>,
    s: Vec<f64>,
    f: Vec<f64>,
    scratch: Vec<f64>,
}

impl State {
    fn density(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            (s / self.p).powf(self.alpha)
        }
    }

    fn path_weight(&self, g: usize) -> f64 {
        self.paths[g].iter().map(|&q| self.f[q as usize]).sum()
    }

    /// Maximizes the dual in `μ_g`; returns the KKT residual before the step.
    fn update(&mut self, g: usize) -> f64 {
        let w = self.path_weight(g);
        let old = self.mu[g];
        let residual = if old > 0.0 { (1.0 - w).abs() } else { (1.0 - w).max(0.0) };
        self.scratch.clear();
        for &q in &self.paths[g] {
            self.scratch.push((self.s[q as usize] - old).max(0.0));
        }
        let t = self.solve_line(old);
        for (i, &q) in self.paths[g].iter().enumerate() {
            let q = q as usize;
            self.s[q] = self.scratch[i] + t;
            self.f[q] = self.density(self.s[q]);
        }
        self.mu[g] = t;
        residual
    }

    /// Root `t >= 0` of `Σ ((s0_q + t) / p)^α = 1` (or 0 if already `>= 1`).
    fn solve_line(&self, guess: f64) -> f64 {
        let s0 = &self.scratch;
        let phi = |t: f64| s0.iter().map(|&s| self.density(s + t)).sum::<f64>() - 1.0;
        if phi(0.0) >= 0.0 {
            return 0.0;
        }
        if self.p == 2.0 {
            let sum: f64 = s0.iter().sum();
            return ((2.0 - sum) / s0.len() as f64).max(0.0);
        }
        // phi(p) >= 0 since every term is at least 1 there.
        let (mut lo, mut hi) = (0.0, self.p);
        let mut t = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
        for _ in 0..200 {
            let v = phi(t);
            if v == 0.0 {
                return t;
            }
            if v > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let der: f64 = s0
                .iter()
                .map(|&s| {
                    let x = (s + t) / self.p;
                    if x > 0.0 {
                        self.alpha / self.p * x.powf(self.alpha - 1.0)
                    } else {
                        0.0
                    }
                })
                .sum();
            let newton = t - v / der;
            let next = if der.is_finite() && der > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= 1e-16 * t.max(1e-300) || hi - lo <= 1e-16 * hi {
                return next;
            }
            t = next;
        }
        t
    }

    /// Recomputes `s` and `f` from `μ` to shed accumulated rounding.
    fn refresh(&mut self) {
        self.s.iter_mut().for_each(|x| *x = 0.0);
        for (g, path) in self.paths.iter().enumerate() {
            for &q in path {
                self.s[q as usize] += self.mu[g];
            }
        }
        for q in 0..self.s.len() {
            self.f[q] = self.density(self.s[q]);
        }
    }

    /// `dφ/ds` for `φ(s) = (s/p)^α`.
    fn density_slope(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            self.alpha / self.p * (s / self.p).powf(self.alpha - 1.0)
        }
    }

    /// Negated dual at `mu`.
    fn neg_dual(&self, mu: &[f64]) -> f64 {
        let mut s = vec![0.0; self.s.len()];
        for (g, path) in self.paths.iter().enumerate() {
            for &q in path {
                s[q as usize] += mu[g];
            }
        }
        let mass: f64 = s.iter().map(|&x| if x > 0.0 { (x / self.p).powf(self.p / (self.p - 1.0)) } else { 0.0 }).sum();
        (self.p - 1.0) * mass - mu.iter().sum::<f64>()
    }

    fn residual_at(&self, mu: &[f64]) -> f64 {
        let mut s = vec![0.0; self.s.len()];
        for (g, path) in self.paths.iter().enumerate() {
            for &q in path {
                s[q as usize] += mu[g];
            }
        }
        let f: Vec<f64> = s.iter().map(|&x| self.density(x)).collect();
        self.paths
            .iter()
            .zip(mu)
            .map(|(path, &m)| {
                let g = path.iter().map(|&q| f[q as usize]).sum::<f64>() - 1.0;
                if m > 0.0 {
                    g.abs()
                } else {
                    (-g).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn kkt_residual(&self, grad: &[f64]) -> f64 {
        grad.iter()
            .zip(&self.mu)
            .map(|(&g, &m)| if m > 0.0 { g.abs() } else { (-g).max(0.0) })
            .fold(0.0, f64::max)
    }

    /// Projected Newton iterations on the negated dual until the KKT
    /// residual drops to `target`; returns the iterations used and whether
    /// progress stalled first.
    fn newton_until(&mut self, target: f64, budget: usize) -> (usize, bool) {
        let m = self.paths.len();
        let mut used = 0;
        while used < budget {
            used += 1;
            self.refresh();
            let grad: Vec<f64> = (0..m).map(|g| self.path_weight(g) - 1.0).collect();
            if self.kkt_residual(&grad) <= target {
                break;
            }
            // Paths pinned at zero with a pushing gradient are held fixed.
            let width: f64 = (0..m).map(|g| (self.mu[g] - (self.mu[g] - grad[g]).max(0.0)).abs()).fold(0.0, f64::max);
            let eps = width.min(1e-3);
            let free: Vec<usize> = (0..m).filter(|&g| !(self.mu[g] <= eps && grad[g] > 0.0)).collect();
            let mut pos = vec![usize::MAX; m];
            for (i, &g) in free.iter().enumerate() {
                pos[g] = i;
            }
            let slope: Vec<f64> = self.s.iter().map(|&x| self.density_slope(x)).collect();
            let mut through: Vec<Vec<usize>> = vec![Vec::new(); self.s.len()];
            for &g in &free {
                for &q in &self.paths[g] {
                    through[q as usize].push(pos[g]);
                }
            }
            let nf = free.len();
            let mut h = DMatrix::<f64>::zeros(nf, nf);
            for (q, list) in through.iter().enumerate() {
                let d = slope[q];
                if d == 0.0 || !d.is_finite() {
                    continue;
                }
                for &a in list {
                    for &b in list {
                        h[(a, b)] += d;
                    }
                }
            }
            let gf = DVector::from_iterator(nf, free.iter().map(|&g| grad[g]));
            let scale = (0..nf).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
            let mut ridge = 1e-12 * scale;
            let step_free = loop {
                let mut hr = h.clone();
                for i in 0..nf {
                    hr[(i, i)] += ridge;
                }
                if let Some(ch) = hr.cholesky() {
                    break ch.solve(&(-&gf));
                }
                ridge *= 100.0;
                if ridge > scale {
                    break -&gf / scale;
                }
            };
            let mut dir = vec![0.0; m];
            for g in 0..m {
                dir[g] = if pos[g] != usize::MAX { step_free[pos[g]] } else { -grad[g] };
            }
            let f0 = self.neg_dual(&self.mu);
            let residual = self.kkt_residual(&grad);
            let project = |beta: f64| -> Vec<f64> { (0..m).map(|g| (self.mu[g] + beta * dir[g]).max(0.0)).collect() };
            let predicted = |cand: &[f64], beta: f64| -> f64 {
                (0..m)
                    .map(|g| if pos[g] != usize::MAX { beta * grad[g] * dir[g] } else { grad[g] * (cand[g] - self.mu[g]) })
                    .sum()
            };
            let full = project(1.0);
            let mut next = None;
            if predicted(&full, 1.0).abs() <= 1e-12 * (1.0 + f0.abs()) {
                // Objective differences are at roundoff level: judge the
                // full step by its KKT residual instead.
                if self.residual_at(&full) < residual {
                    next = Some(full);
                }
            } else {
                let mut beta = 1.0;
                while beta >= 1e-10 {
                    let cand = project(beta);
                    let pred = predicted(&cand, beta);
                    if pred < 0.0 && self.neg_dual(&cand) <= f0 + 1e-4 * pred {
                        next = Some(cand);
                        break;
                    }
                    beta *= 0.5;
                }
            }
            match next {
                Some(mu) => self.mu = mu,
                None => {
                    let before = self.mu.clone();
                    for g in 0..m {
                        self.update(g);
                    }
                    if self.mu == before {
                        self.refresh();
                        return (used, true);
                    }
                }
            }
        }
        self.refresh();
        (used, false)
    }

    fn dual_value(&self) -> f64 {
        self.mu.iter().sum::<f64>() - (self.p - 1.0) * objective(&self.f, self.p)
    }
}

pub(crate) fn solve(red: &Reduced, p: f64, opts: &SolverOptions) -> Inner {
    let n = red.len();
    let mut st = State {
        p,
        alpha: 1.0 / (p - 1.0),
        paths: Vec::new(),
        mu: Vec::new(),
        s: vec![0.0; n],
        f: vec![0.0; n],
        scratch: Vec::new(),
    };
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut inner_tol = opts.feasibility_tol;
    let mut used = 0;
    let mut stalled = false;
    let mut iterations = 0;
    loop {
        let (theta, path) = lightest_reduced(red, &st.f).expect("reduced graph joins E to F");
        if theta < 1.0 - opts.feasibility_tol && !seen.contains(&path) && used < opts.max_inner {
            seen.insert(path.clone());
            st.paths.push(path);
            st.mu.push(0.0);
            iterations += 1;
            st.update(st.paths.len() - 1);
            let (u, s) = st.newton_until(inner_tol, opts.max_inner - used);
            used += u;
            stalled = s;
            continue;
        }
        let lower = st.dual_value().max(0.0);
        let upper = if theta > 0.0 { objective(&st.f, p) * theta.powf(-p) } else { f64::INFINITY };
        let done = upper - lower <= opts.tol * upper;
        if done || stalled || used >= opts.max_inner {
            return finish(red, &st, theta, lower, iterations, done);
        }
        inner_tol = (inner_tol * 0.1).max(1e-15);
        let (u, s) = st.newton_until(inner_tol, opts.max_inner - used);
        used += u;
        stalled = s;
    }
}

fn finish(red: &Reduced, st: &State, theta: f64, lower: f64, iterations: usize, converged: bool) -> Inner {
    let n = red.len();
    let scaled: Option<Vec<f64>> = (theta > 0.0).then(|| st.f.iter().map(|&x| x / theta).collect());
    // The indicator of E is always admissible; keep whichever is cheaper.
    let indicator: Vec<f64> = (0..n).map(|v| if red.is_e(v) { 1.0 } else { 0.0 }).collect();
    let density = match scaled {
        Some(d) if objective(&d, st.p) <= objective(&indicator, st.p) => d,
        _ => indicator,
    };
    let paths = st.paths.iter().zip(&st.mu).filter(|(_, &m)| m > 0.0).map(|(g, _)| g.clone()).collect();
    Inner { density, paths, iterations, lower_bound: lower, converged }
}
