//! `p = 1`: column generation on the path-packing linear program
//! `max Σ y_γ` subject to `Σ_{γ∋q} y_γ <= 1`, solved with a dense primal
//! simplex tableau. The optimal density is the dual solution, read off the
//! reduced costs of the slack columns; a new path column prices in exactly
//! when its weight under that density is below 1.

use super::oracle::lightest_reduced;
use super::{Inner, Reduced, SolverOptions};

const EPS: f64 = 1e-12;

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Reduced costs; the first `m` columns are the slacks.
    cost: Vec<f64>,
    value: f64,
    basis: Vec<usize>,
    paths: Vec<Vec<u32>>,
}

impl Tableau {
    fn new(m: usize) -> Self {
        let rows = (0..m)
            .map(|i| {
                let mut r = vec![0.0; m];
                r[i] = 1.0;
                r
            })
            .collect();
        Self { rows, rhs: vec![1.0; m], cost: vec![0.0; m], value: 0.0, basis: (0..m).collect(), paths: Vec::new() }
    }

    fn m(&self) -> usize {
        self.rhs.len()
    }

    fn duals(&self) -> Vec<f64> {
        self.cost[..self.m()].iter().map(|&u| u.max(0.0)).collect()
    }

    fn add_path(&mut self, path: Vec<u32>) {
        for row in &mut self.rows {
            let v: f64 = path.iter().map(|&q| row[q as usize]).sum();
            row.push(v);
        }
        let rc: f64 = path.iter().map(|&q| self.cost[q as usize]).sum::<f64>() - 1.0;
        self.cost.push(rc);
        self.paths.push(path);
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        let prow: Vec<f64> = self.rows[r].iter().map(|x| x / piv).collect();
        let prhs = self.rhs[r] / piv;
        for i in 0..self.m() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][c];
            if factor != 0.0 {
                for (x, &y) in self.rows[i].iter_mut().zip(&prow) {
                    *x -= factor * y;
                }
                self.rhs[i] = (self.rhs[i] - factor * prhs).max(0.0);
            }
        }
        let factor = self.cost[c];
        for (x, &y) in self.cost.iter_mut().zip(&prow) {
            *x -= factor * y;
        }
        self.value -= factor * prhs;
        self.rows[r] = prow;
        self.rhs[r] = prhs;
        self.basis[r] = c;
    }

    /// Primal simplex with Bland's rule; returns pivots made.
    fn optimize(&mut self, budget: usize) -> usize {
        let mut pivots = 0;
        while pivots < budget {
            let Some(c) = (0..self.cost.len()).find(|&j| self.cost[j] < -EPS) else { break };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.m() {
                let a = self.rows[i][c];
                if a > EPS {
                    let ratio = self.rhs[i] / a;
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => ratio < br - EPS || (ratio <= br + EPS && self.basis[i] < bb),
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            let Some((_, r, _)) = best else { break };
            self.pivot(r, c);
            pivots += 1;
        }
        pivots
    }
}

pub(crate) fn solve(red: &Reduced, opts: &SolverOptions) -> Inner {
    let m = red.len();
    let mut tab = Tableau::new(m);
    let mut pivots = 0;
    let mut iterations = 0;
    loop {
        let u = tab.duals();
        let (theta, path) = lightest_reduced(red, &u).expect("reduced graph joins E to F");
        let exhausted = pivots >= opts.max_inner;
        if theta >= 1.0 - opts.feasibility_tol || exhausted || tab.paths.contains(&path) {
            let density: Vec<f64> = if theta > 0.0 {
                u.iter().map(|x| x / theta).collect()
            } else {
                (0..m).map(|v| if red.is_e(v) { 1.0 } else { 0.0 }).collect()
            };
            let value: f64 = density.iter().sum();
            let lower = tab.value.max(0.0);
            let paths = tab
                .basis
                .iter()
                .zip(&tab.rhs)
                .filter(|&(&b, &y)| b >= m && y > EPS)
                .map(|(&b, _)| tab.paths[b - m].clone())
                .collect();
            let converged = theta > 0.0 && value - lower <= opts.tol * value.max(f64::MIN_POSITIVE);
            return Inner { density, paths, iterations, lower_bound: lower, converged };
        }
        tab.add_path(path);
        iterations += 1;
        pivots += tab.optimize(opts.max_inner - pivots);
    }
}
