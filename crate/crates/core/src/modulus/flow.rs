//! Minimum vertex cuts by maximum flow with unit vertex capacities.

use std::collections::VecDeque;

use super::{Inner, ModulusProblem, Reduced};

const INF: i64 = i64::MAX / 4;

struct Dinic {
    head: Vec<usize>,
    next: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<i64>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

const NIL: usize = usize::MAX;

impl Dinic {
    fn new(n: usize) -> Self {
        Self { head: vec![NIL; n], next: vec![], to: vec![], cap: vec![], level: vec![0; n], iter: vec![0; n] }
    }

    fn add(&mut self, a: usize, b: usize, c: i64) {
        for (x, y, cc) in [(a, b, c), (b, a, 0)] {
            self.to.push(y);
            self.cap.push(cc);
            self.next.push(self.head[x]);
            self.head[x] = self.to.len() - 1;
        }
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            let mut e = self.head[v];
            while e != NIL {
                if self.cap[e] > 0 && self.level[self.to[e]] < 0 {
                    self.level[self.to[e]] = self.level[v] + 1;
                    q.push_back(self.to[e]);
                }
                e = self.next[e];
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, f: i64) -> i64 {
        if v == t {
            return f;
        }
        while self.iter[v] != NIL {
            let e = self.iter[v];
            let w = self.to[e];
            if self.cap[e] > 0 && self.level[w] == self.level[v] + 1 {
                let d = self.dfs(w, t, f.min(self.cap[e]));
                if d > 0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            self.iter[v] = self.next[e];
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut flow = 0;
        while self.bfs(s, t) {
            self.iter.clone_from(&self.head);
            loop {
                let f = self.dfs(s, t, INF);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }
}

/// A minimum vertex cut between `E` and `F` with a maximum family of
/// vertex-disjoint `E → F` paths certifying it.
pub struct VertexCut {
    pub size: usize,
    pub cut: Vec<usize>,
    pub paths: Vec<Vec<usize>>,
}

fn vertex_cut<I: Iterator<Item = usize>>(
    n: usize,
    neighbors: impl Fn(usize) -> I,
    sources: &[usize],
    sinks: &[usize],
) -> VertexCut {
    let (s, t) = (2 * n, 2 * n + 1);
    let mut g = Dinic::new(2 * n + 2);
    for v in 0..n {
        g.add(2 * v, 2 * v + 1, 1);
        for u in neighbors(v) {
            g.add(2 * v + 1, 2 * u, INF);
        }
    }
    for &v in sources {
        g.add(s, 2 * v, INF);
    }
    for &v in sinks {
        g.add(2 * v + 1, t, INF);
    }
    let size = g.max_flow(s, t) as usize;

    let mut reach = vec![false; 2 * n + 2];
    reach[s] = true;
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        let mut e = g.head[v];
        while e != NIL {
            if g.cap[e] > 0 && !reach[g.to[e]] {
                reach[g.to[e]] = true;
                q.push_back(g.to[e]);
            }
            e = g.next[e];
        }
    }
    let cut: Vec<usize> = (0..n).filter(|&v| reach[2 * v] && !reach[2 * v + 1]).collect();

    // Flow on a forward edge equals the residual capacity of its reverse.
    let mut used: Vec<i64> = (0..g.cap.len()).map(|e| if e % 2 == 1 { g.cap[e] } else { 0 }).collect();
    let mut paths = Vec::with_capacity(size);
    for _ in 0..size {
        let mut path = Vec::new();
        let mut v = s;
        while v != t {
            let mut e = g.head[v];
            while e != NIL {
                if e % 2 == 0 && used[e ^ 1] > 0 {
                    break;
                }
                e = g.next[e];
            }
            if e == NIL {
                break;
            }
            used[e ^ 1] -= 1;
            v = g.to[e];
            if v < 2 * n && v % 2 == 0 {
                path.push(v / 2);
            }
        }
        paths.push(path);
    }
    VertexCut { size, cut, paths }
}

/// Minimum number of vertices (possibly in `E` or `F`) whose removal
/// disconnects `F` from `E`.
pub fn min_vertex_cut(problem: &ModulusProblem) -> VertexCut {
    vertex_cut(problem.len(), |v| problem.adjacency[v].iter().copied(), &problem.e, &problem.f)
}

pub(crate) fn solve(red: &Reduced) -> Inner {
    let n = red.len();
    let sources: Vec<usize> = (0..red.n_e).collect();
    let sinks: Vec<usize> = (red.n_e..red.n_e + red.n_f).collect();
    let vc = vertex_cut(n, |v| red.adjacency[v].iter().map(|&u| u as usize), &sources, &sinks);
    let mut density = vec![0.0; n];
    for &v in &vc.cut {
        density[v] = 1.0;
    }
    Inner {
        density,
        paths: vc.paths.into_iter().map(|p| p.into_iter().map(|v| v as u32).collect()).collect(),
        iterations: 1,
        lower_bound: vc.size as f64,
        converged: true,
    }
}
