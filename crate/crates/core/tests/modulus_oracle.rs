use confdim::modulus::{
    brute_force_modulus, exhaustive_min_vertex_cut, lightest_path, min_vertex_cut, solve_linear_program,
    solve_modulus, ModulusProblem, ModulusStatus, PathGraph, SolverOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(rng: &mut ChaCha8Rng, max_n: usize, p: f64) -> ModulusProblem {
    let n = rng.gen_range(3..=max_n);
    let density = rng.gen_range(0.2..0.7);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(density) {
                edges.push((a, b));
            }
        }
    }
    let g = PathGraph::from_edges(n, &edges).unwrap();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let ne = rng.gen_range(1..=n / 3);
    let nf = rng.gen_range(1..=n / 3);
    let e = order[..ne].to_vec();
    let f = order[ne..ne + nf].to_vec();
    ModulusProblem::new(&g, e, f, p).unwrap()
}

fn chain(n: usize) -> PathGraph {
    PathGraph::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
}

#[test]
fn solver_matches_brute_force_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        for p in [1.0, 1.5, 2.0, 3.0] {
            let pb = random_problem(&mut rng, 10, p);
            let a = solve_modulus(&pb, 1e-9).unwrap();
            let b = brute_force_modulus(&pb).unwrap();
            assert!(
                (a.value - b.value).abs() <= 1e-6 * b.value.max(1.0),
                "p={p}: solver {} vs brute force {} on {:?}",
                a.value,
                b.value,
                pb
            );
        }
    }
}

#[test]
fn chain_examples() {
    let g = chain(3);
    let pb = ModulusProblem::new(&g, vec![0], vec![2], 2.0).unwrap();
    let r = solve_modulus(&pb, 1e-9).unwrap();
    assert!((r.value - 1.0 / 3.0).abs() < 1e-8);
    for d in &r.density {
        assert!((d - 1.0 / 3.0).abs() < 1e-6);
    }
    let b = brute_force_modulus(&pb).unwrap();
    assert!((b.value - 1.0 / 3.0).abs() < 1e-8);

    let pb1 = ModulusProblem::new(&g, vec![0], vec![2], 1.0).unwrap();
    assert!((solve_modulus(&pb1, 1e-9).unwrap().value - 1.0).abs() < 1e-9);
    assert!((brute_force_modulus(&pb1).unwrap().value - 1.0).abs() < 1e-8);
}

#[test]
fn disjoint_chains_add() {
    // e0 - a - f0 and e1 - b - f1 with E = {e0, e1}, F = {f0, f1}: each chain
    // has two interior-or-endpoint vertices beyond its E vertex.
    let g = PathGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
    let pb = ModulusProblem::new(&g, vec![0, 2], vec![1, 3], 2.0).unwrap();
    let r = solve_modulus(&pb, 1e-9).unwrap();
    assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
    assert!((brute_force_modulus(&pb).unwrap().value - 1.0).abs() < 1e-8);
}

#[test]
fn disconnected_instances() {
    let g = PathGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
    for p in [0.5, 1.0, 2.0] {
        let pb = ModulusProblem::new(&g, vec![0], vec![3], p).unwrap();
        let r = solve_modulus(&pb, 1e-6).unwrap();
        assert_eq!(r.status, ModulusStatus::Disconnected);
        assert_eq!(r.value, 0.0);
        assert!(r.density.iter().all(|&d| d == 0.0));
        assert_eq!(brute_force_modulus(&pb).unwrap().value, 0.0);
    }
}

#[test]
fn complete_graph_linear_case_is_min_cut() {
    let edges: Vec<(usize, usize)> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
    let g = PathGraph::from_edges(4, &edges).unwrap();
    let pb = ModulusProblem::new(&g, vec![0], vec![1], 1.0).unwrap();
    let cut = exhaustive_min_vertex_cut(&pb).unwrap();
    assert_eq!(cut, 1);
    assert!((brute_force_modulus(&pb).unwrap().value - cut as f64).abs() < 1e-8);
    assert!((solve_modulus(&pb, 1e-9).unwrap().value - cut as f64).abs() < 1e-9);
}

#[test]
fn linear_case_matches_flow_and_cut_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let pb = random_problem(&mut rng, 12, 1.0);
        let lp = solve_linear_program(&pb, &SolverOptions::with_tol(1e-9)).unwrap().value;
        let flow = min_vertex_cut(&pb);
        let cut = exhaustive_min_vertex_cut(&pb).unwrap();
        assert_eq!(flow.size, cut);
        assert!((lp - cut as f64).abs() < 1e-7, "{lp} vs {cut}");
        assert_eq!(solve_modulus(&pb, 1e-9).unwrap().value, cut as f64);
        assert_eq!(flow.paths.len(), flow.size);
    }
}

#[test]
fn sublinear_exponents_use_min_cut() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let p = rng.gen_range(0.1..1.0);
        let pb = random_problem(&mut rng, 10, p);
        let r = solve_modulus(&pb, 1e-6).unwrap();
        let b = brute_force_modulus(&pb).unwrap();
        assert_eq!(r.value, b.value);
    }
}

#[test]
fn output_is_admissible_and_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let p = [1.0, 1.25, 2.0, 2.5][rng.gen_range(0..4)];
        let pb = random_problem(&mut rng, 14, p);
        let tol = 1e-5;
        let r = solve_modulus(&pb, tol).unwrap();
        if r.status == ModulusStatus::Disconnected {
            continue;
        }
        let (w, _) = lightest_path(&pb, &r.density).unwrap();
        assert!(w >= 1.0 - 2.0 * tol, "lightest path weight {w}");
        for g in &r.active_paths {
            let s: f64 = g.iter().map(|&q| r.density[q]).sum();
            assert!(s >= 1.0 - 1e-7);
        }
        let direct: f64 = r.density.iter().map(|&f| if f > 0.0 { f.powf(p) } else { 0.0 }).sum();
        assert!((direct - r.value).abs() <= 1e-9);
        assert!(r.lower_bound <= r.value * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nested_sets_have_smaller_modulus(seed in 0u64..10_000, pi in 0usize..4) {
        let p = [1.0, 1.5, 2.0, 3.0][pi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pb = random_problem(&mut rng, 12, p);
        let e2 = pb.e[..1.max(pb.e.len() / 2)].to_vec();
        let f2 = pb.f[..1.max(pb.f.len() / 2)].to_vec();
        let small = ModulusProblem::from_adjacency(pb.adjacency.clone(), e2, f2, p).unwrap();
        let tol = 1e-5;
        let a = solve_modulus(&small, tol).unwrap().value;
        let b = solve_modulus(&pb, tol).unwrap().value;
        prop_assert!(a <= b + 2.0 * tol * b.max(1.0), "{} > {}", a, b);
    }

    #[test]
    fn modulus_is_nonincreasing_in_p(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pb = random_problem(&mut rng, 12, 1.0);
        let mut last = f64::INFINITY;
        for p in [0.5, 1.0, 1.5, 2.0, 3.0] {
            let q = ModulusProblem::from_adjacency(pb.adjacency.clone(), pb.e.clone(), pb.f.clone(), p).unwrap();
            let v = solve_modulus(&q, 1e-7).unwrap().value;
            prop_assert!(v <= last * (1.0 + 1e-6) + 1e-9, "p={}: {} > {}", p, v, last);
            last = v;
        }
    }

    #[test]
    fn adding_edges_never_decreases_modulus(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pb = random_problem(&mut rng, 10, 2.0);
        let n = pb.len();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (a, nb) in pb.adjacency.iter().enumerate() {
            edges.extend(nb.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
        let bigger = PathGraph::from_edges(n, &edges).unwrap();
        let q = ModulusProblem::new(&bigger, pb.e.clone(), pb.f.clone(), 2.0).unwrap();
        let a = solve_modulus(&pb, 1e-7).unwrap().value;
        let b = solve_modulus(&q, 1e-7).unwrap().value;
        prop_assert!(a <= b * (1.0 + 2e-7) + 1e-12);
    }
}
