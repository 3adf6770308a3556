use confdim::annulus::*;
use confdim::convergence::hausdorff_distance;
use confdim::modulus::*;
use confdim::regularity::{derive_qss_perfectness_constants, estimate_uniform_perfectness};
use confdim::spaces::*;
use confdim::{build_net_hierarchy, FiniteMetricSpace, NetHierarchy};
use proptest::prelude::*;

fn line(xs: &[f64]) -> FiniteMetricSpace {
    FiniteMetricSpace::from_cloud(1, xs.iter().map(|&x| vec![x]).collect()).unwrap()
}

fn grid(n: usize) -> FiniteMetricSpace {
    line(&(0..=n).map(|i| i as f64 / n as f64).collect::<Vec<_>>())
}

fn gen(json: &str) -> GeneratedSpace {
    generate(&SpaceDescriptor::from_json(json).unwrap()).unwrap()
}

fn config(lambda: f64, l1: f64, l2: f64, rule: AdjacencyRule) -> CurveConfig {
    CurveConfig { lambda, l1, l2, rule, tol: 1e-7 }
}

/// Modulus of the annulus around `y` computed on the whole level graph, with
/// `E` and `F` read off the definitions.
fn annulus_oracle(s: &FiniteMetricSpace, h: &NetHierarchy, y: usize, i: usize, k: usize, p: f64, c: CurveConfig) -> f64 {
    let g = build_path_graph(s, h, i + k, c.lambda, c.rule).unwrap();
    let r = h.radius(i);
    let e: Vec<usize> = (0..g.len()).filter(|&v| s.dist(y, g.vertices[v]) <= c.l1 * r).collect();
    let f: Vec<usize> = (0..g.len()).filter(|&v| s.dist(y, g.vertices[v]) >= c.l2 * r).collect();
    if e.is_empty() || f.is_empty() {
        return 0.0;
    }
    let pb = ModulusProblem::from_adjacency(g.adjacency.clone(), e, f, p).unwrap();
    brute_force_modulus(&pb).unwrap().value
}

#[test]
fn surrogate_threshold_on_three_points() {
    let s = line(&[0.0, 0.5, 1.0]);
    let g = build_path_graph_on(&s, &[0, 1, 2], 0.3, AdjacencyRule::DistanceSurrogate);
    assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
    let g = build_path_graph_on(&s, &[0, 1, 2], 0.2, AdjacencyRule::DistanceSurrogate);
    assert_eq!(g.edge_count(), 0);
}

#[test]
fn cantor_gap_separates_the_graph() {
    let c = gen(r#"{"kind":"cantor","n":1,"depth":4}"#).space;
    let h = build_net_hierarchy(&c, 3.0, 4).unwrap();
    for k in 2..=4 {
        for rule in [AdjacencyRule::DistanceSurrogate, AdjacencyRule::WitnessPoint] {
            let lambda = 1.0;
            assert!(2.0 * lambda * h.radius(k) < 1.0 / 3.0 + 1e-12);
            let g = build_path_graph(&c, &h, k, lambda, rule).unwrap();
            for (a, b) in g.edges() {
                let (x, y) = (c.point(g.vertices[a]).unwrap()[0], c.point(g.vertices[b]).unwrap()[0]);
                assert!(!(x.min(y) <= 1.0 / 3.0 + 1e-12 && x.max(y) >= 2.0 / 3.0 - 1e-12), "{x} -- {y}");
            }
        }
    }
}

#[test]
fn empty_outer_boundary_gives_zero() {
    let s = grid(20);
    let h = build_net_hierarchy(&s, 2.0, 3).unwrap();
    let spec = AnnulusSpec { center: 0, i: 0, k: 1, l1: 1.0, l2: 2.0, lambda: 1.0 };
    let a = annulus_modulus(&s, &h, &spec, 2.0, 1e-7, AdjacencyRule::DistanceSurrogate).unwrap();
    assert_eq!(a.value, 0.0);
}

#[test]
fn interval_annulus_matches_brute_force_at_p_one() {
    let s = grid(40);
    let h = build_net_hierarchy(&s, 2.0, 4).unwrap();
    let c = config(10.0, 3.0, 4.0, AdjacencyRule::DistanceSurrogate);
    for &y in h.level(2) {
        let spec = AnnulusSpec { center: y, i: 2, k: 2, l1: 3.0, l2: 4.0, lambda: 10.0 };
        let got = annulus_modulus(&s, &h, &spec, 1.0, 1e-7, c.rule).unwrap().value;
        let want = annulus_oracle(&s, &h, y, 2, 2, 1.0, c);
        assert!((got - want).abs() <= 1e-6 * want.max(1.0), "{y}: {got} vs {want}");
    }
}

#[test]
fn cantor_annulus_across_the_gap_vanishes() {
    let c = gen(r#"{"kind":"cantor","n":1,"depth":4}"#).space;
    let h = build_net_hierarchy(&c, 3.0, 4).unwrap();
    let spec = AnnulusSpec { center: 0, i: 1, k: 1, l1: 1.0, l2: 2.0, lambda: 1.0 };
    let a = annulus_modulus(&c, &h, &spec, 2.0, 1e-7, AdjacencyRule::DistanceSurrogate).unwrap();
    assert_eq!(a.value, 0.0);
    assert_eq!(a.result.status, ModulusStatus::Disconnected);
}

#[test]
fn depth_supremum_examples() {
    let one = line(&[0.5]);
    let h = build_net_hierarchy(&one, 2.0, 3).unwrap();
    let ctx = AnnulusContext::new(&one, &h, config(1.0, 1.0, 2.0, AdjacencyRule::DistanceSurrogate)).unwrap();
    assert_eq!(ctx.curve(2.0, &[1, 2, 3], Truncation::Full { i_max: 0 }).unwrap().values(), vec![0.0; 3]);

    let s = grid(16);
    let h = build_net_hierarchy(&s, 2.0, 3).unwrap();
    let c = config(1.0, 1.0, 1.5, AdjacencyRule::DistanceSurrogate);
    let ctx = AnnulusContext::new(&s, &h, c).unwrap();
    for k in 1..=2 {
        let entry = ctx.modulus_at_depth(2.0, k, 1..=1).unwrap();
        let oracle = h.level(1).iter().map(|&y| annulus_oracle(&s, &h, y, 1, k, 2.0, c)).fold(0.0, f64::max);
        assert!(entry.value > 0.0);
        assert!((entry.value - oracle).abs() <= 1e-6 * oracle.max(1.0), "{} vs {oracle}", entry.value);
        let y = entry.y_star.unwrap();
        let spec = AnnulusSpec { center: y, i: 1, k, l1: 1.0, l2: 1.5, lambda: 1.0 };
        let single = annulus_modulus(&s, &h, &spec, 2.0, c.tol, c.rule).unwrap().value;
        assert_eq!(single, entry.value);
    }
}

#[test]
fn truncated_curves() {
    let s = grid(243);
    let h = build_net_hierarchy(&s, 3.0, 5).unwrap();
    let c = config(1.0, 1.0, 2.0, AdjacencyRule::DistanceSurrogate);
    let ctx = AnnulusContext::new(&s, &h, c).unwrap();
    let full = ctx.curve(2.0, &[1, 2], Truncation::Full { i_max: 2 }).unwrap();
    let trunc = truncated_modulus_curve(&s, &h, 2.0, &[1, 2], 1, c).unwrap();
    for (a, b) in trunc.values().iter().zip(full.values()) {
        assert!(a.is_finite() && *a > 0.0 && *a <= b + 1e-12);
    }
    let single = truncated_modulus_curve(&s, &h, 2.0, &[2], 2, c).unwrap();
    assert_eq!(single.values()[0], ctx.modulus_at_depth(2.0, 2, 0..=2).unwrap().value);
    let csv = full.to_csv();
    assert!(csv.starts_with("k,p,value,i_star,y_star,truncation,lambda,L1,L2,base,adjacency_rule\n"));

    let cantor = gen(r#"{"kind":"cantor","n":1,"depth":5}"#).space;
    let h = build_net_hierarchy(&cantor, 3.0, 5).unwrap();
    let curve = truncated_modulus_curve(&cantor, &h, 0.5, &[1, 2, 3], 1, c).unwrap();
    assert_eq!(*curve.values().last().unwrap(), 0.0);
}

#[test]
fn scale_constant_examples() {
    assert_eq!(compute_scale_constants(5.0, 1.0, 10.0).unwrap(), ScaleConstants { i0: 3, n0: 4 });
    assert_eq!(compute_scale_constants(1.0, 72.0, 10.0).unwrap(), ScaleConstants { i0: 0, n0: 0 });
    assert_eq!(compute_scale_constants(4.0, 1.0, 3.0).unwrap(), ScaleConstants { i0: 5, n0: 7 });
}

#[test]
fn widening_annuli_and_shrinking_lambda_lower_the_curve() {
    let s = grid(81);
    let h = build_net_hierarchy(&s, 3.0, 4).unwrap();
    let at = |lambda: f64, l1: f64, l2: f64| {
        AnnulusContext::new(&s, &h, config(lambda, l1, l2, AdjacencyRule::DistanceSurrogate))
            .unwrap()
            .curve(2.0, &[1, 2], Truncation::Full { i_max: 1 })
            .unwrap()
            .values()
    };
    let base = at(1.0, 1.0, 2.0);
    for (a, b) in at(1.0, 1.0, 2.5).iter().zip(&base) {
        assert!(*a <= b + 2e-7);
    }
    for (a, b) in at(0.75, 1.0, 2.0).iter().zip(&base) {
        assert!(*a <= b + 2e-7);
    }
}

#[test]
fn generated_shapes() {
    let c = gen(r#"{"kind":"cantor","n":1,"depth":1}"#);
    let xs: Vec<f64> = (0..c.space.len()).map(|i| c.space.point(i).unwrap()[0]).collect();
    let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    assert!(xs.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
    assert_eq!(gen(r#"{"kind":"cantor","n":1,"depth":6}"#).space.len(), 128);
    let i = gen(r#"{"kind":"interval","depth":5}"#);
    assert_eq!(i.space.len(), 33);
    assert_eq!(i.hausdorff_dimension, Some(1.0));

    let d = SpaceDescriptor::from_json(r#"{"kind":"carpet","n":1,"depth":1}"#).unwrap();
    let sys = similarity_system(&d).unwrap();
    assert_eq!(sys.translations.len(), 8);
    for w in 0..8 {
        let (_, side) = sys.cylinder(&[w]);
        assert!((side - 1.0 / 3.0).abs() < 1e-15);
    }
    assert_eq!(generate(&d).unwrap().space.len(), 16);
}

#[test]
fn hausdorff_dimension_formulas() {
    let hd = |j: &str| exact_hausdorff_dimension(&SpaceDescriptor::from_json(j).unwrap()).unwrap();
    assert!((hd(r#"{"kind":"cantor","n":1,"depth":1}"#) - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
    assert!((hd(r#"{"kind":"carpet","n":1,"depth":1}"#) - 8f64.ln() / 3f64.ln()).abs() < 1e-15);
    assert!((hd(r#"{"kind":"snowflake","eps":0.5,"inner":{"kind":"interval","depth":3}}"#) - 2.0).abs() < 1e-15);
    assert_eq!(hd(r#"{"kind":"square","depth":1}"#), 2.0);
    assert!((hd(r#"{"kind":"tree_boundary","branching":2,"depth":3,"a":1.0}"#) - 2f64.ln()).abs() < 1e-15);

    let cantor = gen(r#"{"kind":"cantor","n":1,"depth":6}"#).space;
    let mut xs: Vec<f64> = (0..cantor.len()).map(|i| cantor.point(i).unwrap()[0]).collect();
    xs.sort_by(f64::total_cmp);
    // Fewest intervals of length 3^-j covering the sample, by a greedy sweep.
    let boxes = |j: i32| {
        let w = 3f64.powi(-j);
        let mut count = 0.0f64;
        let mut end = f64::NEG_INFINITY;
        for &x in &xs {
            if x > end + 1e-12 {
                count += 1.0;
                end = x + w;
            }
        }
        count
    };
    let slope = (boxes(6).ln() - boxes(2).ln()) / (4.0 * 3f64.ln());
    assert!((slope - 2f64.ln() / 3f64.ln()).abs() < 1e-9, "{slope}");
}

#[test]
fn snowflake_examples() {
    let s = line(&[0.0, 4.0]);
    assert_eq!(s.snowflake(0.5).unwrap().dist(0, 1), 2.0);
    let g = grid(10);
    let same = g.snowflake(1.0).unwrap();
    for a in 0..g.len() {
        for b in 0..g.len() {
            assert_eq!(same.dist(a, b), g.dist(a, b));
        }
    }
}

#[test]
fn approximations_are_nested() {
    for n in 1..=2usize {
        for m in 1..=3usize {
            let a = gen(&format!(r#"{{"kind":"cantor","n":{n},"depth":{m}}}"#)).space;
            let b = gen(&format!(r#"{{"kind":"cantor","n":{n},"depth":{}}}"#, m + 1)).space;
            let bound = (n as f64 / (2 * n + 1) as f64).powi(m as i32);
            assert!(hausdorff_distance(&a, &b).unwrap() <= bound + 1e-12);
        }
    }
    for m in 1..=2usize {
        let a = gen(&format!(r#"{{"kind":"carpet","n":1,"depth":{m}}}"#)).space;
        let b = gen(&format!(r#"{{"kind":"carpet","n":1,"depth":{}}}"#, m + 1)).space;
        assert!(hausdorff_distance(&a, &b).unwrap() <= 2f64.sqrt() * 3f64.powi(-(m as i32)) + 1e-12);
    }
}

#[test]
fn certificates_hold_on_samples() {
    for j in [
        r#"{"kind":"cantor","n":1,"depth":5}"#,
        r#"{"kind":"cantor","n":2,"depth":4}"#,
        r#"{"kind":"carpet","n":1,"depth":3}"#,
        r#"{"kind":"square","depth":3}"#,
        r#"{"kind":"interval","depth":7}"#,
    ] {
        let g = gen(j);
        let cert = g.certificate.clone().unwrap();
        let check = validate_certificate(&g, 100, 7).unwrap();
        assert_eq!(check.image_misses, 0, "{j}");
        assert!(check.max_distortion <= cert.l0, "{j}: {} > {}", check.max_distortion, cert.l0);
        let grid_rho: Vec<f64> = (0..3).map(|i| 0.9 * 3f64.powi(-i)).collect();
        let a = estimate_uniform_perfectness(&g.space, &grid_rho).unwrap();
        let implied = derive_qss_perfectness_constants(cert.l0, cert.rho0, cert.c0, g.space.diameter().max(cert.rho0)).unwrap();
        assert!(a >= implied - 0.01, "{j}: {a} < {implied}");
    }
}

#[test]
fn budget_is_enforced() {
    let d = SpaceDescriptor::from_json(r#"{"kind":"square","depth":9}"#).unwrap();
    assert!(matches!(generate(&d), Err(confdim::Error::TooLarge(_))));
    assert!(SpaceDescriptor::from_json(r#"{"kind":"snowflake","eps":1.5,"inner":{"kind":"interval","depth":3}}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn witness_edges_are_surrogate_edges(pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..40), scale in 0.01..0.5f64) {
        let s = FiniteMetricSpace::from_cloud(2, pts.iter().map(|&(x, y)| vec![x, y]).collect()).unwrap();
        let all: Vec<usize> = (0..s.len()).collect();
        let w = build_path_graph_on(&s, &all, scale, AdjacencyRule::WitnessPoint);
        let d = build_path_graph_on(&s, &all, scale, AdjacencyRule::DistanceSurrogate);
        for (a, b) in w.edges() {
            prop_assert!(d.has_edge(a, b));
        }
    }
}
