//! Finite approximations of self-similar model spaces: interval, square,
//! circle, the Cantor and carpet families, snowflakes, and visual boundaries
//! of regular trees.
//!
//! The interval, square, Cantor and carpet families are attractors of
//! similarity systems whose maps share one contraction ratio `a / q`. The
//! depth-`m` sample is the image of the corners of the unit cell under all
//! words of length `m`, kept as exact integer coordinates over `q^m`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hyperbolic::{standard_visual_metric, TreeSpace};
use crate::metric::FiniteMetricSpace;

/// Largest number of points a generator may produce.
pub const POINT_BUDGET: usize = 100_000;
/// Largest number of points of a matrix-backed generated space.
pub const MATRIX_POINT_BUDGET: usize = 4096;

/// A model space and its approximation depth.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceDescriptor {
    /// Dyadic grid `{j / 2^depth}` on `[0, 1]`.
    Interval { depth: usize },
    /// Triadic grid `{(i, j) / 3^depth}` on `[0, 1]^2`.
    Square { depth: usize },
    /// `4 · 2^depth` equally spaced points on the circle of diameter 1.
    Circle { depth: usize },
    /// Endpoints of the depth-`depth` intervals of the Cantor set keeping two
    /// outer intervals of ratio `n / (2n + 1)`.
    Cantor { n: usize, depth: usize },
    /// Corners of the retained squares after `depth` rounds of cutting into
    /// `(2n + 1)^2` subsquares and deleting the central one; with `grid > 1`,
    /// the points of a `grid × grid` lattice on each retained square.
    Carpet {
        n: usize,
        depth: usize,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        grid: usize,
    },
    /// The inner space with metric `d^eps`.
    Snowflake { eps: f64, inner: Box<SpaceDescriptor> },
    /// Leaves of the complete tree with unit edges under the visual metric
    /// `exp(-a (z, z')_root)`.
    TreeBoundary { branching: usize, depth: usize, a: f64 },
}

fn one() -> usize {
    1
}

fn is_one(g: &usize) -> bool {
    *g == 1
}

impl SpaceDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceDescriptor::Cantor { n, .. } | SpaceDescriptor::Carpet { n, .. } if *n < 1 => {
                invalid(format!("family index n = {n} must be at least 1"))
            }
            SpaceDescriptor::Carpet { grid: 0, .. } => invalid("grid must be at least 1"),
            SpaceDescriptor::Snowflake { eps, inner } => {
                if !(*eps > 0.0 && *eps <= 1.0) {
                    return invalid(format!("snowflake exponent {eps} outside (0, 1]"));
                }
                inner.validate()
            }
            SpaceDescriptor::TreeBoundary { branching, a, .. } => {
                if *branching < 2 {
                    return invalid("branching must be at least 2");
                }
                if !(*a > 0.0 && a.is_finite()) {
                    return invalid(format!("visual parameter a = {a} must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            SpaceDescriptor::Interval { depth }
            | SpaceDescriptor::Square { depth }
            | SpaceDescriptor::Circle { depth }
            | SpaceDescriptor::Cantor { depth, .. }
            | SpaceDescriptor::Carpet { depth, .. }
            | SpaceDescriptor::TreeBoundary { depth, .. } => *depth,
            SpaceDescriptor::Snowflake { inner, .. } => inner.depth(),
        }
    }

    /// Short human-readable name.
    pub fn name(&self) -> String {
        match self {
            SpaceDescriptor::Interval { depth } => format!("interval(depth {depth})"),
            SpaceDescriptor::Square { depth } => format!("square(depth {depth})"),
            SpaceDescriptor::Circle { depth } => format!("circle(depth {depth})"),
            SpaceDescriptor::Cantor { n, depth } => format!("cantor({n}, depth {depth})"),
            SpaceDescriptor::Carpet { n, depth, grid: 1 } => format!("carpet({n}, depth {depth})"),
            SpaceDescriptor::Carpet { n, depth, grid } => format!("carpet({n}, depth {depth}, grid {grid})"),
            SpaceDescriptor::Snowflake { eps, inner } => format!("snowflake({eps}, {})", inner.name()),
            SpaceDescriptor::TreeBoundary { branching, depth, a } => {
                format!("tree_boundary({branching}, depth {depth}, a {a})")
            }
        }
    }
}

/// Hausdorff dimension of the limit space, when known in closed form.
pub fn exact_hausdorff_dimension(d: &SpaceDescriptor) -> Option<f64> {
    match d {
        SpaceDescriptor::Interval { .. } | SpaceDescriptor::Circle { .. } => Some(1.0),
        SpaceDescriptor::Square { .. } => Some(2.0),
        SpaceDescriptor::Cantor { n, .. } => {
            let n = *n as f64;
            Some(2f64.ln() / ((2.0 * n + 1.0) / n).ln())
        }
        SpaceDescriptor::Carpet { n, .. } => {
            let q = 2.0 * *n as f64 + 1.0;
            Some((q * q - 1.0).ln() / q.ln())
        }
        SpaceDescriptor::Snowflake { eps, inner } => exact_hausdorff_dimension(inner).map(|h| h / eps),
        SpaceDescriptor::TreeBoundary { branching, a, .. } => Some((*branching as f64).ln() / a),
    }
}

/// Constants of quasi-selfsimilarity: for every ball `B(x, ρ)` with
/// `ρ <= rho0` there is a map `Φ` on it which, after rescaling distances by
/// `rho0 / ρ`, is `l0`-biLipschitz and whose image contains
/// `B(Φ(x), rho0 / l0)` and has diameter at least `c0`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct QssCertificate {
    #[serde(rename = "L0")]
    pub l0: f64,
    pub rho0: f64,
    pub c0: f64,
    pub map_family: String,
}

/// Similarity system `x ↦ (a x + t) / q` in dimension `dim`, all maps sharing
/// the ratio `a / q`, sampled from the `grid`-lattice of the unit cell.
#[derive(Clone, Debug)]
pub struct SimilaritySystem {
    pub dim: usize,
    pub a: u64,
    pub q: u64,
    pub translations: Vec<Vec<u64>>,
    pub grid: u64,
}

impl SimilaritySystem {
    pub fn ratio(&self) -> f64 {
        self.a as f64 / self.q as f64
    }

    /// Integer coordinates over `grid · q^depth` of the depth-`depth` sample.
    /// Fails at the first depth whose sample exceeds `budget` points.
    pub fn lattice_sample(&self, depth: usize, budget: usize) -> Result<Vec<Vec<u64>>> {
        let mut pts: BTreeSet<Vec<u64>> = BTreeSet::from([vec![]]);
        for _ in 0..self.dim {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    (0..=self.grid).map(move |c| {
                        let mut u = p.clone();
                        u.push(c);
                        u
                    })
                })
                .collect();
        }
        if pts.len() > budget {
            return Err(Error::TooLarge(format!("the unit cell lattice already exceeds the budget {budget}")));
        }
        let mut scale = self.grid;
        for level in 1..=depth {
            let mut next = BTreeSet::new();
            for x in &pts {
                for t in &self.translations {
                    next.insert(x.iter().zip(t).map(|(&xi, &ti)| self.a * xi + ti * scale).collect::<Vec<u64>>());
                }
            }
            if next.len() > budget {
                return Err(Error::TooLarge(format!(
                    "depth {level} already needs {} points, above the budget {budget}",
                    next.len()
                )));
            }
            scale = scale
                .checked_mul(self.q)
                .ok_or_else(|| Error::TooLarge(format!("depth {level} overflows the coordinate grid")))?;
            pts = next;
        }
        Ok(pts.into_iter().collect())
    }

    /// Euclidean point cloud of the depth-`depth` sample, labeled by integer
    /// coordinates.
    pub fn sample_space(&self, depth: usize) -> Result<FiniteMetricSpace> {
        let pts = self.lattice_sample(depth, POINT_BUDGET)?;
        let denom = self.grid as f64 * (self.q as f64).powi(depth as i32);
        let labels = pts.iter().map(|p| p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(":")).collect();
        let coords = pts.iter().map(|p| p.iter().map(|&c| c as f64 / denom).collect()).collect();
        FiniteMetricSpace::from_labeled_cloud(self.dim, coords, labels)
    }

    /// Similarity `y ↦ (y - corner) / side` expanding the cylinder of `word`
    /// onto the unit cell; returns `(corner, side)`.
    pub fn cylinder(&self, word: &[usize]) -> (Vec<f64>, f64) {
        let r = self.ratio();
        let mut corner = vec![0.0; self.dim];
        let mut side = 1.0;
        for &w in word {
            for c in 0..self.dim {
                corner[c] += side * self.translations[w][c] as f64 / self.q as f64;
            }
            side *= r;
        }
        (corner, side)
    }
}

fn system(d: &SpaceDescriptor) -> Option<SimilaritySystem> {
    let grid = |dim: usize, q: u64, skip: Option<Vec<u64>>, lattice: usize| {
        let mut translations: Vec<Vec<u64>> = vec![vec![]];
        for _ in 0..dim {
            translations = translations
                .into_iter()
                .flat_map(|t| {
                    (0..q).map(move |c| {
                        let mut u = t.clone();
                        u.push(c);
                        u
                    })
                })
                .collect();
        }
        translations.retain(|t| Some(t) != skip.as_ref());
        SimilaritySystem { dim, a: 1, q, translations, grid: lattice as u64 }
    };
    match d {
        SpaceDescriptor::Interval { .. } => Some(grid(1, 2, None, 1)),
        SpaceDescriptor::Square { .. } => Some(grid(2, 3, None, 1)),
        SpaceDescriptor::Cantor { n, .. } => {
            let n = *n as u64;
            Some(SimilaritySystem { dim: 1, a: n, q: 2 * n + 1, translations: vec![vec![0], vec![n + 1]], grid: 1 })
        }
        SpaceDescriptor::Carpet { n, grid: lattice, .. } => {
            let n = *n as u64;
            Some(grid(2, 2 * n + 1, Some(vec![n, n]), *lattice))
        }
        _ => None,
    }
}

/// Similarity system behind a descriptor, for the self-similar families.
pub fn similarity_system(d: &SpaceDescriptor) -> Option<SimilaritySystem> {
    system(d)
}

/// Generated space with its quasi-selfsimilarity certificate (when one is
/// known) and reference dimension.
#[derive(Clone, Debug)]
pub struct GeneratedSpace {
    pub descriptor: SpaceDescriptor,
    pub space: FiniteMetricSpace,
    pub certificate: Option<QssCertificate>,
    pub hausdorff_dimension: Option<f64>,
}

/// Builds the finite approximation described by `d`.
pub fn generate(d: &SpaceDescriptor) -> Result<GeneratedSpace> {
    d.validate()?;
    let (space, certificate) = match d {
        SpaceDescriptor::Circle { depth } => {
            let m = 4usize
                .checked_shl(*depth as u32)
                .filter(|&m| m <= POINT_BUDGET && *depth < 32)
                .ok_or_else(|| Error::TooLarge(format!("circle depth {depth} exceeds the point budget")))?;
            let pts = (0..m)
                .map(|j| {
                    let t = 2.0 * PI * j as f64 / m as f64;
                    vec![0.5 * t.cos(), 0.5 * t.sin()]
                })
                .collect();
            (FiniteMetricSpace::from_cloud(2, pts)?, None)
        }
        SpaceDescriptor::Snowflake { eps, inner } => {
            let g = generate(inner)?;
            let cert = g.certificate.map(|c| QssCertificate {
                l0: c.l0.powf(*eps),
                rho0: c.rho0.powf(*eps),
                c0: c.c0.powf(*eps),
                map_family: format!("{} (distances raised to {eps})", c.map_family),
            });
            (g.space.snowflake(*eps)?, cert)
        }
        SpaceDescriptor::TreeBoundary { branching, depth, a } => {
            let leaves = (*branching as f64).powi(*depth as i32);
            if leaves > MATRIX_POINT_BUDGET as f64 {
                return Err(Error::TooLarge(format!(
                    "{leaves} leaves exceed the matrix budget {MATRIX_POINT_BUDGET}"
                )));
            }
            let tree = TreeSpace::regular(*branching, *depth)?;
            let e = (-a).exp();
            let cert = QssCertificate {
                l0: 1.0 / e,
                rho0: 1.0,
                c0: 1.0,
                map_family: format!("shift maps between subtrees, scaling by {}", 1.0 / e),
            };
            (standard_visual_metric(&tree, *a)?, Some(cert))
        }
        _ => {
            let sys = system(d).expect("self-similar family");
            let space = sys.sample_space(d.depth())?;
            (space, Some(family_certificate(d, &sys)))
        }
    };
    Ok(GeneratedSpace { descriptor: d.clone(), space, certificate, hausdorff_dimension: exact_hausdorff_dimension(d) })
}

/// For `ρ <= 1` the largest cylinder containing `x` and contained in
/// `B(x, ρ)` has side in `(r ρ / c, ρ / c]` where `c` is the cell diameter, so
/// expanding it onto the whole space is `c / r`-biLipschitz after rescaling
/// by `1 / ρ` and its image is the whole space. The sample error of a depth
/// `m` approximation, `c r^m / grid`, is added to `L0` in relative terms.
fn family_certificate(d: &SpaceDescriptor, sys: &SimilaritySystem) -> QssCertificate {
    let r = sys.ratio();
    let cell = (sys.dim as f64).sqrt();
    let l0 = cell / r * (1.0 + 2.0 * cell * r.powi(d.depth() as i32) / sys.grid as f64);
    let maps = match d {
        SpaceDescriptor::Cantor { .. } => "inverse branches of x -> r x and x -> r x + 1 - r",
        SpaceDescriptor::Carpet { .. } => "inverse branches of the retained subsquare similarities",
        _ => "inverse branches of the grid similarities",
    };
    QssCertificate { l0, rho0: 1.0, c0: cell, map_family: format!("{maps}, ratio {}/{}", sys.a, sys.q) }
}

/// Outcome of [`validate_certificate`].
#[derive(Clone, Debug, Serialize)]
pub struct CertificateCheck {
    pub samples: usize,
    /// Largest of `max(t, 1/t)` over sampled pairs, where `t` is the ratio of
    /// the image distance to `rho0 / ρ` times the original distance.
    pub max_distortion: f64,
    /// Sampled balls whose cylinder image left the sample.
    pub image_misses: usize,
    /// Largest distance from a point of `B(Φ(x), rho0 / L0)` to the image.
    pub coverage_gap: f64,
}

/// Samples balls `B(x, ρ)` with `ρ <= rho0`, applies the cylinder expansion
/// map of the certificate, and measures distortion and coverage.
pub fn validate_certificate(generated: &GeneratedSpace, samples: usize, seed: u64) -> Result<CertificateCheck> {
    let d = &generated.descriptor;
    let sys = system(d).ok_or_else(|| Error::InvalidInput(format!("no similarity system for {}", d.name())))?;
    let cert = generated.certificate.as_ref().expect("self-similar families carry certificates");
    let space = &generated.space;
    let depth = d.depth();
    let cell = (sys.dim as f64).sqrt();
    let r = sys.ratio();
    let index: Vec<Vec<f64>> = (0..space.len()).map(|i| space.point(i).unwrap().to_vec()).collect();
    let find = |y: &[f64]| {
        index.iter().position(|p| p.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-9))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = CertificateCheck { samples, max_distortion: 1.0, image_misses: 0, coverage_gap: 0.0 };
    for _ in 0..samples {
        let j = rng.gen_range(1..=depth.max(1)).min(depth);
        let word: Vec<usize> = (0..j).map(|_| rng.gen_range(0..sys.translations.len())).collect();
        let (corner, side) = sys.cylinder(&word);
        let inside: Vec<usize> = (0..space.len())
            .filter(|&i| index[i].iter().zip(&corner).all(|(&y, &c)| y >= c - 1e-12 && y <= c + side + 1e-12))
            .collect();
        let x = inside[rng.gen_range(0..inside.len())];
        let rho = (cell * side / r * rng.gen_range(0.0..1.0f64)).max(cell * side).min(cert.rho0);
        let map = |i: usize| index[i].iter().zip(&corner).map(|(&y, &c)| (y - c) / side).collect::<Vec<f64>>();
        let images: Vec<Vec<f64>> = inside.iter().map(|&i| map(i)).collect();
        let mut mapped = Vec::with_capacity(images.len());
        for img in &images {
            match find(img) {
                Some(k) => mapped.push(k),
                None => check.image_misses += 1,
            }
        }
        let rescale = cert.rho0 / rho;
        for (a, &ia) in inside.iter().enumerate().take(16) {
            for (b, &ib) in inside.iter().enumerate().skip(a + 1).take(16) {
                let before = space.dist(ia, ib) * rescale;
                let after = euclid(&images[a], &images[b]);
                let t = after / before;
                check.max_distortion = check.max_distortion.max(t).max(1.0 / t);
            }
        }
        let fx = find(&map(x));
        if let Some(fx) = fx {
            let reach = cert.rho0 / cert.l0;
            for y in 0..space.len() {
                if space.dist(fx, y) <= reach {
                    let gap = mapped.iter().map(|&m| space.dist(m, y)).fold(f64::INFINITY, f64::min);
                    check.coverage_gap = check.coverage_gap.max(gap);
                }
            }
        }
    }
    Ok(check)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Left endpoints of the `2^depth` intervals of the depth-`depth` Cantor
/// construction, in increasing order. Leaf `w` of the binary tree corresponds
/// to the endpoint of the interval with the same address.
pub fn cantor_left_endpoints(n: usize, depth: usize) -> Result<FiniteMetricSpace> {
    if n < 1 {
        return invalid("family index n must be at least 1");
    }
    let count = 1usize
        .checked_shl(depth as u32)
        .filter(|&c| c <= POINT_BUDGET && depth < 32)
        .ok_or_else(|| Error::TooLarge(format!("depth {depth} exceeds the point budget")))?;
    let r = n as f64 / (2 * n + 1) as f64;
    let mut pts = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for w in 0..count {
        let mut x = 0.0;
        let mut side = 1.0;
        let mut label = String::with_capacity(depth);
        for level in (0..depth).rev() {
            let bit = w >> level & 1;
            if bit == 1 {
                x += side * (1.0 - r);
            }
            side *= r;
            label.push(if bit == 1 { '1' } else { '0' });
        }
        pts.push(vec![x]);
        labels.push(label);
    }
    FiniteMetricSpace::from_labeled_cloud(1, pts, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_json() {
        let d = SpaceDescriptor::from_json(r#"{"kind":"cantor","n":1,"depth":6}"#).unwrap();
        assert_eq!(d, SpaceDescriptor::Cantor { n: 1, depth: 6 });
        let s = SpaceDescriptor::from_json(r#"{"kind":"snowflake","eps":0.5,"inner":{"kind":"interval","depth":3}}"#)
            .unwrap();
        assert_eq!(s.depth(), 3);
        let t = SpaceDescriptor::from_json(r#"{"kind":"tree_boundary","branching":2,"depth":6,"a":1.0986}"#).unwrap();
        assert!(matches!(t, SpaceDescriptor::TreeBoundary { branching: 2, .. }));
        assert!(SpaceDescriptor::from_json(r#"{"kind":"cantor","n":0,"depth":6}"#).is_err());
        assert!(SpaceDescriptor::from_json(r#"{"kind":"snowflake","eps":1.5,"inner":{"kind":"interval","depth":3}}"#)
            .is_err());
    }

    #[test]
    fn cylinder_of_cantor_word() {
        let sys = similarity_system(&SpaceDescriptor::Cantor { n: 1, depth: 2 }).unwrap();
        let (c, s) = sys.cylinder(&[1, 0]);
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s - 1.0 / 9.0).abs() < 1e-15);
    }
}
