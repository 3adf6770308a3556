//! Distances between finite approximations and joint dimension reports
//! along a converging sequence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::{estimate_for_space, DimensionConfig, DimensionEstimate};
use crate::error::{invalid, Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::spaces::{generate, SpaceDescriptor};

/// Largest space whose full distance set enters [`gh_lower_bounds`].
pub const DISTANCE_SET_BUDGET: usize = 4096;

/// Hausdorff distance between two Euclidean clouds of the same ambient
/// dimension, exact on the samples.
pub fn hausdorff_distance(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> Result<f64> {
    let (da, db) = match (a.ambient_dim(), b.ambient_dim()) {
        (Some(x), Some(y)) => (x, y),
        _ => return invalid("Hausdorff distance needs two Euclidean clouds"),
    };
    if da != db {
        return invalid(format!("ambient dimensions differ: {da} vs {db}"));
    }
    if a.is_empty() || b.is_empty() {
        return invalid("Hausdorff distance of an empty set");
    }
    Ok(directed(a, b).max(directed(b, a)))
}

fn directed(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> f64 {
    (0..a.len())
        .into_par_iter()
        .map(|i| {
            let x = a.point(i).expect("cloud");
            (0..b.len())
                .map(|j| {
                    let y = b.point(j).expect("cloud");
                    x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Cheap lower bounds on the Gromov-Hausdorff distance.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct GhBounds {
    /// The best of the bounds below.
    pub value: f64,
    /// `|diam A - diam B| / 2`.
    pub diameter_bound: f64,
    /// Half the Hausdorff distance between the sets of pairwise distances;
    /// `None` above [`DISTANCE_SET_BUDGET`] points.
    pub distance_set_bound: Option<f64>,
}

/// Lower bounds on `d_GH(A, B)`.
///
/// A correspondence of distortion `2r` moves every pairwise distance of
/// either space within `2r` of a pairwise distance of the other, so half the
/// Hausdorff distance between the distance sets bounds `d_GH` from below.
pub fn gh_lower_bounds(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> GhBounds {
    let diameter_bound = 0.5 * (a.diameter() - b.diameter()).abs();
    let distance_set_bound = (a.len() <= DISTANCE_SET_BUDGET && b.len() <= DISTANCE_SET_BUDGET)
        .then(|| 0.5 * sorted_set_hausdorff(&distance_set(a), &distance_set(b)));
    let value = distance_set_bound.map_or(diameter_bound, |d| d.max(diameter_bound));
    GhBounds { value, diameter_bound, distance_set_bound }
}

/// Shorthand for `gh_lower_bounds(a, b).value`.
pub fn gh_lower_bound(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> f64 {
    gh_lower_bounds(a, b).value
}

/// Sorted distinct pairwise distances, including 0.
fn distance_set(s: &FiniteMetricSpace) -> Vec<f64> {
    let mut v: Vec<f64> = (0..s.len())
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..s.len()).map(move |j| s.dist(i, j)))
        .collect();
    v.push(0.0);
    v.par_sort_unstable_by(f64::total_cmp);
    v.dedup();
    v
}

fn sorted_set_hausdorff(a: &[f64], b: &[f64]) -> f64 {
    fn one_way(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .map(|&x| {
                let k = b.partition_point(|&y| y < x);
                let above = b.get(k).map_or(f64::INFINITY, |&y| y - x);
                let below = if k > 0 { x - b[k - 1] } else { f64::INFINITY };
                above.min(below)
            })
            .fold(0.0, f64::max)
    }
    one_way(a, b).max(one_way(b, a))
}

fn default_slack() -> f64 {
    0.05
}

/// Experiment input: a sequence of spaces, its expected limit and the
/// dimension configuration shared by all estimates.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub sequence: Vec<SpaceDescriptor>,
    pub limit: SpaceDescriptor,
    #[serde(default)]
    pub dimension: DimensionConfig,
    /// Allowance in the semicontinuity comparison.
    #[serde(default = "default_slack")]
    pub slack: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sequence.is_empty() {
            return invalid("the sequence is empty");
        }
        for d in self.sequence.iter().chain(std::iter::once(&self.limit)) {
            d.validate()?;
        }
        if !(self.slack >= 0.0 && self.slack.is_finite()) {
            return invalid(format!("slack {} must be non-negative", self.slack));
        }
        self.dimension.validate()
    }
}

/// Distances from one member of the sequence to the limit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SequenceDistance {
    /// Ambient Hausdorff distance (upper bound on `d_GH`); `None` when the
    /// two spaces do not share a Euclidean ambient.
    pub hausdorff: Option<f64>,
    pub gh_lower_bound: f64,
}

/// Summary of the comparison between the sequence and its limit.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SemicontinuityVerdict {
    pub slack: f64,
    pub limit_cd_low: f64,
    pub limit_cd_point: f64,
    pub max_sequence_cd_high: f64,
    /// `limit_cd_low + slack >= max_sequence_cd_high`.
    pub signature_holds: bool,
    /// `limit_cd_low - max_sequence_cd_high`.
    pub signature_gap: f64,
    /// Largest `cd_high` over the tail half of the sequence.
    pub limsup_cd_high: f64,
    pub limsup_cd_point: f64,
    pub tail_length: usize,
    /// `limit_cd_point - cd_point` for each member.
    pub gaps: Vec<f64>,
    /// Whether the Hausdorff distances are non-increasing; `None` when some
    /// are unavailable.
    pub distances_decay: Option<bool>,
    /// Whether every space of the experiment carries a certificate.
    pub certified: bool,
}

/// Result of [`run_semicontinuity_experiment`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConvergenceExperiment {
    pub sequence: Vec<SpaceDescriptor>,
    pub limit: SpaceDescriptor,
    pub distances: Vec<SequenceDistance>,
    pub estimates: Vec<DimensionEstimate>,
    pub limit_estimate: DimensionEstimate,
    pub verdict: SemicontinuityVerdict,
}

/// Estimates the dimension of every member and of the limit, measures
/// distances to the limit and summarizes the comparison.
pub fn run_semicontinuity_experiment(config: &ExperimentConfig) -> Result<ConvergenceExperiment> {
    config.validate()?;
    let descriptors: Vec<&SpaceDescriptor> = config.sequence.iter().chain(std::iter::once(&config.limit)).collect();
    let generated = descriptors.par_iter().map(|d| generate(d)).collect::<Result<Vec<_>>>()?;
    let mut estimates = generated
        .par_iter()
        .map(|g| estimate_for_space(&g.space, &config.dimension))
        .collect::<Result<Vec<_>>>()?;
    let limit_estimate = estimates.pop().ok_or_else(|| Error::InvalidInput("no limit".into()))?;
    let (members, limit) = generated.split_at(generated.len() - 1);
    let limit = &limit[0];
    let distances = members
        .par_iter()
        .map(|g| {
            let hausdorff = match (g.space.ambient_dim(), limit.space.ambient_dim()) {
                (Some(a), Some(b)) if a == b => Some(hausdorff_distance(&g.space, &limit.space)?),
                _ => None,
            };
            Ok(SequenceDistance { hausdorff, gh_lower_bound: gh_lower_bound(&g.space, &limit.space) })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = estimates.len();
    let tail_length = n - n / 2;
    let tail = &estimates[n / 2..];
    let max_sequence_cd_high = estimates.iter().map(|e| e.cd_high).fold(f64::NEG_INFINITY, f64::max);
    let hausdorff: Option<Vec<f64>> = distances.iter().map(|d| d.hausdorff).collect();
    let verdict = SemicontinuityVerdict {
        slack: config.slack,
        limit_cd_low: limit_estimate.cd_low,
        limit_cd_point: limit_estimate.cd_point,
        max_sequence_cd_high,
        signature_holds: limit_estimate.cd_low + config.slack >= max_sequence_cd_high,
        signature_gap: limit_estimate.cd_low - max_sequence_cd_high,
        limsup_cd_high: tail.iter().map(|e| e.cd_high).fold(f64::NEG_INFINITY, f64::max),
        limsup_cd_point: tail.iter().map(|e| e.cd_point).fold(f64::NEG_INFINITY, f64::max),
        tail_length,
        gaps: estimates.iter().map(|e| limit_estimate.cd_point - e.cd_point).collect(),
        distances_decay: hausdorff.map(|h| h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))),
        certified: generated.iter().all(|g| g.certificate.is_some()),
    };
    Ok(ConvergenceExperiment {
        sequence: config.sequence.clone(),
        limit: config.limit.clone(),
        distances,
        estimates,
        limit_estimate,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> FiniteMetricSpace {
        FiniteMetricSpace::from_cloud(1, xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn point_and_segment() {
        let a = line(&[0.0]);
        let b = line(&[0.0, 1.0]);
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), 1.0);
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(gh_lower_bound(&a, &b), 0.5);
    }

    #[test]
    fn sorted_sets() {
        assert_eq!(sorted_set_hausdorff(&[0.0, 1.0], &[0.0, 0.25, 1.0]), 0.25);
        assert_eq!(sorted_set_hausdorff(&[0.0], &[0.0, 3.0]), 3.0);
    }
}
