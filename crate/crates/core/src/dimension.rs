//! Conformal dimension as the critical exponent at which the annulus moduli
//! `p-Mod_k` stop being bounded away from 0, located by bisection on `p`.
//!
//! Whether a finite curve "tends to 0" is decided by [`DecayRule`]: a curve
//! vanishes when its tail drops below a threshold while not increasing, or
//! (when a slope band `σ` is set) when its tail decays faster than
//! `base^(-σ)` per level; it persists when its tail stays above ten times the
//! threshold and (with a band) decays slower than `base^(-σ/2)` per level.

use serde::{Deserialize, Serialize};

use crate::annulus::{AnnulusContext, CurveConfig, ModulusCurve, Truncation};
use crate::error::{invalid, Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::net::{build_net_hierarchy, NetHierarchy};
use crate::regularity::estimate_uniform_perfectness;

/// Verdict on a finite modulus curve.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Vanishes,
    Persists,
    Inconclusive,
}

/// Rule turning a finite curve into a [`Verdict`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DecayRule {
    pub eps_decay: f64,
    pub k_tail: usize,
    /// Decay band `σ` on the tail log-slope (per level, in base `base`).
    /// `None` keeps only the threshold test.
    #[serde(default)]
    pub slope_band: Option<f64>,
}

impl Default for DecayRule {
    fn default() -> Self {
        Self { eps_decay: 1e-2, k_tail: 3, slope_band: None }
    }
}

impl DecayRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_decay > 0.0) {
            return invalid(format!("decay threshold {} must be positive", self.eps_decay));
        }
        if self.k_tail < 1 {
            return invalid("the tail needs at least one entry");
        }
        if let Some(s) = self.slope_band {
            if !(s > 0.0 && s.is_finite()) {
                return invalid(format!("slope band {s} must be positive"));
            }
            if self.k_tail < 2 {
                return invalid("a slope band needs a tail of at least two entries");
            }
        }
        Ok(())
    }
}

/// Mean log-slope per level of the tail `values`, in base `base`. Infinite
/// when the tail reaches 0.
pub fn tail_slope(values: &[f64], base: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let (first, last) = (values[0], values[values.len() - 1]);
    if last <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if first <= 0.0 {
        return f64::INFINITY;
    }
    (last / first).ln() / base.ln() / (values.len() - 1) as f64
}

/// Classifies the last `rule.k_tail` values of a curve sampled at
/// consecutive depths.
pub fn classify_values(values: &[f64], base: f64, rule: &DecayRule) -> Result<Verdict> {
    rule.validate()?;
    if values.len() < rule.k_tail {
        return invalid(format!("curve has {} entries, the tail needs {}", values.len(), rule.k_tail));
    }
    let tail = &values[values.len() - rule.k_tail..];
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let non_increasing = tail.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    if min < rule.eps_decay && non_increasing {
        return Ok(Verdict::Vanishes);
    }
    match rule.slope_band {
        None => Ok(if min > 10.0 * rule.eps_decay { Verdict::Persists } else { Verdict::Inconclusive }),
        Some(sigma) => {
            let slope = tail_slope(tail, base);
            Ok(if slope < -sigma {
                Verdict::Vanishes
            } else if slope >= -0.5 * sigma && min > 10.0 * rule.eps_decay {
                Verdict::Persists
            } else {
                Verdict::Inconclusive
            })
        }
    }
}

pub fn classify_decay(curve: &ModulusCurve, rule: &DecayRule) -> Result<Verdict> {
    classify_values(&curve.values(), curve.base, rule)
}

/// Everything that determines a dimension estimate besides the space.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DimensionConfig {
    pub base: f64,
    /// Finest net level built; `None` builds down to the resolution floor.
    #[serde(default)]
    pub k_max: Option<usize>,
    pub curve: CurveConfig,
    pub truncation: Truncation,
    /// Depths of the curve: `k_first..=k_last`, where `None` means the
    /// deepest level allowed by the resolution floor.
    pub k_first: usize,
    #[serde(default)]
    pub k_last: Option<usize>,
    pub p_lo: f64,
    pub p_hi: f64,
    pub p_tol: f64,
    pub decay: DecayRule,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        Self {
            base: 10.0,
            k_max: None,
            curve: CurveConfig::default(),
            truncation: Truncation::Full { i_max: 0 },
            k_first: 1,
            k_last: None,
            p_lo: 0.1,
            p_hi: 4.0,
            p_tol: 0.05,
            decay: DecayRule::default(),
        }
    }
}

/// Smallest exponent probed.
pub const P_MIN: f64 = 0.1;

impl DimensionConfig {
    pub fn validate(&self) -> Result<()> {
        self.curve.validate()?;
        self.decay.validate()?;
        if !(self.base > 1.0 && self.base.is_finite()) {
            return invalid(format!("base {} must exceed 1", self.base));
        }
        if !(self.p_lo >= P_MIN) {
            return invalid(format!("p_lo = {} is below {P_MIN}", self.p_lo));
        }
        if !(self.p_hi > self.p_lo && self.p_hi.is_finite()) {
            return invalid(format!("need p_hi > p_lo, got [{}, {}]", self.p_lo, self.p_hi));
        }
        if !(self.p_tol > 0.0) {
            return invalid("p_tol must be positive");
        }
        Ok(())
    }

    /// Depths of the curve for a hierarchy.
    pub fn depths(&self, hierarchy: &NetHierarchy) -> Result<Vec<usize>> {
        let finest = hierarchy
            .finest_valid()
            .ok_or_else(|| Error::InsufficientResolution("no level above the resolution floor".into()))?;
        let top = self.truncation.top();
        let last = match self.k_last {
            Some(k) => k,
            None => finest.checked_sub(top).ok_or_else(|| {
                Error::InsufficientResolution(format!("outer levels up to {top} exceed the finest valid level {finest}"))
            })?,
        };
        if last < self.k_first {
            return Err(Error::InsufficientResolution(format!(
                "no depth in {}..={last} fits above the resolution floor",
                self.k_first
            )));
        }
        let ks: Vec<usize> = (self.k_first..=last).collect();
        if ks.len() < self.decay.k_tail {
            return Err(Error::InsufficientResolution(format!(
                "{} depths available, the decay rule needs {}",
                ks.len(),
                self.decay.k_tail
            )));
        }
        Ok(ks)
    }
}

/// One probed exponent.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Probe {
    pub p: f64,
    pub verdict: Verdict,
    /// Tail log-slope; `None` when the tail touches 0.
    pub tail_slope: Option<f64>,
    pub curve: ModulusCurve,
}

/// Bracket `[cd_low, cd_high]` on the conformal dimension with the curves
/// that support it.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DimensionEstimate {
    pub cd_low: f64,
    pub cd_high: f64,
    pub cd_point: f64,
    /// Exponent whose curve persists at `cd_low`, if any was found.
    pub persists_witness: Option<f64>,
    /// Exponent whose curve vanishes at `cd_high`, if any was found.
    pub vanishes_witness: Option<f64>,
    /// True when an inconclusive region kept the bracket wider than `p_tol`.
    pub inconclusive: bool,
    pub decay_threshold: f64,
    pub depths: Vec<usize>,
    pub config: DimensionConfig,
    /// Probes in increasing order of `p`.
    pub probes: Vec<Probe>,
    pub warnings: Vec<String>,
}

impl DimensionEstimate {
    pub fn probe(&self, p: f64) -> Option<&Probe> {
        self.probes.iter().find(|q| q.p == p)
    }

    /// Width of the bracket.
    pub fn width(&self) -> f64 {
        self.cd_high - self.cd_low
    }
}

/// Builds a hierarchy reaching the resolution floor (or `config.k_max`).
pub fn hierarchy_for(space: &FiniteMetricSpace, config: &DimensionConfig) -> Result<NetHierarchy> {
    let k_max = match config.k_max {
        Some(k) => k,
        None => {
            let ratio = 1.0 / space.resolution_floor();
            (ratio.ln() / config.base.ln() + 1e-9).floor().max(0.0) as usize
        }
    };
    build_net_hierarchy(space, config.base, k_max)
}

struct Prober<'a> {
    ctx: AnnulusContext<'a>,
    config: &'a DimensionConfig,
    ks: Vec<usize>,
    probes: Vec<Probe>,
}

impl Prober<'_> {
    fn probe(&mut self, p: f64) -> Result<Verdict> {
        if let Some(q) = self.probes.iter().find(|q| q.p == p) {
            return Ok(q.verdict);
        }
        let curve = self.ctx.curve(p, &self.ks, self.config.truncation)?;
        let values = curve.values();
        let verdict = classify_values(&values, curve.base, &self.config.decay)?;
        let tail = &values[values.len() - self.config.decay.k_tail..];
        self.probes.push(Probe { p, verdict, tail_slope: Some(tail_slope(tail, curve.base)).filter(|s| s.is_finite()), curve });
        Ok(verdict)
    }
}

/// Bisection for the critical exponent on `[p_lo, p_hi]`.
///
/// Two boundaries are tracked: the largest exponent known to persist and the
/// smallest known to vanish. Inconclusive probes split the search, so the
/// final bracket runs from a persisting to a vanishing exponent and may be
/// wider than `p_tol`.
pub fn estimate_conformal_dimension(
    space: &FiniteMetricSpace,
    hierarchy: &NetHierarchy,
    config: &DimensionConfig,
) -> Result<DimensionEstimate> {
    config.validate()?;
    if hierarchy.base != config.base {
        return invalid(format!("hierarchy base {} differs from the configured {}", hierarchy.base, config.base));
    }
    let ks = config.depths(hierarchy)?;
    let ctx = AnnulusContext::new(space, hierarchy, config.curve)?;
    let mut pr = Prober { ctx, config, ks: ks.clone(), probes: Vec::new() };
    let mut warnings = Vec::new();

    let v_lo = pr.probe(config.p_lo)?;
    let v_hi = pr.probe(config.p_hi)?;
    let mut b = Boundaries { persist: None, not_persist: f64::INFINITY, not_vanish: f64::NEG_INFINITY, vanish: None };
    b.record(v_lo, config.p_lo);
    b.record(v_hi, config.p_hi);
    if v_lo == Verdict::Vanishes {
        warnings.push(format!("the curve already vanishes at p_lo = {}; the dimension is at most p_lo", config.p_lo));
    }
    if v_hi == Verdict::Persists {
        warnings.push(format!("the curve still persists at p_hi = {}; the dimension is at least p_hi", config.p_hi));
    }
    while let Some(lo) = b.persist {
        if !(b.not_persist.is_finite() && b.not_persist - lo > config.p_tol) {
            break;
        }
        let mid = 0.5 * (lo + b.not_persist);
        b.record(pr.probe(mid)?, mid);
    }
    while let Some(hi) = b.vanish {
        if !(b.not_vanish.is_finite() && hi - b.not_vanish > config.p_tol) {
            break;
        }
        let mid = 0.5 * (b.not_vanish + hi);
        b.record(pr.probe(mid)?, mid);
    }

    let cd_high = b.vanish.unwrap_or(config.p_hi);
    let cd_low = b.persist.unwrap_or(config.p_lo).min(cd_high);
    if b.persist.is_none() && v_lo == Verdict::Inconclusive {
        warnings.push(format!("no persisting exponent found; cd_low is the window edge p_lo = {}", config.p_lo));
    }
    if b.vanish.is_none() && v_hi == Verdict::Inconclusive {
        warnings.push(format!("no vanishing exponent found; cd_high is the window edge p_hi = {}", config.p_hi));
    }
    let mut probes = pr.probes;
    probes.sort_by(|a, b| a.p.total_cmp(&b.p));
    for w in probes.windows(2) {
        if w[0].verdict == Verdict::Vanishes && w[1].verdict != Verdict::Vanishes {
            warnings.push(format!(
                "verdicts are not monotone in p: {:?} at {} after vanishing at {}",
                w[1].verdict, w[1].p, w[0].p
            ));
        }
    }
    if let Some(w) = hypothesis_warning(space, hierarchy)? {
        warnings.push(w);
    }
    let inconclusive = probes.iter().any(|q| q.verdict == Verdict::Inconclusive) && cd_high - cd_low > config.p_tol;
    Ok(DimensionEstimate {
        cd_low,
        cd_high,
        cd_point: 0.5 * (cd_low + cd_high),
        persists_witness: b.persist.filter(|&p| p <= cd_low),
        vanishes_witness: b.vanish,
        inconclusive,
        decay_threshold: config.decay.eps_decay,
        depths: ks,
        config: config.clone(),
        probes,
        warnings,
    })
}

fn hypothesis_warning(space: &FiniteMetricSpace, hierarchy: &NetHierarchy) -> Result<Option<String>> {
    let grid: Vec<f64> = (0..=hierarchy.k_max())
        .filter(|&k| hierarchy.is_valid(k))
        .map(|k| hierarchy.radius(k))
        .filter(|&r| r < space.diameter())
        .collect();
    if grid.is_empty() {
        return Ok(None);
    }
    let a = estimate_uniform_perfectness(space, &grid)?;
    Ok((a == 0.0).then(|| "the sample does not look uniformly perfect at the probed scales".to_string()))
}

/// Known verdict boundaries: the largest persisting exponent, the smallest
/// exponent that does not persist, the largest that does not vanish, and the
/// smallest vanishing one.
struct Boundaries {
    persist: Option<f64>,
    not_persist: f64,
    not_vanish: f64,
    vanish: Option<f64>,
}

impl Boundaries {
    fn record(&mut self, v: Verdict, p: f64) {
        if v == Verdict::Persists {
            self.persist = Some(self.persist.map_or(p, |x| x.max(p)));
        } else {
            self.not_persist = self.not_persist.min(p);
        }
        if v == Verdict::Vanishes {
            self.vanish = Some(self.vanish.map_or(p, |x| x.min(p)));
        } else {
            self.not_vanish = self.not_vanish.max(p);
        }
    }
}

/// Builds the hierarchy and runs [`estimate_conformal_dimension`].
pub fn estimate_for_space(space: &FiniteMetricSpace, config: &DimensionConfig) -> Result<DimensionEstimate> {
    let h = hierarchy_for(space, config)?;
    estimate_conformal_dimension(space, &h, config)
}

/// Probes every exponent of `ps` (for plots), in the given order.
pub fn probe_grid(
    space: &FiniteMetricSpace,
    hierarchy: &NetHierarchy,
    config: &DimensionConfig,
    ps: &[f64],
) -> Result<Vec<Probe>> {
    config.validate()?;
    let ks = config.depths(hierarchy)?;
    let ctx = AnnulusContext::new(space, hierarchy, config.curve)?;
    let mut pr = Prober { ctx, config, ks, probes: Vec::new() };
    for &p in ps {
        pr.probe(p)?;
    }
    Ok(pr.probes)
}

/// Fit of `a_{k+h} <= C · a_{k-ℓ} · a_h`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SubmultiplicativityFit {
    pub c: f64,
    pub ell: usize,
    /// `1 / C`, the floor such a relation forces on a curve bounded below.
    pub lower_bound: f64,
    pub pairs: usize,
    /// Pairs skipped because `a_{k-ℓ} · a_h = 0`.
    pub skipped: usize,
}

/// For each `ℓ` the smallest `C` with `a_{k+h} <= C a_{k-ℓ} a_h` over all
/// depths `k - ℓ >= k_0`, `h >= max(k_0, 1)` and `k + h` present, where `a`
/// is indexed by the curve depths. Returns the `ℓ` with the smallest `C`.
pub fn submultiplicativity_diagnostic(curve: &ModulusCurve, ells: &[usize]) -> Result<SubmultiplicativityFit> {
    let max_ell = ells.iter().copied().max().ok_or_else(|| Error::InvalidInput("no shift candidates".into()))?;
    if curve.entries.len() < max_ell + 3 {
        return invalid(format!("curve has {} entries, need {}", curve.entries.len(), max_ell + 3));
    }
    let value = |k: usize| curve.entries.iter().find(|e| e.k == k).map(|e| e.value);
    let k0 = curve.entries.iter().map(|e| e.k).min().unwrap();
    let k1 = curve.entries.iter().map(|e| e.k).max().unwrap();
    let mut best: Option<SubmultiplicativityFit> = None;
    for &ell in ells {
        let mut c: f64 = 0.0;
        let (mut pairs, mut skipped) = (0, 0);
        for h in k0.max(1)..=k1 {
            for k in (k0 + ell)..=k1 {
                let (Some(top), Some(a), Some(b)) = (value(k + h), value(k - ell), value(h)) else {
                    continue;
                };
                if a * b == 0.0 {
                    skipped += 1;
                    continue;
                }
                pairs += 1;
                c = c.max(top / (a * b));
            }
        }
        if pairs == 0 {
            continue;
        }
        let fit = SubmultiplicativityFit { c, ell, lower_bound: if c > 0.0 { 1.0 / c } else { f64::INFINITY }, pairs, skipped };
        if best.as_ref().is_none_or(|b| fit.c < b.c) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no depth pairs available for any shift".into()))
}

/// Estimates for `(X, d)` and `(X, d^eps)` under the same configuration.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SnowflakeReport {
    pub eps: f64,
    pub original: DimensionEstimate,
    pub snowflaked: DimensionEstimate,
    /// Whether the brackets, each widened by `p_tol`, intersect.
    pub overlap: bool,
}

pub fn brackets_overlap(a: &DimensionEstimate, b: &DimensionEstimate, slack: f64) -> bool {
    a.cd_low - slack <= b.cd_high + slack && b.cd_low - slack <= a.cd_high + slack
}

pub fn snowflake_invariance_check(space: &FiniteMetricSpace, eps: f64, config: &DimensionConfig) -> Result<SnowflakeReport> {
    let flake = space.snowflake(eps)?;
    let original = estimate_for_space(space, config)?;
    let snowflaked = estimate_for_space(&flake, config)?;
    let overlap = brackets_overlap(&original, &snowflaked, config.p_tol);
    Ok(SnowflakeReport { eps, original, snowflaked, overlap })
}
