//! Time-binned outcome distributions.
//!
//! Detections are assigned to bins of width `T` whose edges sit at integer
//! multiples of `T`. With a uniformly distributed bin phase, a pair separated
//! by `tau` lands `n` bins apart with the triangular weight
//! `max(0, 1 - |tau - nT| / T)`. Every binned probability is therefore a sum
//! of triangular-weight integrals over Gaussians, which reduce to error
//! functions ([`gaussian_linear_segment_integral`]). No quadrature runs here.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    bunching_mixture, coincidence_mixture, nohom_mixture, total_rates, GaussianMixture,
    PhysicalParams,
};

pub const DEFAULT_TAIL_MASS_TOLERANCE: f64 = 1e-12;

/// Detector time-bin width plus the tail-truncation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningConfig {
    pub bin_width: f64,
    #[serde(default = "default_tail")]
    pub tail_mass_tolerance: f64,
    /// Cap on the number of enumerated bins; `None` uses
    /// `10 ceil((|delta| + 6/sigma) / T) + 8`.
    #[serde(default)]
    pub max_bins: Option<usize>,
}

fn default_tail() -> f64 {
    DEFAULT_TAIL_MASS_TOLERANCE
}

impl BinningConfig {
    pub fn new(bin_width: f64) -> Result<Self> {
        let bc = Self {
            bin_width,
            tail_mass_tolerance: DEFAULT_TAIL_MASS_TOLERANCE,
            max_bins: None,
        };
        bc.validate()?;
        Ok(bc)
    }

    pub fn with_tail_mass_tolerance(mut self, tol: f64) -> Result<Self> {
        self.tail_mass_tolerance = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_bins(mut self, max_bins: usize) -> Result<Self> {
        self.max_bins = Some(max_bins);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::Config(format!(
                "bin_width must be positive and finite, got {}",
                self.bin_width
            )));
        }
        if !(self.tail_mass_tolerance > 0.0 && self.tail_mass_tolerance < 1e-3) {
            return Err(Error::Config(format!(
                "tail_mass_tolerance must lie in (0, 1e-3), got {}",
                self.tail_mass_tolerance
            )));
        }
        if self.max_bins == Some(0) {
            return Err(Error::Config("max_bins must be positive".into()));
        }
        Ok(())
    }

    pub fn max_bins_for(&self, p: &PhysicalParams) -> usize {
        self.max_bins.unwrap_or_else(|| {
            let span = (p.delta().abs() + 6.0 / p.sigma()) / self.bin_width;
            10 * span.ceil() as usize + 8
        })
    }
}

/// Detector capabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub number_resolving: bool,
    pub time_resolving: bool,
}

impl DetectorConfig {
    pub const BUCKET: Self = Self {
        number_resolving: false,
        time_resolving: false,
    };
    pub const NUMBER_RESOLVING: Self = Self {
        number_resolving: true,
        time_resolving: false,
    };
    pub const TIME_RESOLVING: Self = Self {
        number_resolving: false,
        time_resolving: true,
    };
    pub const NUMBER_AND_TIME_RESOLVING: Self = Self {
        number_resolving: true,
        time_resolving: true,
    };
}

/// Whether the two arms interfere on a beamsplitter before detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Hom,
    NoHom,
}

/// A discrete detection outcome for one photon pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    ZeroClicks,
    OneClick,
    /// Two clicks in different detectors, `n` bins apart.
    CoincidenceSep(u32),
    /// Two clicks in the same number-resolving detector, `n` bins apart.
    BunchSep(u32),
    /// Two clicks without timing. `bunched` is only ever true for
    /// number-resolving detectors.
    TwoClicksNoTiming { bunched: bool },
    /// Sample-arm photon arriving `n` bins after the reference photon.
    NoHomSep(i64),
    /// Aggregate of all bins beyond the enumerated range.
    Overflow,
}

impl Outcome {
    /// `(kind, bin index)` used by the CSV formats.
    pub fn label(&self) -> (&'static str, Option<i64>) {
        match *self {
            Outcome::ZeroClicks => ("zero_clicks", None),
            Outcome::OneClick => ("one_click", None),
            Outcome::CoincidenceSep(n) => ("coincidence", Some(n as i64)),
            Outcome::BunchSep(n) => ("bunch", Some(n as i64)),
            Outcome::TwoClicksNoTiming { bunched: false } => ("two_click_coincidence", None),
            Outcome::TwoClicksNoTiming { bunched: true } => ("two_click_bunch", None),
            Outcome::NoHomSep(n) => ("nohom", Some(n)),
            Outcome::Overflow => ("overflow", None),
        }
    }

    pub fn from_label(kind: &str, bin: Option<i64>) -> Result<Self> {
        let need_bin = || {
            bin.ok_or_else(|| Error::Config(format!("outcome `{kind}` requires a bin index")))
        };
        let unsigned = |n: i64| {
            u32::try_from(n)
                .map_err(|_| Error::Config(format!("bin index {n} invalid for `{kind}`")))
        };
        let out = match kind {
            "zero_clicks" => Outcome::ZeroClicks,
            "one_click" => Outcome::OneClick,
            "coincidence" => Outcome::CoincidenceSep(unsigned(need_bin()?)?),
            "bunch" => Outcome::BunchSep(unsigned(need_bin()?)?),
            "two_click_coincidence" => Outcome::TwoClicksNoTiming { bunched: false },
            "two_click_bunch" => Outcome::TwoClicksNoTiming { bunched: true },
            "nohom" => Outcome::NoHomSep(need_bin()?),
            "overflow" => Outcome::Overflow,
            other => return Err(Error::Config(format!("unknown outcome kind `{other}`"))),
        };
        if bin.is_some() && out.label().1.is_none() {
            return Err(Error::Config(format!("outcome `{kind}` takes no bin index")));
        }
        Ok(out)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.label() {
            (k, Some(n)) => write!(f, "{k}[{n}]"),
            (k, None) => f.write_str(k),
        }
    }
}

// ---------------------------------------------------------------------------
// Error-function kernel

fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

fn lower_tail(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

fn std_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
    }
}

/// Standard-normal quantities at one bin edge.
#[derive(Debug, Clone, Copy)]
struct Edge {
    z: f64,
    lower: f64,
    upper: f64,
    pdf: f64,
}

impl Edge {
    fn at(x: f64, mean: f64, sd: f64) -> Self {
        let z = (x - mean) / sd;
        Edge {
            z,
            lower: lower_tail(z),
            upper: upper_tail(z),
            pdf: std_pdf(z),
        }
    }
}

/// Standard normal mass between two edges, choosing the tail that avoids
/// cancellation.
fn mass(a: &Edge, b: &Edge) -> f64 {
    if a.z >= 0.0 {
        a.upper - b.upper
    } else if b.z <= 0.0 {
        b.lower - a.lower
    } else {
        1.0 - a.lower - b.upper
    }
}

/// `int_a^b (c0 + c1 tau) N(tau; mu, s) dtau` in closed form.
///
/// Either limit may be infinite.
pub fn gaussian_linear_segment_integral(mu: f64, s: f64, a: f64, b: f64, c0: f64, c1: f64) -> f64 {
    debug_assert!(b >= a && s > 0.0);
    let ea = Edge::at(a, mu, s);
    let eb = Edge::at(b, mu, s);
    let m = mass(&ea, &eb);
    let lin = if c1 == 0.0 { 0.0 } else { c1 * (mu * m - s * (eb.pdf - ea.pdf)) };
    c0 * m + lin
}

/// Rising ramp `(tau - left)/w` on `[left, left + w]`, in units of the normal.
fn ramp_up(mu: f64, s: f64, w: f64, l: &Edge, r: &Edge) -> f64 {
    let left = mu + s * l.z;
    ((mu - left) * mass(l, r) - s * (r.pdf - l.pdf)) / w
}

/// Falling ramp `(right - tau)/w` on `[right - w, right]`.
fn ramp_down(mu: f64, s: f64, w: f64, l: &Edge, r: &Edge) -> f64 {
    let right = mu + s * r.z;
    ((right - mu) * mass(l, r) + s * (r.pdf - l.pdf)) / w
}

/// `int max(0, 1 - |tau - c|/w) N(tau; mu, s) dtau`.
fn triangle(mu: f64, s: f64, c: f64, w: f64) -> f64 {
    let a = Edge::at(c - w, mu, s);
    let m = Edge::at(c, mu, s);
    let b = Edge::at(c + w, mu, s);
    triangle_from_edges(mu, s, w, &a, &m, &b)
}

fn triangle_from_edges(mu: f64, s: f64, w: f64, a: &Edge, m: &Edge, b: &Edge) -> f64 {
    ramp_up(mu, s, w, a, m) + ramp_down(mu, s, w, m, b)
}

/// `int clamp((tau - e)/w, 0, 1) N(tau; mu, s) dtau`: mass that lands
/// strictly more than `e/w` bins above zero.
fn upper_ramp_tail(mu: f64, s: f64, e: f64, w: f64) -> f64 {
    let l = Edge::at(e, mu, s);
    let r = Edge::at(e + w, mu, s);
    ramp_up(mu, s, w, &l, &r) + r.upper
}

/// Mirror of [`upper_ramp_tail`]: `int clamp((e - tau)/w, 0, 1) N dtau`.
fn lower_ramp_tail(mu: f64, s: f64, e: f64, w: f64) -> f64 {
    let l = Edge::at(e - w, mu, s);
    let r = Edge::at(e, mu, s);
    ramp_down(mu, s, w, &l, &r) + l.lower
}

fn mixture_triangle(mix: &GaussianMixture, c: f64, w: f64) -> f64 {
    mix.terms
        .iter()
        .map(|t| t.weight * triangle(t.mean, mix.width, c, w))
        .sum()
}

/// Probability that a pair drawn from a symmetric HOM density is `n` bins
/// apart, `n >= 0`.
fn hom_bin(mix: &GaussianMixture, n: u32, w: f64) -> f64 {
    let c = n as f64 * w;
    let v = if n == 0 {
        mixture_triangle(mix, 0.0, w)
    } else {
        mixture_triangle(mix, c, w) + mixture_triangle(mix, -c, w)
    };
    v.max(0.0)
}

/// Mass of a symmetric HOM density more than `n_max` bins apart.
fn hom_tail(mix: &GaussianMixture, n_max: u32, w: f64) -> f64 {
    let e = n_max as f64 * w;
    mix.terms
        .iter()
        .map(|t| {
            t.weight
                * (upper_ramp_tail(t.mean, mix.width, e, w)
                    + lower_ramp_tail(t.mean, mix.width, -e, w))
        })
        .sum::<f64>()
        .max(0.0)
}

/// All HOM bins `0..=n_max` at once, sharing edge evaluations.
fn hom_bins(mix: &GaussianMixture, n_max: u32, w: f64) -> Vec<f64> {
    let n = n_max as i64 + 1;
    let mut out = vec![0.0; n_max as usize + 1];
    for t in &mix.terms {
        // edges at k w for k in -n..=n
        let edges: Vec<Edge> = (-n..=n)
            .map(|k| Edge::at(k as f64 * w, t.mean, mix.width))
            .collect();
        let tri = |k: i64| {
            let i = (k + n) as usize;
            triangle_from_edges(t.mean, mix.width, w, &edges[i - 1], &edges[i], &edges[i + 1])
        };
        out[0] += t.weight * tri(0);
        for k in 1..=n_max as i64 {
            out[k as usize] += t.weight * (tri(k) + tri(-k));
        }
    }
    for v in &mut out {
        *v = v.max(0.0);
    }
    out
}

/// Binned coincidence probability `P_{c,n}` (before loss).
pub fn binned_coincidence(p: &PhysicalParams, bc: &BinningConfig, n: u32) -> f64 {
    hom_bin(&coincidence_mixture(p), n, bc.bin_width)
}

/// Binned bunching probability `P_{b,n}` (before loss).
pub fn binned_bunching(p: &PhysicalParams, bc: &BinningConfig, n: u32) -> f64 {
    hom_bin(&bunching_mixture(p), n, bc.bin_width)
}

/// Probability `P^NH_n` that the sample-arm photon arrives `n` bins after
/// the reference photon (before loss).
pub fn binned_nohom(p: &PhysicalParams, bc: &BinningConfig, n: i64) -> f64 {
    let mix = nohom_mixture(p);
    mixture_triangle(&mix, n as f64 * bc.bin_width, bc.bin_width).max(0.0)
}

fn nohom_bins(p: &PhysicalParams, lo: i64, hi: i64, w: f64) -> Vec<f64> {
    let s = p.temporal_width();
    let mu = p.delta();
    let edges: Vec<Edge> = (lo - 1..=hi + 1)
        .map(|k| Edge::at(k as f64 * w, mu, s))
        .collect();
    (0..=(hi - lo) as usize)
        .map(|i| triangle_from_edges(mu, s, w, &edges[i], &edges[i + 1], &edges[i + 2]).max(0.0))
        .collect()
}

fn nohom_tails(p: &PhysicalParams, lo: i64, hi: i64, w: f64) -> (f64, f64) {
    let s = p.temporal_width();
    let mu = p.delta();
    (
        lower_ramp_tail(mu, s, lo as f64 * w, w).max(0.0),
        upper_ramp_tail(mu, s, hi as f64 * w, w).max(0.0),
    )
}

// ---------------------------------------------------------------------------
// Measurement configurations

/// A complete measurement configuration: detector, protocol and (for
/// time-resolving detectors) binning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    pub detector: DetectorConfig,
    pub protocol: Protocol,
    pub binning: Option<BinningConfig>,
}

/// The fixed, enumerated outcome set of a configuration.
///
/// The bin range is resolved once (at some reference parameters) and then
/// held fixed, so that probabilities at neighbouring parameter values refer
/// to the same outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    config: MeasurementConfig,
    bins: BinRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinRange {
    Untimed,
    Hom { max_sep: u32 },
    NoHom { lo: i64, hi: i64 },
}

impl MeasurementConfig {
    pub fn new(
        detector: DetectorConfig,
        protocol: Protocol,
        binning: Option<BinningConfig>,
    ) -> Result<Self> {
        let c = Self {
            detector,
            protocol,
            binning,
        };
        c.validate()?;
        Ok(c)
    }

    /// Standard HOM with bucket detectors.
    pub fn hom() -> Self {
        Self {
            detector: DetectorConfig::BUCKET,
            protocol: Protocol::Hom,
            binning: None,
        }
    }

    pub fn nr_hom() -> Self {
        Self {
            detector: DetectorConfig::NUMBER_RESOLVING,
            ..Self::hom()
        }
    }

    pub fn tr_hom(bin_width: f64) -> Result<Self> {
        Self::new(
            DetectorConfig::TIME_RESOLVING,
            Protocol::Hom,
            Some(BinningConfig::new(bin_width)?),
        )
    }

    pub fn nrtr_hom(bin_width: f64) -> Result<Self> {
        Self::new(
            DetectorConfig::NUMBER_AND_TIME_RESOLVING,
            Protocol::Hom,
            Some(BinningConfig::new(bin_width)?),
        )
    }

    pub fn no_hom(bin_width: f64) -> Result<Self> {
        Self::new(
            DetectorConfig::TIME_RESOLVING,
            Protocol::NoHom,
            Some(BinningConfig::new(bin_width)?),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.detector.time_resolving {
            match &self.binning {
                Some(b) => b.validate(),
                None => Err(Error::Config(
                    "time-resolving detectors need a bin width".into(),
                )),
            }
        } else {
            Ok(())
        }
    }

    /// Binning in effect; `None` without time resolution.
    pub fn effective_binning(&self) -> Option<&BinningConfig> {
        if self.detector.time_resolving {
            self.binning.as_ref()
        } else {
            None
        }
    }

    pub fn bin_width(&self) -> Option<f64> {
        self.effective_binning().map(|b| b.bin_width)
    }

    fn resolving_bunches(&self) -> bool {
        self.protocol == Protocol::Hom && self.detector.number_resolving
    }

    /// Short protocol label: HOM, NR-HOM, TR-HOM, NRTR-HOM, no-HOM.
    pub fn label(&self) -> &'static str {
        match (self.protocol, self.detector.number_resolving, self.detector.time_resolving) {
            (Protocol::Hom, false, false) => "HOM",
            (Protocol::Hom, true, false) => "NR-HOM",
            (Protocol::Hom, false, true) => "TR-HOM",
            (Protocol::Hom, true, true) => "NRTR-HOM",
            (Protocol::NoHom, _, true) => "no-HOM",
            (Protocol::NoHom, _, false) => "no-HOM-untimed",
        }
    }

    fn binning_or_err(&self) -> Result<&BinningConfig> {
        self.effective_binning()
            .ok_or_else(|| Error::Config("time-resolving detectors need a bin width".into()))
    }

    /// Resolve the enumerated bin range at `p`.
    pub fn support(&self, p: &PhysicalParams) -> Result<Support> {
        self.validate()?;
        let bins = if !self.detector.time_resolving {
            BinRange::Untimed
        } else {
            let bc = self.binning_or_err()?;
            let w = bc.bin_width;
            let tol = bc.tail_mass_tolerance;
            let cap = bc.max_bins_for(p);
            let s = p.temporal_width();
            let reach = (p.delta().abs() + gaussian_reach(tol) * s) / w;
            match self.protocol {
                Protocol::Hom => {
                    // P_c + P_b is alpha-free and bounds either family's tail.
                    let envelope = crate::model::GaussianMixture {
                        width: s,
                        terms: vec![
                            crate::model::GaussianTerm {
                                weight: 0.5,
                                mean: -p.delta(),
                            },
                            crate::model::GaussianTerm {
                                weight: 0.5,
                                mean: p.delta(),
                            },
                        ],
                    };
                    let limit = cap.saturating_sub(1).min(u32::MAX as usize) as u32;
                    let mut n = (reach.ceil() as u64).min(limit as u64) as u32;
                    while n > 0 && hom_tail(&envelope, n - 1, w) < tol {
                        n -= 1;
                    }
                    while n < limit && hom_tail(&envelope, n, w) >= tol {
                        n += 1;
                    }
                    BinRange::Hom { max_sep: n }
                }
                Protocol::NoHom => {
                    let centre = (p.delta() / w).round() as i64;
                    let half = tol * 0.5;
                    let span = reach.ceil() as i64 + 1;
                    let (mut lo, mut hi) = (centre - span, centre + span);
                    while lo < centre && nohom_tails(p, lo + 1, hi, w).0 < half {
                        lo += 1;
                    }
                    while hi > centre && nohom_tails(p, lo, hi - 1, w).1 < half {
                        hi -= 1;
                    }
                    loop {
                        let (tl, th) = nohom_tails(p, lo, hi, w);
                        let width = (hi - lo + 1) as usize;
                        if width >= cap || (tl < half && th < half) {
                            break;
                        }
                        if th >= tl {
                            hi += 1;
                        } else {
                            lo -= 1;
                        }
                    }
                    // Respect the cap if the initial guess already exceeded it.
                    while ((hi - lo + 1) as usize) > cap {
                        let (tl, th) = nohom_tails(p, lo, hi, w);
                        if (centre - lo) > (hi - centre) || (tl <= th && lo < centre) {
                            lo += 1;
                        } else {
                            hi -= 1;
                        }
                    }
                    BinRange::NoHom { lo, hi }
                }
            }
        };
        Ok(Support {
            config: *self,
            bins,
        })
    }

    /// Probability of an arbitrary admissible outcome, including bins
    /// outside any enumerated range. `Overflow` is not a concrete observation
    /// and is rejected.
    pub fn probability_of(&self, p: &PhysicalParams, outcome: &Outcome) -> Result<f64> {
        let both = p.both_survive();
        let (pc, pb) = total_rates(p);
        let tr = self.detector.time_resolving;
        let nr = self.resolving_bunches();
        let bad = || {
            Err(Error::IncompatibleCounts(format!(
                "outcome {outcome} is not produced by {}",
                self.label()
            )))
        };
        let v = match (*outcome, self.protocol) {
            (Outcome::ZeroClicks, _) => p.none_survive(),
            (Outcome::OneClick, Protocol::Hom) if !nr => p.one_survives() * pc + (1.0 - p.gamma() * p.gamma()) * pb,
            (Outcome::OneClick, _) => p.one_survives(),
            (Outcome::CoincidenceSep(n), Protocol::Hom) if tr => {
                both * binned_coincidence(p, self.binning_or_err()?, n)
            }
            (Outcome::BunchSep(n), Protocol::Hom) if tr && nr => {
                both * binned_bunching(p, self.binning_or_err()?, n)
            }
            (Outcome::TwoClicksNoTiming { bunched: false }, Protocol::Hom) if !tr => both * pc,
            (Outcome::TwoClicksNoTiming { bunched: true }, Protocol::Hom) if !tr && nr => {
                both * pb
            }
            (Outcome::TwoClicksNoTiming { bunched: false }, Protocol::NoHom) if !tr => both,
            (Outcome::NoHomSep(n), Protocol::NoHom) if tr => {
                both * binned_nohom(p, self.binning_or_err()?, n)
            }
            _ => return bad(),
        };
        Ok(v)
    }

    /// Complete outcome distribution at `p`.
    pub fn outcome_distribution(&self, p: &PhysicalParams) -> Result<OutcomeDistribution> {
        let support = self.support(p)?;
        let probs = support.probabilities(p);
        Ok(OutcomeDistribution {
            entries: support.outcomes().into_iter().zip(probs).collect(),
            params: *p,
            config: *self,
        })
    }
}

/// Two-sided normal quantile beyond which the tail mass is below `tol`.
fn gaussian_reach(tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if upper_tail(mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

impl Support {
    pub fn config(&self) -> &MeasurementConfig {
        &self.config
    }

    /// Largest HOM bin separation enumerated, if any.
    pub fn max_separation(&self) -> Option<u32> {
        match self.bins {
            BinRange::Hom { max_sep } => Some(max_sep),
            _ => None,
        }
    }

    /// Enumerated signed no-HOM bin range, if any.
    pub fn nohom_range(&self) -> Option<(i64, i64)> {
        match self.bins {
            BinRange::NoHom { lo, hi } => Some((lo, hi)),
            _ => None,
        }
    }

    /// Outcomes in a fixed order matching [`Support::probabilities`].
    pub fn outcomes(&self) -> Vec<Outcome> {
        let nr = self.config.resolving_bunches();
        let mut out = Vec::new();
        match self.bins {
            BinRange::Untimed => {
                out.push(Outcome::TwoClicksNoTiming { bunched: false });
                if nr {
                    out.push(Outcome::TwoClicksNoTiming { bunched: true });
                }
            }
            BinRange::Hom { max_sep } => {
                out.extend((0..=max_sep).map(Outcome::CoincidenceSep));
                if nr {
                    out.extend((0..=max_sep).map(Outcome::BunchSep));
                }
            }
            BinRange::NoHom { lo, hi } => out.extend((lo..=hi).map(Outcome::NoHomSep)),
        }
        out.push(Outcome::OneClick);
        out.push(Outcome::ZeroClicks);
        if self.bins != BinRange::Untimed {
            out.push(Outcome::Overflow);
        }
        out
    }

    pub fn len(&self) -> usize {
        let nr = self.config.resolving_bunches();
        let timed = match self.bins {
            BinRange::Untimed => 1 + nr as usize,
            BinRange::Hom { max_sep } => (max_sep as usize + 1) * (1 + nr as usize) + 1,
            BinRange::NoHom { lo, hi } => (hi - lo + 1) as usize + 1,
        };
        timed + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Probabilities of [`Support::outcomes`] at `p`; sums to one with the
    /// overflow entry absorbing the analytic tail.
    pub fn probabilities(&self, p: &PhysicalParams) -> Vec<f64> {
        let both = p.both_survive();
        let (pc, pb) = total_rates(p);
        let nr = self.config.resolving_bunches();
        let mut out = Vec::with_capacity(self.len());
        let one_click = if self.config.protocol == Protocol::Hom && !nr {
            p.one_survives() * pc + (1.0 - p.gamma() * p.gamma()) * pb
        } else {
            p.one_survives()
        };
        match self.bins {
            BinRange::Untimed => match self.config.protocol {
                Protocol::Hom => {
                    out.push(both * pc);
                    if nr {
                        out.push(both * pb);
                    }
                }
                Protocol::NoHom => out.push(both),
            },
            BinRange::Hom { max_sep } => {
                let w = self.config.binning.expect("validated").bin_width;
                let cm = coincidence_mixture(p);
                out.extend(hom_bins(&cm, max_sep, w).into_iter().map(|v| both * v));
                let mut tail = hom_tail(&cm, max_sep, w);
                if nr {
                    let bm = bunching_mixture(p);
                    out.extend(hom_bins(&bm, max_sep, w).into_iter().map(|v| both * v));
                    tail += hom_tail(&bm, max_sep, w);
                }
                out.push(one_click);
                out.push(p.none_survive());
                out.push(both * tail);
                return out;
            }
            BinRange::NoHom { lo, hi } => {
                let w = self.config.binning.expect("validated").bin_width;
                out.extend(nohom_bins(p, lo, hi, w).into_iter().map(|v| both * v));
                let (tl, th) = nohom_tails(p, lo, hi, w);
                out.push(one_click);
                out.push(p.none_survive());
                out.push(both * (tl + th));
                return out;
            }
        }
        out.push(one_click);
        out.push(p.none_survive());
        out
    }
}

/// A normalized discrete distribution over detection outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    entries: Vec<(Outcome, f64)>,
    params: PhysicalParams,
    config: MeasurementConfig,
}

impl OutcomeDistribution {
    pub fn entries(&self) -> &[(Outcome, f64)] {
        &self.entries
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn config(&self) -> &MeasurementConfig {
        &self.config
    }

    pub fn probability(&self, outcome: &Outcome) -> f64 {
        self.entries
            .iter()
            .find(|(o, _)| o == outcome)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Outcome, f64)> {
        self.entries.iter()
    }

    /// Sum of probabilities over outcomes matching `pred`.
    pub fn mass_where(&self, pred: impl Fn(&Outcome) -> bool) -> f64 {
        self.entries
            .iter()
            .filter(|(o, _)| pred(o))
            .map(|(_, v)| v)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(d: f64, a: f64, s: f64, g: f64) -> PhysicalParams {
        PhysicalParams::new(d, a, s, g).unwrap()
    }

    #[test]
    fn kernel_full_mass_and_odd_integrand() {
        let v = gaussian_linear_segment_integral(0.0, 0.7, -1e3, 1e3, 1.0, 0.0);
        assert!((v - 1.0).abs() < 1e-12);
        let v = gaussian_linear_segment_integral(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY, 1.0, 0.0);
        assert!((v - 1.0).abs() < 1e-15);
        let v = gaussian_linear_segment_integral(0.0, 1.0, -1.0, 1.0, 0.0, 1.0);
        assert!(v.abs() < 1e-16);
        // mean of a normal
        let v = gaussian_linear_segment_integral(2.5, 0.3, f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.0);
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn triangle_matches_ramps() {
        // triangle weight integrates the segment kernel
        let (mu, s, c, w) = (0.3, 0.5, 0.8, 0.6);
        let direct = gaussian_linear_segment_integral(mu, s, c - w, c, (w - c) / w, 1.0 / w)
            + gaussian_linear_segment_integral(mu, s, c, c + w, (c + w) / w, -1.0 / w);
        assert!((triangle(mu, s, c, w) - direct).abs() < 1e-15);
    }

    #[test]
    fn identical_photons_never_coincide() {
        let p = pp(0.0, 1.0, 1.0, 0.0);
        for t in [0.1, 1.0, 3.0] {
            let bc = BinningConfig::new(t).unwrap();
            for n in 0..5 {
                assert_eq!(binned_coincidence(&p, &bc, n), 0.0);
            }
        }
    }

    #[test]
    fn bins_telescope_to_totals() {
        let p = pp(0.5, 0.9, 1.0, 0.0);
        let bc = BinningConfig::new(0.3).unwrap();
        let (pc, pb) = total_rates(&p);
        let sc: f64 = (0..60).map(|n| binned_coincidence(&p, &bc, n)).sum();
        let sb: f64 = (0..60).map(|n| binned_bunching(&p, &bc, n)).sum();
        assert!((sc - pc).abs() < 1e-12, "{sc} vs {pc}");
        assert!((sb - pb).abs() < 1e-12);
        let sn: f64 = (-60..60).map(|n| binned_nohom(&p, &bc, n)).sum();
        assert!((sn - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vectorized_bins_match_single_bin() {
        let p = pp(0.7, 0.6, 1.4, 0.0);
        let bc = BinningConfig::new(0.25).unwrap();
        let v = hom_bins(&coincidence_mixture(&p), 20, bc.bin_width);
        for (n, x) in v.iter().enumerate() {
            let y = binned_coincidence(&p, &bc, n as u32);
            assert!((x - y).abs() <= 1e-16 + 1e-14 * y.abs());
        }
    }

    #[test]
    fn nohom_peak_bin_sits_at_delay() {
        let bc = BinningConfig::new(2.0).unwrap();
        let p = pp(3.0 * 2.0, 0.5, 5.0, 0.0);
        let best = (-2..10)
            .max_by(|a, b| binned_nohom(&p, &bc, *a).total_cmp(&binned_nohom(&p, &bc, *b)))
            .unwrap();
        assert_eq!(best, 3);
    }

    #[test]
    fn loss_terms_are_exact() {
        let p = pp(0.5, 0.9, 1.0, 0.4);
        let d = MeasurementConfig::nrtr_hom(1.0).unwrap().outcome_distribution(&p).unwrap();
        assert!((d.probability(&Outcome::ZeroClicks) - 0.16).abs() < 1e-15);
        assert!((d.probability(&Outcome::OneClick) - 0.48).abs() < 1e-15);
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn untimed_bucket_at_zero_delay() {
        let p = pp(0.0, 0.9, 1.0, 0.0);
        let d = MeasurementConfig::hom().outcome_distribution(&p).unwrap();
        assert_eq!(d.len(), 3);
        assert!((d.probability(&Outcome::OneClick) - 0.95).abs() < 1e-15);
        assert!(
            (d.probability(&Outcome::TwoClicksNoTiming { bunched: false }) - 0.05).abs() < 1e-15
        );
    }

    #[test]
    fn config_errors() {
        assert!(BinningConfig::new(0.0).is_err());
        assert!(BinningConfig::new(-1.0).is_err());
        assert!(BinningConfig::new(1.0).unwrap().with_tail_mass_tolerance(0.01).is_err());
        let c = MeasurementConfig {
            detector: DetectorConfig::TIME_RESOLVING,
            protocol: Protocol::Hom,
            binning: None,
        };
        assert!(c.validate().is_err());
        let p = pp(0.1, 0.9, 1.0, 0.1);
        assert!(c.outcome_distribution(&p).is_err());
    }

    #[test]
    fn bunch_outcomes_only_with_nr_and_tr() {
        let p = pp(0.3, 0.9, 1.0, 0.2);
        for c in [
            MeasurementConfig::hom(),
            MeasurementConfig::nr_hom(),
            MeasurementConfig::tr_hom(0.5).unwrap(),
            MeasurementConfig::no_hom(0.5).unwrap(),
        ] {
            let d = c.outcome_distribution(&p).unwrap();
            assert!(d.iter().all(|(o, _)| !matches!(o, Outcome::BunchSep(_))));
        }
        let d = MeasurementConfig::nrtr_hom(0.5).unwrap().outcome_distribution(&p).unwrap();
        assert!(d.iter().any(|(o, _)| matches!(o, Outcome::BunchSep(_))));
    }

    #[test]
    fn labels_round_trip() {
        for o in [
            Outcome::ZeroClicks,
            Outcome::OneClick,
            Outcome::CoincidenceSep(3),
            Outcome::BunchSep(0),
            Outcome::TwoClicksNoTiming { bunched: true },
            Outcome::TwoClicksNoTiming { bunched: false },
            Outcome::NoHomSep(-4),
            Outcome::Overflow,
        ] {
            let (k, n) = o.label();
            assert_eq!(Outcome::from_label(k, n).unwrap(), o);
        }
        assert!(Outcome::from_label("coincidence", Some(-1)).is_err());
        assert!(Outcome::from_label("one_click", Some(2)).is_err());
    }

    #[test]
    fn probability_of_agrees_with_enumeration() {
        let p = pp(1.1, 0.8, 1.0, 0.3);
        for c in [
            MeasurementConfig::hom(),
            MeasurementConfig::nr_hom(),
            MeasurementConfig::tr_hom(0.5).unwrap(),
            MeasurementConfig::nrtr_hom(0.5).unwrap(),
            MeasurementConfig::no_hom(0.5).unwrap(),
        ] {
            let d = c.outcome_distribution(&p).unwrap();
            for (o, v) in d.iter() {
                if *o == Outcome::Overflow {
                    assert!(c.probability_of(&p, o).is_err());
                    continue;
                }
                let q = c.probability_of(&p, o).unwrap();
                assert!((q - v).abs() <= 1e-15 + 1e-13 * v, "{} {o}: {q} vs {v}", c.label());
            }
        }
        assert!(MeasurementConfig::hom()
            .probability_of(&p, &Outcome::BunchSep(1))
            .is_err());
    }

    #[test]
    fn support_respects_cap() {
        let p = pp(0.2, 0.9, 1.0, 0.1);
        let bc = BinningConfig::new(0.01).unwrap().with_max_bins(10).unwrap();
        let c = MeasurementConfig::new(DetectorConfig::NUMBER_AND_TIME_RESOLVING, Protocol::Hom, Some(bc)).unwrap();
        let s = c.support(&p).unwrap();
        assert_eq!(s.max_separation(), Some(9));
        let d = c.outcome_distribution(&p).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!(d.probability(&Outcome::Overflow) > 0.1);

        let c = MeasurementConfig::new(DetectorConfig::TIME_RESOLVING, Protocol::NoHom, Some(bc)).unwrap();
        let (lo, hi) = c.support(&p).unwrap().nohom_range().unwrap();
        assert!(hi - lo < 10);
        assert!((c.outcome_distribution(&p).unwrap().total() - 1.0).abs() < 1e-12);
    }
}
