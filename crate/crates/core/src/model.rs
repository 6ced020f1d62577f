//! Arrival-time probability densities for a frequency-entangled photon pair.
//!
//! After the beamsplitter the two photons are either found in different
//! output ports (a coincidence) or in the same port (a bunch). For a Gaussian
//! joint spectral amplitude of width `sigma`, both densities over the
//! arrival-time difference `tau` are sums of three Gaussians of common
//! standard deviation `1/(2 sigma)`:
//!
//! ```text
//! P_c(tau) = 1/4 [N(tau; -delta) + N(tau; delta) - 2 x N(tau; 0)]
//! P_b(tau) = 1/4 [N(tau; -delta) + N(tau; delta) + 2 x N(tau; 0)]
//! x        = alpha exp(-2 sigma^2 delta^2)
//! ```
//!
//! That decomposition is the canonical evaluation path here. The textbook
//! product form carries a factor `exp(8 delta sigma^2 tau)` that overflows
//! long before the density itself becomes small.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four physical parameters a measurement record depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    /// Relative delay between the two arms.
    Delta,
    /// Visibility (relative indistinguishability).
    Alpha,
    /// Spectral width.
    Sigma,
    /// Per-photon loss probability.
    Gamma,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [
        Parameter::Delta,
        Parameter::Alpha,
        Parameter::Sigma,
        Parameter::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Delta => "delta",
            Parameter::Alpha => "alpha",
            Parameter::Sigma => "sigma",
            Parameter::Gamma => "gamma",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "delta" | "d" => Ok(Parameter::Delta),
            "alpha" | "a" => Ok(Parameter::Alpha),
            "sigma" | "s" => Ok(Parameter::Sigma),
            "gamma" | "g" => Ok(Parameter::Gamma),
            other => Err(Error::Config(format!("unknown parameter `{other}`"))),
        }
    }
}

/// The estimation parameter vector `(delta, alpha, sigma, gamma)`.
///
/// Times and inverse times must be expressed in one consistent unit system
/// (for example picoseconds and inverse picoseconds, or units of `1/sigma`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct PhysicalParams {
    delta: f64,
    alpha: f64,
    sigma: f64,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    delta: f64,
    alpha: f64,
    sigma: f64,
    gamma: f64,
}

impl TryFrom<RawParams> for PhysicalParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        PhysicalParams::new(r.delta, r.alpha, r.sigma, r.gamma)
    }
}

impl From<PhysicalParams> for RawParams {
    fn from(p: PhysicalParams) -> Self {
        RawParams {
            delta: p.delta,
            alpha: p.alpha,
            sigma: p.sigma,
            gamma: p.gamma,
        }
    }
}

impl PhysicalParams {
    pub fn new(delta: f64, alpha: f64, sigma: f64, gamma: f64) -> Result<Self> {
        check(Parameter::Delta, delta)?;
        check(Parameter::Alpha, alpha)?;
        check(Parameter::Sigma, sigma)?;
        check(Parameter::Gamma, gamma)?;
        Ok(Self {
            delta,
            alpha,
            sigma,
            gamma,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn get(&self, param: Parameter) -> f64 {
        match param {
            Parameter::Delta => self.delta,
            Parameter::Alpha => self.alpha,
            Parameter::Sigma => self.sigma,
            Parameter::Gamma => self.gamma,
        }
    }

    /// Copy with one parameter replaced, validated.
    pub fn with(&self, param: Parameter, value: f64) -> Result<Self> {
        check(param, value)?;
        let mut out = *self;
        match param {
            Parameter::Delta => out.delta = value,
            Parameter::Alpha => out.alpha = value,
            Parameter::Sigma => out.sigma = value,
            Parameter::Gamma => out.gamma = value,
        }
        Ok(out)
    }

    /// Standard deviation shared by every Gaussian in the arrival-time densities.
    pub fn temporal_width(&self) -> f64 {
        0.5 / self.sigma
    }

    /// Height of the central interference term, `alpha exp(-2 sigma^2 delta^2)`.
    pub fn overlap(&self) -> f64 {
        let sd = self.sigma * self.delta;
        self.alpha * (-2.0 * sd * sd).exp()
    }

    /// Probability that both photons survive loss.
    pub fn both_survive(&self) -> f64 {
        (1.0 - self.gamma).powi(2)
    }

    pub fn one_survives(&self) -> f64 {
        2.0 * self.gamma * (1.0 - self.gamma)
    }

    pub fn none_survive(&self) -> f64 {
        self.gamma * self.gamma
    }

    /// The joint rescaling `delta -> delta / k`, `sigma -> k sigma`.
    pub fn rescaled(&self, k: f64) -> Result<Self> {
        PhysicalParams::new(self.delta / k, self.alpha, self.sigma * k, self.gamma)
    }
}

fn check(param: Parameter, value: f64) -> Result<()> {
    let bad = |reason| {
        Err(Error::Domain {
            name: param.name(),
            value,
            reason,
        })
    };
    if !value.is_finite() {
        return bad("must be finite");
    }
    match param {
        Parameter::Delta => Ok(()),
        Parameter::Alpha | Parameter::Gamma if !(0.0..=1.0).contains(&value) => {
            bad("must lie in [0, 1]")
        }
        Parameter::Sigma if value <= 0.0 => bad("must be positive"),
        _ => Ok(()),
    }
}

/// Pump frequency, kept for documentation only.
///
/// It is a global phase on the biphoton state and never enters any
/// observable probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumNote {
    pub pump_frequency: Option<f64>,
}

/// A weighted normal density `weight * N(tau; mean, width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTerm {
    pub weight: f64,
    pub mean: f64,
}

/// A sum of weighted normal densities sharing one standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub width: f64,
    pub terms: Vec<GaussianTerm>,
}

impl GaussianMixture {
    pub fn density(&self, tau: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * normal_pdf(tau, t.mean, self.width))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }
}

pub(crate) fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// Three-Gaussian decomposition of the coincidence density.
pub fn coincidence_mixture(p: &PhysicalParams) -> GaussianMixture {
    hom_mixture(p, -1.0)
}

/// Three-Gaussian decomposition of the bunching density.
pub fn bunching_mixture(p: &PhysicalParams) -> GaussianMixture {
    hom_mixture(p, 1.0)
}

fn hom_mixture(p: &PhysicalParams, sign: f64) -> GaussianMixture {
    GaussianMixture {
        width: p.temporal_width(),
        terms: vec![
            GaussianTerm {
                weight: 0.25,
                mean: -p.delta,
            },
            GaussianTerm {
                weight: 0.25,
                mean: p.delta,
            },
            GaussianTerm {
                weight: sign * 0.5 * p.overlap(),
                mean: 0.0,
            },
        ],
    }
}

/// Single Gaussian of the no-beamsplitter arrival-time difference.
pub fn nohom_mixture(p: &PhysicalParams) -> GaussianMixture {
    GaussianMixture {
        width: p.temporal_width(),
        terms: vec![GaussianTerm {
            weight: 1.0,
            mean: p.delta,
        }],
    }
}

/// Density of a coincidence with arrival-time difference `tau`.
pub fn coincidence_density(p: &PhysicalParams, tau: f64) -> f64 {
    // Rounding in the cancellation can leave a tiny negative residue.
    coincidence_mixture(p).density(tau).max(0.0)
}

/// Density of a bunching event with arrival-time difference `tau`.
pub fn bunching_density(p: &PhysicalParams, tau: f64) -> f64 {
    bunching_mixture(p).density(tau)
}

/// Total coincidence and bunching probabilities `(P_c, P_b)`.
pub fn total_rates(p: &PhysicalParams) -> (f64, f64) {
    let x = p.overlap();
    (0.5 * (1.0 - x), 0.5 * (1.0 + x))
}

/// Signed arrival-time difference density without a beamsplitter.
///
/// Visibility plays no role here.
pub fn nohom_density(p: &PhysicalParams, tau: f64) -> f64 {
    let d = tau - p.delta;
    (2.0 / PI).sqrt() * p.sigma * (-2.0 * p.sigma * p.sigma * d * d).exp()
}
