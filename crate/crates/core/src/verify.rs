//! Independent numerical oracles.
//!
//! Everything here evaluates the physics through a second route: the
//! densities are written in their direct exponential form, integrals are done
//! by adaptive Gauss-Kronrod quadrature and derivatives by Richardson
//! extrapolation. Nothing in this module touches the error-function kernel
//! of [`crate::binned`], so agreement between the two is a real check.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::binned::{MeasurementConfig, Outcome, Protocol};
use crate::error::{Error, Result};
use crate::information::{FisherMatrix, ParameterSet};
use crate::model::{Parameter, PhysicalParams};

/// Tolerances for [`quad_integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Config("max_subdivisions must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Gauss-Kronrod 7/15

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    Segment { a, b, value, error }
}

/// Adaptive quadrature of `f` over `[a, b]`; either end may be infinite.
///
/// Returns `(value, error_estimate)`.
pub fn quad_integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    quad_integrate_points(f, a, b, &[], spec)
}

/// Like [`quad_integrate`], with the range first split at `points` (kinks or
/// narrow peaks the integrand is known to have).
pub fn quad_integrate_points<F>(
    f: F,
    a: f64,
    b: f64,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if a.is_nan() || b.is_nan() {
        return Err(Error::Config("integration limits must not be NaN".into()));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    if a > b {
        let (v, e) = quad_integrate_points(f, b, a, points, spec)?;
        return Ok((-v, e));
    }
    let mut cuts: Vec<f64> = points
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![a];
    edges.extend(cuts);
    edges.push(b);

    // Every piece becomes a finite interval in a transformed variable.
    type Piece<'a> = (Box<dyn Fn(f64) -> f64 + 'a>, f64, f64);
    let mut pieces: Vec<Piece> = Vec::new();
    let f = &f;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => pieces.push((Box::new(f), lo, hi)),
            (true, false) => pieces.push((
                Box::new(move |t: f64| {
                    let u = 1.0 - t;
                    f(lo + t / u) / (u * u)
                }),
                0.0,
                1.0,
            )),
            (false, true) => pieces.push((
                Box::new(move |t: f64| {
                    let u = 1.0 - t;
                    f(hi - t / u) / (u * u)
                }),
                0.0,
                1.0,
            )),
            (false, false) => pieces.push((
                Box::new(move |t: f64| {
                    let u = 1.0 - t * t;
                    f(t / u) * (1.0 + t * t) / (u * u)
                }),
                -1.0,
                1.0,
            )),
        }
    }

    let mut heap = BinaryHeap::new();
    for (k, (g, lo, hi)) in pieces.iter().enumerate() {
        // A few equal parts per piece so that a single rule cannot step over
        // a narrow feature entirely.
        let parts = 4;
        for j in 0..parts {
            let x0 = lo + (hi - lo) * j as f64 / parts as f64;
            let x1 = lo + (hi - lo) * (j + 1) as f64 / parts as f64;
            heap.push((gk15(g, x0, x1), k));
        }
    }
    let mut subdivisions = 0;
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), (s, _)| (v + s.value, e + s.error));
        if !value.is_finite() {
            return Err(Error::Quadrature {
                a,
                b,
                value,
                error,
                subdivisions,
            });
        }
        if error <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
            return Ok((value, error));
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                a,
                b,
                value,
                error,
                subdivisions,
            });
        }
        let (worst, k) = heap.pop().expect("non-empty");
        let g = &pieces[k].0;
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature {
                a,
                b,
                value,
                error,
                subdivisions,
            });
        }
        heap.push((gk15(g, worst.a, mid), k));
        heap.push((gk15(g, mid, worst.b), k));
        subdivisions += 1;
    }
}

// ---------------------------------------------------------------------------
// Direct densities

/// Coincidence density in its product form
/// `sigma/sqrt(2 pi) exp(-2 sigma^2 (tau^2 + delta^2)) (cosh(4 sigma^2 tau delta) - alpha)`.
///
/// The hyperbolic cosine is folded into the exponent so the product does not
/// overflow for large `tau delta`.
pub fn literal_coincidence(p: &PhysicalParams, tau: f64) -> f64 {
    literal_hom(p, tau, -1.0)
}

pub fn literal_bunching(p: &PhysicalParams, tau: f64) -> f64 {
    literal_hom(p, tau, 1.0)
}

fn literal_hom(p: &PhysicalParams, tau: f64, sign: f64) -> f64 {
    let s2 = p.sigma() * p.sigma();
    let d = p.delta();
    let e = -2.0 * s2 * (tau * tau + d * d);
    let y = 4.0 * s2 * tau * d;
    let v = 0.5 * ((e + y).exp() + (e - y).exp()) + sign * p.alpha() * e.exp();
    (p.sigma() / (2.0 * PI).sqrt() * v).max(0.0)
}

pub fn literal_nohom(p: &PhysicalParams, tau: f64) -> f64 {
    let s = p.sigma();
    let d = tau - p.delta();
    s * (2.0 / PI).sqrt() * (-2.0 * s * s * d * d).exp()
}

fn tri(x: f64, w: f64) -> f64 {
    (1.0 - x.abs() / w).max(0.0)
}

fn hom_bin_quadrature<F>(density: F, p: &PhysicalParams, w: f64, n: u32, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&PhysicalParams, f64) -> f64,
{
    let c = n as f64 * w;
    let pts = [-p.delta(), 0.0, p.delta()];
    let near = |centre: f64| -> Result<f64> {
        let mut pts = pts.to_vec();
        pts.push(centre);
        let g = |t: f64| tri(t - centre, w) * density(p, t);
        Ok(quad_integrate_points(g, centre - w, centre + w, &pts, spec)?.0)
    };
    if n == 0 {
        near(0.0)
    } else {
        Ok(near(c)? + near(-c)?)
    }
}

/// Quadrature of the coincidence density against the bin-`n` weight.
pub fn oracle_binned_coincidence(p: &PhysicalParams, bin_width: f64, n: u32, spec: &QuadratureSpec) -> Result<f64> {
    hom_bin_quadrature(literal_coincidence, p, bin_width, n, spec)
}

pub fn oracle_binned_bunching(p: &PhysicalParams, bin_width: f64, n: u32, spec: &QuadratureSpec) -> Result<f64> {
    hom_bin_quadrature(literal_bunching, p, bin_width, n, spec)
}

pub fn oracle_binned_nohom(p: &PhysicalParams, bin_width: f64, n: i64, spec: &QuadratureSpec) -> Result<f64> {
    let c = n as f64 * bin_width;
    let g = |t: f64| tri(t - c, bin_width) * literal_nohom(p, t);
    Ok(quad_integrate_points(g, c - bin_width, c + bin_width, &[c, p.delta()], spec)?.0)
}

/// Total coincidence and bunching probabilities by quadrature over the line.
pub fn oracle_total_rates(p: &PhysicalParams, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let pts = [-p.delta(), 0.0, p.delta()];
    let c = quad_integrate_points(|t| literal_coincidence(p, t), f64::NEG_INFINITY, f64::INFINITY, &pts, spec)?.0;
    let b = quad_integrate_points(|t| literal_bunching(p, t), f64::NEG_INFINITY, f64::INFINITY, &pts, spec)?.0;
    Ok((c, b))
}

/// Probability of one outcome of `config` at `p`, built from quadratures of
/// the direct densities and the photon-loss combinatorics.
pub fn oracle_probability(config: &MeasurementConfig, p: &PhysicalParams, outcome: &Outcome, spec: &QuadratureSpec) -> Result<f64> {
    let g = p.gamma();
    let both = (1.0 - g) * (1.0 - g);
    let nr = config.detector.number_resolving;
    let tr = config.detector.time_resolving;
    let w = config.bin_width();
    let hom = config.protocol == Protocol::Hom;
    let rates = || oracle_total_rates(p, spec);
    let v = match *outcome {
        Outcome::ZeroClicks => g * g,
        Outcome::OneClick if hom && !nr => {
            let (c, b) = rates()?;
            2.0 * g * (1.0 - g) * c + (1.0 - g * g) * b
        }
        Outcome::OneClick => 2.0 * g * (1.0 - g),
        Outcome::TwoClicksNoTiming { bunched } if !tr => match (hom, bunched) {
            (true, false) => both * rates()?.0,
            (true, true) if nr => both * rates()?.1,
            (false, false) => both,
            _ => return Err(unsupported(outcome)),
        },
        Outcome::CoincidenceSep(n) if hom && tr => {
            both * oracle_binned_coincidence(p, w.expect("timed"), n, spec)?
        }
        Outcome::BunchSep(n) if hom && tr && nr => {
            both * oracle_binned_bunching(p, w.expect("timed"), n, spec)?
        }
        Outcome::NoHomSep(n) if !hom && tr => both * oracle_binned_nohom(p, w.expect("timed"), n, spec)?,
        _ => return Err(unsupported(outcome)),
    };
    Ok(v)
}

fn unsupported(o: &Outcome) -> Error {
    Error::IncompatibleCounts(format!("no oracle for outcome {o} in this configuration"))
}

// ---------------------------------------------------------------------------
// Differentiation

/// Central-difference derivative refined by Richardson extrapolation
/// (four halvings of `h`).
pub fn richardson_derivative<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    const LEVELS: usize = 4;
    let mut table = [[0.0; LEVELS]; LEVELS];
    let mut step = h;
    for i in 0..LEVELS {
        table[i][0] = (f(x + step)? - f(x - step)?) / (2.0 * step);
        let mut factor = 4.0;
        for j in 1..=i {
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
            factor *= 4.0;
        }
        step *= 0.5;
    }
    Ok(table[LEVELS - 1][LEVELS - 1])
}

/// Fisher matrix over an explicit outcome list, with probabilities from
/// [`oracle_probability`] and derivatives from [`richardson_derivative`].
///
/// Slow; meant for small outcome sets in tests and self-checks.
pub fn oracle_fim(
    config: &MeasurementConfig,
    p: &PhysicalParams,
    outcomes: &[Outcome],
    ps: &ParameterSet,
    spec: &QuadratureSpec,
) -> Result<FisherMatrix> {
    let k = ps.len();
    let mut grads = vec![vec![0.0; outcomes.len()]; k];
    for (i, q) in ps.as_slice().iter().enumerate() {
        let h = oracle_step(*q, p);
        for (m, o) in outcomes.iter().enumerate() {
            let f = |x: f64| -> Result<f64> {
                let shifted = p.with(*q, x).map_err(|_| Error::Boundary { param: *q, value: x })?;
                oracle_probability(config, &shifted, o, spec)
            };
            grads[i][m] = richardson_derivative(f, p.get(*q), h)?;
        }
    }
    let mut f = DMatrix::zeros(k, k);
    for (m, o) in outcomes.iter().enumerate() {
        let pm = oracle_probability(config, p, o, spec)?;
        if pm <= 0.0 {
            continue;
        }
        for i in 0..k {
            for j in 0..k {
                f[(i, j)] += grads[i][m] * grads[j][m] / pm;
            }
        }
    }
    FisherMatrix::new(ps.clone(), f)
}

fn oracle_step(q: Parameter, p: &PhysicalParams) -> f64 {
    let room = |v: f64| v.min(1.0 - v).max(1e-9);
    match q {
        Parameter::Delta => 0.05 / p.sigma(),
        Parameter::Sigma => 0.02 * p.sigma(),
        Parameter::Alpha => (0.02_f64).min(0.5 * room(p.alpha())),
        Parameter::Gamma => (0.02_f64).min(0.5 * room(p.gamma())),
    }
}

/// Continuous-time delay information `int (d_delta f)^2 / f dtau` of a
/// normalised density, by quadrature with a central-difference score.
pub fn score_integral_cfi<D>(density: D, p: &PhysicalParams, spec: &QuadratureSpec) -> Result<f64>
where
    D: Fn(&PhysicalParams, f64) -> f64,
{
    let d = p.delta();
    let h = f64::EPSILON.cbrt() * d.abs().max(1.0 / p.sigma());
    let up = p.with(Parameter::Delta, d + h)?;
    let dn = p.with(Parameter::Delta, d - h)?;
    let integrand = |t: f64| {
        let f = density(p, t);
        if f <= 1e-300 {
            return 0.0;
        }
        let df = (density(&up, t) - density(&dn, t)) / (2.0 * h);
        df * df / f
    };
    let pts = [-d, 0.0, d];
    Ok(quad_integrate_points(integrand, f64::NEG_INFINITY, f64::INFINITY, &pts, spec)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_half_line() {
        let (v, _) = quad_integrate(|x| (-x * x).exp(), 0.0, f64::INFINITY, &QuadratureSpec::default()).unwrap();
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn reversed_and_empty_ranges() {
        let spec = QuadratureSpec::default();
        let (v, _) = quad_integrate(|x| x, 1.0, 0.0, &spec).unwrap();
        assert!((v + 0.5).abs() < 1e-14);
        assert_eq!(quad_integrate(|x| x, 2.0, 2.0, &spec).unwrap().0, 0.0);
    }

    #[test]
    fn negative_half_line() {
        let (v, _) = quad_integrate(|x| x.exp(), f64::NEG_INFINITY, 0.0, &QuadratureSpec::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reports_nonconvergence() {
        let spec = QuadratureSpec {
            max_subdivisions: 3,
            ..Default::default()
        };
        let r = quad_integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, &spec);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn literal_and_mixture_densities_agree() {
        let p = PhysicalParams::new(0.37, 0.8, 1.3, 0.2).unwrap();
        for t in [-1.0, -0.2, 0.0, 0.1, 0.5] {
            let a = literal_coincidence(&p, t);
            let b = crate::model::coincidence_density(&p, t);
            assert!((a - b).abs() < 1e-14, "{t}: {a} {b}");
        }
    }

    #[test]
    fn derivative_of_sine() {
        let d = richardson_derivative(|x| Ok(x.sin()), 0.3, 0.1).unwrap();
        assert!((d - 0.3_f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn flat_density_has_no_information() {
        let p = PhysicalParams::new(0.4, 1.0, 1.0, 0.0).unwrap();
        let f = |_: &PhysicalParams, t: f64| (-t * t).exp() / PI.sqrt();
        let v = score_integral_cfi(f, &p, &QuadratureSpec::default()).unwrap();
        assert_eq!(v, 0.0);
    }
}
