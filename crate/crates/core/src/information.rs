//! Classical and quantum Fisher information.
//!
//! The classical Fisher information matrix of a discrete outcome distribution
//! is `F_ij = sum_m (d_i P_m)(d_j P_m) / P_m`. Time-resolved distributions
//! have no tidy closed form, so [`fim_numeric`] differentiates the binned
//! probabilities by central differences. Closed forms exist without time
//! resolution ([`closed_form_fim_bucket`], [`closed_form_fim_nr`]) and serve
//! as cross-checks.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binned::MeasurementConfig;
use crate::error::{Error, Result};
use crate::model::{Parameter, PhysicalParams};

/// Probabilities below this are treated as zero in the `1/P` term.
pub const P_FLOOR: f64 = 1e-300;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Ordered, duplicate-free subset of the physical parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Parameter>", into = "Vec<Parameter>")]
pub struct ParameterSet(Vec<Parameter>);

impl ParameterSet {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Config("parameter set must not be empty".into()));
        }
        for (i, p) in params.iter().enumerate() {
            if params[..i].contains(p) {
                return Err(Error::Config(format!("parameter {p} listed twice")));
            }
        }
        Ok(Self(params))
    }

    pub fn single(p: Parameter) -> Self {
        Self(vec![p])
    }

    pub fn all() -> Self {
        Self(Parameter::ALL.to_vec())
    }

    pub fn as_slice(&self) -> &[Parameter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, p: Parameter) -> Option<usize> {
        self.0.iter().position(|q| *q == p)
    }
}

impl TryFrom<Vec<Parameter>> for ParameterSet {
    type Error = Error;
    fn try_from(v: Vec<Parameter>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParameterSet> for Vec<Parameter> {
    fn from(s: ParameterSet) -> Self {
        s.0
    }
}

impl std::str::FromStr for ParameterSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let v = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(v)
    }
}

impl fmt::Display for ParameterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|p| p.name()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// A symmetric Fisher information matrix over an ordered parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    params: ParameterSet,
    entries: DMatrix<f64>,
    n_repetitions: u64,
}

impl FisherMatrix {
    pub fn new(params: ParameterSet, entries: DMatrix<f64>) -> Result<Self> {
        let n = params.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Config(format!(
                "matrix is {}x{}, parameter set has {n} entries",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        Ok(Self {
            params,
            entries: sym,
            n_repetitions: 1,
        })
    }

    pub fn with_repetitions(mut self, n: u64) -> Self {
        self.n_repetitions = n.max(1);
        self
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn n_repetitions(&self) -> u64 {
        self.n_repetitions
    }

    pub fn get(&self, a: Parameter, b: Parameter) -> Option<f64> {
        Some(self.entries[(self.params.index_of(a)?, self.params.index_of(b)?)])
    }

    /// Restriction to a subset of the parameters, in the subset's order.
    pub fn submatrix(&self, sub: &ParameterSet) -> Result<FisherMatrix> {
        let idx = sub
            .as_slice()
            .iter()
            .map(|p| {
                self.params
                    .index_of(*p)
                    .ok_or_else(|| Error::Config(format!("{p} not in {}", self.params)))
            })
            .collect::<Result<Vec<_>>>()?;
        let m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.entries[(idx[i], idx[j])]);
        Ok(FisherMatrix {
            params: sub.clone(),
            entries: m,
            n_repetitions: self.n_repetitions,
        })
    }

    pub fn analysis(&self) -> FimAnalysis {
        fim_analysis(self)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.entries.nrows())
            .map(|i| self.entries.row(i).iter().copied().collect())
            .collect()
    }
}

/// Structure of a Fisher matrix: spectrum, rank and Cramér-Rao bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FimAnalysis {
    pub determinant: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub singular: bool,
    /// Per-parameter variance bounds `[F^-1]_ii / N`, when invertible.
    pub crb: Option<Vec<(Parameter, f64)>>,
}

pub fn fim_analysis(f: &FisherMatrix) -> FimAnalysis {
    let n = f.params.len();
    let eig = SymmetricEigen::new(f.entries.clone());
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let largest = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rank = eigenvalues
        .iter()
        .filter(|v| largest > 0.0 && v.abs() > RANK_TOLERANCE * largest)
        .count();
    let determinant = eigenvalues.iter().product();
    let singular = rank < n;
    let crb = if singular {
        None
    } else {
        f.entries.clone().try_inverse().map(|inv| {
            f.params
                .as_slice()
                .iter()
                .enumerate()
                .map(|(i, p)| (*p, inv[(i, i)] / f.n_repetitions as f64))
                .collect()
        })
    };
    FimAnalysis {
        determinant,
        eigenvalues,
        rank,
        singular: singular || crb.is_none(),
        crb,
    }
}

/// Characteristic scale of each parameter for step-size selection.
pub(crate) fn step_scale(param: Parameter, p: &PhysicalParams) -> f64 {
    match param {
        Parameter::Delta => 1.0 / p.sigma(),
        Parameter::Alpha | Parameter::Gamma => 0.05,
        Parameter::Sigma => p.sigma() / 20.0,
    }
}

/// Central-difference step `eps^(1/3) max(|theta|, scale)`.
pub fn difference_step(param: Parameter, p: &PhysicalParams) -> f64 {
    f64::EPSILON.cbrt() * p.get(param).abs().max(step_scale(param, p))
}

fn shifted(p: &PhysicalParams, param: Parameter, h: f64) -> Result<PhysicalParams> {
    p.with(param, p.get(param) + h).map_err(|_| Error::Boundary {
        param,
        value: p.get(param),
    })
}

/// Fisher matrix of an arbitrary probability-vector builder.
///
/// `probs` must return probabilities of one fixed, ordered outcome set for
/// every parameter value it is asked about. Outcomes whose probability
/// vanishes at `p` contribute their continuous limit `2 d_i d_j P_m`, which
/// is zero unless the probability vanishes quadratically around `p`.
pub fn fim_from_probabilities<F>(probs: F, p: &PhysicalParams, ps: &ParameterSet) -> Result<FisherMatrix>
where
    F: Fn(&PhysicalParams) -> Vec<f64>,
{
    let k = ps.len();
    let base = probs(p);
    let steps: Vec<f64> = ps.as_slice().iter().map(|q| difference_step(*q, p)).collect();
    let mut plus = Vec::with_capacity(k);
    let mut minus = Vec::with_capacity(k);
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (q, h) in ps.as_slice().iter().zip(&steps) {
        let up = probs(&shifted(p, *q, *h)?);
        let dn = probs(&shifted(p, *q, -*h)?);
        grads.push(up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * h)).collect());
        plus.push(up);
        minus.push(dn);
    }

    let mut f = DMatrix::<f64>::zeros(k, k);
    let mut vanishing = Vec::new();
    let mut floor_mass = 0.0;
    for (m, &pm) in base.iter().enumerate() {
        if pm > P_FLOOR {
            for i in 0..k {
                for j in i..k {
                    f[(i, j)] += grads[i][m] * grads[j][m] / pm;
                }
            }
        } else {
            floor_mass += pm.max(0.0);
            let touched = (0..k).any(|i| plus[i][m] > 0.0 || minus[i][m] > 0.0);
            if touched {
                vanishing.push(m);
            }
        }
    }
    if floor_mass > 0.1 {
        log::warn!("degenerate distribution: {floor_mass} of the mass lies below the probability floor");
    }

    if !vanishing.is_empty() {
        let curv = curvature(&probs, p, ps, &base, &vanishing)?;
        for i in 0..k {
            for j in i..k {
                f[(i, j)] += 2.0 * curv[(i, j)];
            }
        }
    }

    for i in 0..k {
        for j in 0..i {
            f[(i, j)] = f[(j, i)];
        }
    }
    FisherMatrix::new(ps.clone(), f)
}

/// Summed second derivatives of the listed (vanishing) outcomes.
fn curvature<F>(
    probs: &F,
    p: &PhysicalParams,
    ps: &ParameterSet,
    base: &[f64],
    outcomes: &[usize],
) -> Result<DMatrix<f64>>
where
    F: Fn(&PhysicalParams) -> Vec<f64>,
{
    let k = ps.len();
    let params = ps.as_slice();
    // Larger step: second differences amplify rounding by 1/h^2.
    let h: Vec<f64> = params
        .iter()
        .map(|q| f64::EPSILON.powf(0.25) * p.get(*q).abs().max(step_scale(*q, p)))
        .collect();
    let sum = |v: &[f64]| outcomes.iter().map(|&m| v[m]).sum::<f64>();
    let at = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut q = *p;
        for &(i, s) in shifts {
            q = shifted(&q, params[i], s)?;
        }
        Ok(sum(&probs(&q)))
    };
    let c = sum(base);
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        let v = (at(&[(i, h[i])])? - 2.0 * c + at(&[(i, -h[i])])?) / (h[i] * h[i]);
        out[(i, i)] = v.max(0.0);
        for j in i + 1..k {
            let v = (at(&[(i, h[i]), (j, h[j])])? - at(&[(i, h[i]), (j, -h[j])])?
                - at(&[(i, -h[i]), (j, h[j])])?
                + at(&[(i, -h[i]), (j, -h[j])])?)
                / (4.0 * h[i] * h[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Numeric Fisher matrix of a measurement configuration.
///
/// The outcome set is resolved at `p` and held fixed while differencing.
pub fn fim_numeric(config: &MeasurementConfig, p: &PhysicalParams, ps: &ParameterSet) -> Result<FisherMatrix> {
    let support = config.support(p)?;
    fim_from_probabilities(|q| support.probabilities(q), p, ps)
}

/// Single-parameter delay information `F_delta`.
pub fn cfi_delta(config: &MeasurementConfig, p: &PhysicalParams) -> Result<f64> {
    let f = fim_numeric(config, p, &ParameterSet::single(Parameter::Delta))?;
    Ok(f.matrix()[(0, 0)])
}

// ---------------------------------------------------------------------------
// Closed forms without time resolution

struct BucketTerms {
    kappa: f64,
    chi: f64,
    e2: f64,
}

/// Denominator `alpha^2 (gamma - 1) - 4 alpha gamma e^{2u} + (3 gamma + 1) e^{4u}`
/// with `u = delta^2 sigma^2`, expanded around `alpha = 1, u = 0` so that it
/// stays accurate where it vanishes.
fn bucket_denominator(p: &PhysicalParams) -> f64 {
    let g = p.gamma();
    let b = 1.0 - p.alpha();
    let u = (p.delta() * p.sigma()).powi(2);
    let m = (2.0 * u).exp_m1();
    2.0 * (1.0 + g) * (b + m) + (g - 1.0) * b * b + 4.0 * g * b * m + (3.0 * g + 1.0) * m * m
}

fn nr_denominator(p: &PhysicalParams) -> f64 {
    let b = 1.0 - p.alpha();
    let u = (p.delta() * p.sigma()).powi(2);
    (4.0 * u).exp_m1() + b * (2.0 - b)
}

fn bucket_terms(p: &PhysicalParams) -> BucketTerms {
    let g = p.gamma();
    let a = p.alpha();
    let e2 = (2.0 * (p.delta() * p.sigma()).powi(2)).exp();
    BucketTerms {
        kappa: (1.0 - g).powi(2) * (1.0 + g) / bucket_denominator(p),
        chi: (1.0 - g) / (a * (g - 1.0) - (3.0 * g + 1.0) * e2),
        e2,
    }
}

/// Closed-form delay information for untimed bucket detectors.
pub fn cfi_bucket_notr(p: &PhysicalParams) -> f64 {
    let (a, g, d, s) = (p.alpha(), p.gamma(), p.delta(), p.sigma());
    let den = bucket_denominator(p);
    if den <= 0.0 {
        // alpha = 1, delta = 0: continuous limit
        return 4.0 * s * s * (1.0 - g).powi(2);
    }
    16.0 * a * a * (1.0 - g).powi(2) * (1.0 + g) * d * d * s.powi(4) / den
}

/// Closed-form delay information for untimed number-resolving detectors.
pub fn cfi_nr_notr(p: &PhysicalParams) -> f64 {
    let (a, g, d, s) = (p.alpha(), p.gamma(), p.delta(), p.sigma());
    let den = nr_denominator(p);
    if den <= 0.0 {
        return 4.0 * s * s * (1.0 - g).powi(2);
    }
    16.0 * a * a * (1.0 - g).powi(2) * d * d * s.powi(4) / den
}

/// Full `(delta, alpha, sigma, gamma)` Fisher matrix for untimed bucket
/// detectors.
pub fn closed_form_fim_bucket(p: &PhysicalParams) -> Result<FisherMatrix> {
    if p.gamma() >= 1.0 {
        return Err(Error::Boundary {
            param: Parameter::Gamma,
            value: p.gamma(),
        });
    }
    if bucket_denominator(p) <= 0.0 {
        return Err(Error::Boundary {
            param: Parameter::Alpha,
            value: p.alpha(),
        });
    }
    let BucketTerms { kappa: k, chi: x, e2 } = bucket_terms(p);
    let (a, d, s, g) = (p.alpha(), p.delta(), p.sigma(), p.gamma());
    let m = [
        [
            16.0 * a * a * d * d * k * s.powi(4),
            -4.0 * a * d * k * s * s,
            16.0 * a * a * d.powi(3) * k * s.powi(3),
            8.0 * a * d * s * s * x,
        ],
        [
            -4.0 * a * d * k * s * s,
            k,
            -4.0 * a * d * d * k * s,
            -2.0 * x,
        ],
        [
            16.0 * a * a * d.powi(3) * k * s.powi(3),
            -4.0 * a * d * d * k * s,
            16.0 * a * a * d.powi(4) * k * s * s,
            8.0 * a * d * d * s * x,
        ],
        [
            8.0 * a * d * s * s * x,
            -2.0 * x,
            8.0 * a * d * d * s * x,
            -8.0 * x * e2 / (1.0 - g).powi(2),
        ],
    ];
    FisherMatrix::new(ParameterSet::all(), DMatrix::from_fn(4, 4, |i, j| m[i][j]))
}

/// Full `(delta, alpha, sigma, gamma)` Fisher matrix for untimed
/// number-resolving detectors. Loss decouples from the other parameters.
pub fn closed_form_fim_nr(p: &PhysicalParams) -> Result<FisherMatrix> {
    let (a, d, s, g) = (p.alpha(), p.delta(), p.sigma(), p.gamma());
    if g <= 0.0 || g >= 1.0 {
        return Err(Error::Boundary {
            param: Parameter::Gamma,
            value: g,
        });
    }
    let den = nr_denominator(p);
    if den <= 0.0 {
        return Err(Error::Boundary {
            param: Parameter::Alpha,
            value: a,
        });
    }
    let xi = (1.0 - g).powi(2) / den;
    let m = [
        [
            16.0 * a * a * d * d * xi * s.powi(4),
            -4.0 * a * d * xi * s * s,
            16.0 * a * a * d.powi(3) * xi * s.powi(3),
            0.0,
        ],
        [-4.0 * a * d * xi * s * s, xi, -4.0 * a * d * d * xi * s, 0.0],
        [
            16.0 * a * a * d.powi(3) * xi * s.powi(3),
            -4.0 * a * d * d * xi * s,
            16.0 * a * a * d.powi(4) * xi * s * s,
            0.0,
        ],
        [0.0, 0.0, 0.0, 2.0 / (g - g * g)],
    ];
    FisherMatrix::new(ParameterSet::all(), DMatrix::from_fn(4, 4, |i, j| m[i][j]))
}

// ---------------------------------------------------------------------------
// Quantum limits

/// Quantum Fisher information of the delay, `4 sigma^2`.
pub fn qfi(sigma: f64) -> f64 {
    4.0 * sigma * sigma
}

/// QFI conditioned on both photons surviving, `4 sigma^2 (1 - gamma)^2`.
pub fn qfi_two_photon(sigma: f64, gamma: f64) -> f64 {
    qfi(sigma) * (1.0 - gamma).powi(2)
}

/// Delay information as a fraction of the two-photon conditioned QFI.
pub fn relative_information(f: f64, sigma: f64, gamma: f64) -> f64 {
    f / qfi_two_photon(sigma, gamma)
}

// ---------------------------------------------------------------------------
// Operating point

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalDelay {
    pub delta: f64,
    pub information: f64,
    /// Set when the maximum is numerically indistinguishable from zero.
    pub flat: bool,
}

/// Search region `[0, 5/sigma + 2T]` and coarse step `min(T, 1/sigma)/40`.
pub fn delay_search_grid(config: &MeasurementConfig, sigma: f64) -> (f64, f64) {
    let t = config.bin_width();
    let upper = 5.0 / sigma + 2.0 * t.unwrap_or(0.0);
    let unit = t.map_or(1.0 / sigma, |t| t.min(1.0 / sigma));
    (upper, unit / 40.0)
}

/// Delay maximising `F_delta` over `delta >= 0`, other parameters fixed.
///
/// Coarse grid followed by golden-section refinement; ties go to the smaller
/// delay.
pub fn optimal_delta(config: &MeasurementConfig, p: &PhysicalParams) -> Result<OptimalDelay> {
    let s = p.sigma();
    let (upper, step) = delay_search_grid(config, s);
    let f = |d: f64| -> Result<f64> { cfi_delta(config, &p.with(Parameter::Delta, d)?) };
    let best = maximize_on_grid(f, 0.0, upper, step, 1e-6 / s)?;
    let flat = best.1 < 1e-12 * s * s;
    if flat {
        log::warn!("{}: delay information is flat (max {})", config.label(), best.1);
    }
    Ok(OptimalDelay {
        delta: best.0,
        information: best.1,
        flat,
    })
}

/// Grid search then golden-section refinement on `[lo, hi]`.
pub fn maximize_on_grid<F>(f: F, lo: f64, hi: f64, step: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect();
    let values = grid.par_iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;
    // Near-ties (periodic or flat objectives) go to the smallest argument.
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let i_best = values
        .iter()
        .position(|v| *v >= top - 1e-9 * top.abs())
        .unwrap_or(0);
    let a = grid[i_best.saturating_sub(1)];
    let b = grid[(i_best + 1).min(n)];
    let (x, fx) = golden_section_max(&f, a, b, tol)?;
    if fx > values[i_best] {
        Ok((x, fx))
    } else {
        Ok((grid[i_best], values[i_best]))
    }
}

pub(crate) fn golden_section_max<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let r = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(d: f64, a: f64, s: f64, g: f64) -> PhysicalParams {
        PhysicalParams::new(d, a, s, g).unwrap()
    }

    #[test]
    fn quantum_limits() {
        assert_eq!(qfi(1.0), 4.0);
        assert!((qfi_two_photon(1.0, 0.4) - 1.44).abs() < 1e-15);
        assert!((relative_information(1.44, 1.0, 0.4) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_at_zero_delay() {
        assert_eq!(cfi_bucket_notr(&pp(0.0, 0.9, 1.0, 0.4)), 0.0);
        assert_eq!(cfi_nr_notr(&pp(0.0, 0.9, 1.0, 0.4)), 0.0);
        assert!((cfi_nr_notr(&pp(0.0, 1.0, 1.0, 0.4)) - 1.44).abs() < 1e-15);
        assert!((cfi_bucket_notr(&pp(0.0, 1.0, 1.0, 0.0)) - 4.0).abs() < 1e-15);
        // approaching the limit continuously
        let near = cfi_bucket_notr(&pp(1e-5, 1.0, 1.0, 0.0));
        assert!((near - 4.0).abs() < 1e-4, "{near}");
    }

    #[test]
    fn stable_denominators_match_literal_form() {
        for &(d, a, s, g) in &[(0.3, 0.9, 1.0, 0.4), (1.2, 0.5, 2.0, 0.1), (0.05, 0.99, 0.7, 0.8)] {
            let p = pp(d, a, s, g);
            let e = (2.0 * (d * s).powi(2)).exp();
            let lit = a * a * (g - 1.0) - 4.0 * a * g * e + (3.0 * g + 1.0) * e * e;
            assert!((bucket_denominator(&p) - lit).abs() < 1e-12 * lit.abs().max(1.0));
            let lit = e * e - a * a;
            assert!((nr_denominator(&p) - lit).abs() < 1e-12 * lit.abs().max(1.0));
        }
    }

    #[test]
    fn nr_gamma_entry() {
        let f = closed_form_fim_nr(&pp(0.3, 0.9, 1.0, 0.4)).unwrap();
        let v = f.get(Parameter::Gamma, Parameter::Gamma).unwrap();
        assert!((v - 8.333333333333334).abs() < 1e-12);
    }

    #[test]
    fn closed_form_boundaries() {
        assert!(matches!(
            closed_form_fim_bucket(&pp(0.3, 0.9, 1.0, 1.0)),
            Err(Error::Boundary { param: Parameter::Gamma, .. })
        ));
        assert!(closed_form_fim_nr(&pp(0.3, 0.9, 1.0, 0.0)).is_err());
    }

    #[test]
    fn boundary_parameters_are_rejected() {
        let c = MeasurementConfig::nr_hom();
        let ps: ParameterSet = "delta,alpha".parse().unwrap();
        let e = fim_numeric(&c, &pp(0.3, 1.0, 1.0, 0.4), &ps).unwrap_err();
        assert!(matches!(e, Error::Boundary { param: Parameter::Alpha, .. }));
        let ps = ParameterSet::single(Parameter::Gamma);
        assert!(fim_numeric(&c, &pp(0.3, 0.9, 1.0, 0.0), &ps).is_err());
        // delta alone is fine even at alpha = 1
        assert!(cfi_delta(&c, &pp(0.3, 1.0, 1.0, 0.4)).is_ok());
    }

    #[test]
    fn parameter_set_parsing() {
        let ps: ParameterSet = "delta, alpha".parse().unwrap();
        assert_eq!(ps.as_slice(), &[Parameter::Delta, Parameter::Alpha]);
        assert!("delta,delta".parse::<ParameterSet>().is_err());
        assert!("".parse::<ParameterSet>().is_err());
        assert_eq!(ps.to_string(), "{delta,alpha}");
    }

    #[test]
    fn analysis_of_diagonal_matrix() {
        let ps: ParameterSet = "delta,gamma".parse().unwrap();
        let f = FisherMatrix::new(ps, DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 2.0]))
            .unwrap()
            .with_repetitions(10);
        let a = f.analysis();
        assert_eq!(a.rank, 2);
        assert!((a.determinant - 8.0).abs() < 1e-12);
        let crb = a.crb.unwrap();
        assert!((crb[0].1 - 0.025).abs() < 1e-15);
        assert!((crb[1].1 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let f = |x: f64| Ok(-(x - 0.37).powi(2));
        let (x, _) = maximize_on_grid(f, 0.0, 2.0, 0.05, 1e-9).unwrap();
        assert!((x - 0.37).abs() < 1e-8);
    }
}
