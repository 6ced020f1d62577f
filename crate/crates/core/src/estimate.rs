//! Maximum-likelihood estimation from outcome counts.
//!
//! HOM protocols only see `|delta|`, so their delay estimates are reported
//! as non-negative. The no-beamsplitter protocol estimates a signed delay.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::binned::{MeasurementConfig, Protocol};
use crate::error::{Error, Result};
use crate::information::{fim_numeric, golden_section_max, step_scale, FisherMatrix, ParameterSet};
use crate::model::{Parameter, PhysicalParams};
use crate::simulate::CountsHistogram;

/// Interior margin for visibility and loss estimates.
pub const DOMAIN_MARGIN: f64 = 1e-6;

/// Point estimates with their uncertainty summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub estimates: Vec<(Parameter, f64)>,
    /// Full parameter point at the optimum, known values included.
    pub params: PhysicalParams,
    pub log_likelihood: f64,
    /// Negative Hessian of the log-likelihood at the optimum (whole data set).
    pub observed_information: FisherMatrix,
    /// Diagonal of the inverse expected information at the optimum divided
    /// by `n_trials`; `None` when that matrix is singular.
    pub crb_variance: Option<Vec<(Parameter, f64)>>,
    pub n_trials: u64,
    /// The optimum sits on the boundary of the delay search interval.
    pub at_search_edge: bool,
}

impl EstimationResult {
    pub fn estimate(&self, p: Parameter) -> Option<f64> {
        self.estimates.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }

    pub fn crb(&self, p: Parameter) -> Option<f64> {
        self.crb_variance
            .as_ref()?
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, v)| *v)
    }
}

/// Multinomial log-likelihood `sum_m c_m ln P_m` (constant term dropped).
///
/// An observed outcome with zero probability gives negative infinity.
pub fn log_likelihood(counts: &CountsHistogram, candidate: &PhysicalParams) -> Result<f64> {
    let config = counts.config();
    config.validate()?;
    let mut total = 0.0;
    for (o, &c) in counts.iter() {
        if c == 0 {
            continue;
        }
        let pm = config.probability_of(candidate, o)?;
        if pm <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += c as f64 * pm.ln();
    }
    Ok(total)
}

fn delay_range(config: &MeasurementConfig, sigma: f64) -> (f64, f64) {
    let upper = 5.0 / sigma + 2.0 * config.bin_width().unwrap_or(0.0);
    match config.protocol {
        Protocol::Hom => (0.0, upper),
        Protocol::NoHom => (-upper, upper),
    }
}

fn is_flat(values: &[f64]) -> bool {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return true;
    }
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    finite.len() == values.len() && hi - lo <= 1e-9 * hi.abs().max(1.0)
}

/// Delay estimate with visibility, bandwidth and loss fixed at `known`
/// (whose own delay is ignored).
///
/// Coarse grid with step `(1/sigma)/200`, then golden-section refinement to
/// `1e-6/sigma`.
pub fn mle_delta(counts: &CountsHistogram, known: &PhysicalParams) -> Result<EstimationResult> {
    let config = counts.config();
    if counts.n_trials() == 0 {
        return Err(Error::FlatLikelihood("delta (no trials)".into()));
    }
    let sigma = known.sigma();
    let (lo, hi) = delay_range(config, sigma);
    let step = 1.0 / sigma / 200.0;
    let ll = |d: f64| -> Result<f64> { log_likelihood(counts, &known.with(Parameter::Delta, d)?) };

    let n = ((hi - lo) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect();
    let values = grid.par_iter().map(|&d| ll(d)).collect::<Result<Vec<f64>>>()?;
    if is_flat(&values) {
        return Err(Error::FlatLikelihood("delta".into()));
    }
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let (a, b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    let (mut d, mut l) = (grid[best], values[best]);
    let (dr, lr) = golden_section_max(&ll, a, b, 1e-6 / sigma)?;
    if lr > l {
        d = dr;
        l = lr;
    }
    let at_search_edge = (d - hi).abs() < step || (config.protocol == Protocol::NoHom && (d - lo).abs() < step);
    if at_search_edge {
        log::warn!("delay estimate {d} sits at the edge of the search interval [{lo}, {hi}]");
    }
    let point = known.with(Parameter::Delta, d)?;
    finish(counts, &ParameterSet::single(Parameter::Delta), point, l, at_search_edge)
}

struct Box1 {
    param: Parameter,
    lo: f64,
    hi: f64,
    grid: Vec<f64>,
}

fn search_box(config: &MeasurementConfig, known: &PhysicalParams, ps: &ParameterSet) -> Vec<Box1> {
    let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
    };
    ps.as_slice()
        .iter()
        .map(|&param| match param {
            Parameter::Delta => {
                let (lo, hi) = delay_range(config, known.sigma());
                let n = if config.protocol == Protocol::NoHom { 48 } else { 24 };
                Box1 {
                    param,
                    lo,
                    hi,
                    grid: lin(lo, hi, n),
                }
            }
            Parameter::Alpha | Parameter::Gamma => Box1 {
                param,
                lo: DOMAIN_MARGIN,
                hi: 1.0 - DOMAIN_MARGIN,
                grid: lin(0.0, 1.0, 10),
            },
            Parameter::Sigma => {
                let s = known.sigma();
                Box1 {
                    param,
                    lo: 0.2 * s,
                    hi: 5.0 * s,
                    grid: (0..9).map(|i| s * 2f64.powf(i as f64 / 2.0 - 2.0)).collect(),
                }
            }
        })
        .collect()
}

/// Joint estimate of the parameters in `ps`, the rest fixed at `known`.
///
/// Nelder-Mead in box-normalised coordinates, restarted from the best points
/// of a coarse grid. Fails with [`Error::SingularInformation`] when the
/// expected information for `ps` at the optimum is rank deficient, which
/// means the data cannot separate the requested parameters.
pub fn mle_joint(counts: &CountsHistogram, ps: &ParameterSet, known: &PhysicalParams) -> Result<EstimationResult> {
    if counts.n_trials() == 0 {
        return Err(Error::FlatLikelihood(ps.to_string()));
    }
    let config = counts.config();
    let boxes = search_box(config, known, ps);
    let k = boxes.len();
    let hom = config.protocol == Protocol::Hom;

    let point = |u: &[f64]| -> Option<PhysicalParams> {
        let mut q = *known;
        for (b, &x) in boxes.iter().zip(u) {
            if !(0.0..=1.0).contains(&x) {
                return None;
            }
            let mut v = b.lo + x * (b.hi - b.lo);
            if b.param == Parameter::Delta && hom {
                v = v.abs();
            }
            q = q.with(b.param, v).ok()?;
        }
        Some(q)
    };
    let objective = |u: &[f64]| -> f64 {
        match point(u) {
            Some(q) => log_likelihood(counts, &q).map_or(f64::INFINITY, |l| -l),
            None => f64::INFINITY,
        }
    };

    // Coarse grid over the box.
    let mut starts: Vec<Vec<f64>> = vec![vec![]];
    for b in &boxes {
        let mut next = Vec::new();
        for s in &starts {
            for g in &b.grid {
                let mut v = s.clone();
                v.push((g - b.lo) / (b.hi - b.lo));
                next.push(v);
            }
        }
        starts = next;
    }
    let values: Vec<f64> = starts.par_iter().map(|u| objective(u)).collect();
    if is_flat(&values.iter().map(|v| -v).collect::<Vec<_>>()) {
        return Err(Error::FlatLikelihood(ps.to_string()));
    }
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let spacing: Vec<f64> = boxes.iter().map(|b| 1.0 / b.grid.len() as f64).collect();

    let runs: Vec<(Vec<f64>, f64)> = order
        .iter()
        .take(3)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&i| {
            let (mut x, mut f) = nelder_mead(&objective, &starts[i], &spacing);
            // One restart around the first answer guards against a collapsed
            // simplex.
            let small: Vec<f64> = spacing.iter().map(|s| 0.1 * s).collect();
            let (x2, f2) = nelder_mead(&objective, &x, &small);
            if f2 < f {
                x = x2;
                f = f2;
            }
            (x, f)
        })
        .collect();
    let (u, f) = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");
    let theta = point(&u).ok_or_else(|| Error::FlatLikelihood(ps.to_string()))?;
    if !f.is_finite() {
        return Err(Error::FlatLikelihood(ps.to_string()));
    }

    let expected = fim_numeric(config, &theta, ps)?;
    let analysis = expected.analysis();
    if analysis.singular {
        return Err(Error::SingularInformation {
            params: ps.to_string(),
            rank: analysis.rank,
        });
    }
    let at_search_edge = ps.index_of(Parameter::Delta).is_some_and(|i| {
        let x = u[i];
        x > 1.0 - 1e-6 || (!hom && x < 1e-6)
    }) || (0..k).any(|i| boxes[i].param != Parameter::Delta && (u[i] < 1e-9 || u[i] > 1.0 - 1e-9));
    finish(counts, ps, theta, -f, at_search_edge)
}

fn finish(
    counts: &CountsHistogram,
    ps: &ParameterSet,
    theta: PhysicalParams,
    log_likelihood: f64,
    at_search_edge: bool,
) -> Result<EstimationResult> {
    let observed_information = observed_information(counts, &theta, ps)?;
    let crb_variance = fim_numeric(counts.config(), &theta, ps)
        .ok()
        .and_then(|f| f.with_repetitions(counts.n_trials()).analysis().crb);
    Ok(EstimationResult {
        estimates: ps.as_slice().iter().map(|q| (*q, theta.get(*q))).collect(),
        params: theta,
        log_likelihood,
        observed_information,
        crb_variance,
        n_trials: counts.n_trials(),
        at_search_edge,
    })
}

fn curvature_step(q: Parameter, p: &PhysicalParams) -> f64 {
    let h = f64::EPSILON.powf(0.25) * p.get(q).abs().max(step_scale(q, p));
    match q {
        Parameter::Alpha | Parameter::Gamma => {
            let v = p.get(q);
            h.min(0.5 * v.min(1.0 - v))
        }
        Parameter::Sigma => h.min(0.5 * p.sigma()),
        Parameter::Delta => h,
    }
}

/// Negative Hessian of the log-likelihood by central second differences.
pub fn observed_information(counts: &CountsHistogram, theta: &PhysicalParams, ps: &ParameterSet) -> Result<FisherMatrix> {
    let params = ps.as_slice();
    let k = params.len();
    let h: Vec<f64> = params.iter().map(|q| curvature_step(*q, theta)).collect();
    let at = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut q = *theta;
        for &(i, s) in shifts {
            q = q.with(params[i], q.get(params[i]) + s)?;
        }
        log_likelihood(counts, &q)
    };
    let c = at(&[])?;
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = -(at(&[(i, h[i])])? - 2.0 * c + at(&[(i, -h[i])])?) / (h[i] * h[i]);
        for j in i + 1..k {
            let v = (at(&[(i, h[i]), (j, h[j])])? - at(&[(i, h[i]), (j, -h[j])])?
                - at(&[(i, -h[i]), (j, h[j])])?
                + at(&[(i, -h[i]), (j, -h[j])])?)
                / (4.0 * h[i] * h[j]);
            m[(i, j)] = -v;
            m[(j, i)] = -v;
        }
    }
    FisherMatrix::new(ps.clone(), m)
}

/// Minimise `f` from `x0` with an axis-aligned initial simplex of edge
/// lengths `scale`.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], scale: &[f64]) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        // Step inward if the outward vertex would leave the unit box.
        v[i] += if v[i] + scale[i] <= 1.0 { scale[i] } else { -scale[i] };
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    for _ in 0..4000 {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        fv = idx.iter().map(|&i| fv[i]).collect();

        let spread = (fv[n] - fv[0]).abs();
        let size = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-10 || (spread <= 1e-12 * fv[0].abs().max(1.0) && size < 1e-7) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < fv[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
            continue;
        }
        if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fv[n] {
            let x = along(0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = f(&x);
            (x, v)
        };
        if fc < fv[n].min(fr) {
            simplex[n] = xc;
            fv[n] = fc;
            continue;
        }
        for i in 1..=n {
            simplex[i] = simplex[i]
                .iter()
                .zip(&simplex[0])
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            fv[i] = f(&simplex[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).expect("non-empty");
    (simplex[best].clone(), fv[best])
}
