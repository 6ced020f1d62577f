//! Seedable Monte Carlo of detection outcomes.
//!
//! Two independent samplers are provided. [`sample_outcomes`] inverts the
//! cumulative outcome distribution. [`sample_generative`] follows the
//! physical sequence instead: bunch or coincide, draw the arrival-time
//! difference, lose photons, then place the detections in time bins.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::binned::{MeasurementConfig, Outcome, Protocol, Support};
use crate::error::{Error, Result};
use crate::model::{total_rates, PhysicalParams};

/// Consecutive rejections after which the generative sampler gives up.
pub const REJECTION_GUARD: usize = 1_000_000;

/// Seed plus stream selector for a ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RandomSeed {
    pub seed: u64,
    #[serde(default)]
    pub stream_id: u64,
}

impl RandomSeed {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Same seed, different stream.
    pub fn stream(&self, stream_id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id,
        }
    }
}

/// Outcome counts from `n_trials` photon pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsHistogram {
    counts: BTreeMap<Outcome, u64>,
    n_trials: u64,
    config: MeasurementConfig,
    seeds: BTreeSet<RandomSeed>,
}

impl CountsHistogram {
    pub fn new(config: MeasurementConfig) -> Self {
        Self {
            counts: BTreeMap::new(),
            n_trials: 0,
            config,
            seeds: BTreeSet::new(),
        }
    }

    /// Build from explicit counts, checking each outcome can occur under
    /// `config`.
    pub fn from_counts(
        config: MeasurementConfig,
        counts: impl IntoIterator<Item = (Outcome, u64)>,
    ) -> Result<Self> {
        config.validate()?;
        let mut h = Self::new(config);
        let probe = PhysicalParams::new(0.0, 0.5, 1.0, 0.5)?;
        for (o, c) in counts {
            if o == Outcome::Overflow {
                return Err(Error::IncompatibleCounts(
                    "overflow is not an observable outcome".into(),
                ));
            }
            config.probability_of(&probe, &o)?;
            h.add(o, c);
        }
        Ok(h)
    }

    pub fn add(&mut self, outcome: Outcome, count: u64) {
        if count > 0 {
            *self.counts.entry(outcome).or_insert(0) += count;
            self.n_trials += count;
        }
    }

    pub fn count(&self, outcome: &Outcome) -> u64 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<Outcome, u64> {
        &self.counts
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Outcome, &u64)> {
        self.counts.iter()
    }

    pub fn n_trials(&self) -> u64 {
        self.n_trials
    }

    pub fn config(&self) -> &MeasurementConfig {
        &self.config
    }

    /// Seeds of every run merged into this histogram.
    pub fn seeds(&self) -> &BTreeSet<RandomSeed> {
        &self.seeds
    }

    pub fn with_seed(mut self, seed: RandomSeed) -> Self {
        self.seeds.insert(seed);
        self
    }

    /// Add another histogram of the same configuration.
    pub fn merge(&mut self, other: &CountsHistogram) -> Result<()> {
        if other.config != self.config {
            return Err(Error::IncompatibleCounts(format!(
                "cannot merge {} counts into {} counts",
                other.config.label(),
                self.config.label()
            )));
        }
        for (o, c) in &other.counts {
            self.add(*o, *c);
        }
        self.seeds.extend(other.seeds.iter().copied());
        Ok(())
    }

    /// Every count multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        let mut out = Self::new(self.config);
        for (o, c) in &self.counts {
            out.add(*o, c * k);
        }
        out.seeds = self.seeds.clone();
        out
    }

    /// Counts aligned with `support.outcomes()`; anything outside the
    /// enumerated range lands in the overflow slot.
    pub fn folded(&self, support: &Support) -> Vec<u64> {
        let outcomes = support.outcomes();
        let index: BTreeMap<Outcome, usize> =
            outcomes.iter().enumerate().map(|(i, o)| (*o, i)).collect();
        let overflow = index.get(&Outcome::Overflow).copied();
        let mut out = vec![0; outcomes.len()];
        for (o, c) in &self.counts {
            match index.get(o).copied().or(overflow) {
                Some(i) => out[i] += c,
                None => log::warn!("outcome {o} has no slot in the support"),
            }
        }
        out
    }
}

fn check_trials(n_trials: u64) -> Result<()> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    Ok(())
}

/// Categorical sampling from the outcome distribution by inversion of its
/// cumulative sum.
pub fn sample_outcomes(
    p: &PhysicalParams,
    config: &MeasurementConfig,
    n_trials: u64,
    seed: RandomSeed,
) -> Result<CountsHistogram> {
    check_trials(n_trials)?;
    let dist = config.outcome_distribution(p)?;
    let outcomes: Vec<Outcome> = dist.iter().map(|(o, _)| *o).collect();
    let mut cdf = Vec::with_capacity(outcomes.len());
    let mut acc = 0.0;
    for (_, v) in dist.iter() {
        acc += v.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    let support = config.support(p)?;
    let mut rng = seed.rng();
    let mut tally = vec![0u64; outcomes.len()];
    let mut hist = CountsHistogram::new(*config);
    for _ in 0..n_trials {
        let u = rng.random::<f64>() * total;
        let i = cdf.partition_point(|c| *c <= u).min(outcomes.len() - 1);
        if outcomes[i] == Outcome::Overflow {
            let o = resolve_overflow(p, config, &support, &mut rng)?;
            hist.add(o, 1);
        } else {
            tally[i] += 1;
        }
    }
    for (o, c) in outcomes.into_iter().zip(tally) {
        hist.add(o, c);
    }
    Ok(hist.with_seed(seed))
}

/// Draw a concrete bin from beyond the enumerated range, walking outward
/// until the drawn share of the tail is used up.
fn resolve_overflow(
    p: &PhysicalParams,
    config: &MeasurementConfig,
    support: &Support,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome> {
    let mut candidates: Box<dyn Iterator<Item = Outcome>> = if let Some(m) = support.max_separation() {
        let nr = config.detector.number_resolving;
        Box::new((m + 1..).flat_map(move |n| {
            let mut v = vec![Outcome::CoincidenceSep(n)];
            if nr {
                v.push(Outcome::BunchSep(n));
            }
            v
        }))
    } else if let Some((lo, hi)) = support.nohom_range() {
        Box::new((1..).flat_map(move |k| [Outcome::NoHomSep(hi + k), Outcome::NoHomSep(lo - k)]))
    } else {
        return Err(Error::Config("overflow drawn for an untimed configuration".into()));
    };
    let probs = support.probabilities(p);
    let tail = *probs.last().expect("overflow slot");
    let mut u = rng.random::<f64>() * tail;
    let mut last = None;
    // The tail is at most a tolerance's worth of mass; a few thousand bins
    // always exhaust it.
    for _ in 0..100_000 {
        let o = candidates.next().expect("infinite");
        let v = config.probability_of(p, &o)?;
        last = Some(o);
        if u < v {
            return Ok(o);
        }
        u -= v;
    }
    Ok(last.expect("at least one candidate"))
}

/// Rejection-step bookkeeping of [`sample_generative_diagnosed`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub proposals: u64,
    pub accepted: u64,
}

impl SamplerDiagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Physically ordered sampler. See [`sample_generative_diagnosed`].
pub fn sample_generative(
    p: &PhysicalParams,
    config: &MeasurementConfig,
    n_trials: u64,
    seed: RandomSeed,
) -> Result<CountsHistogram> {
    Ok(sample_generative_diagnosed(p, config, n_trials, seed)?.0)
}

/// Physically ordered sampler with rejection statistics.
///
/// HOM pairs first bunch with probability `P_b`. The arrival-time difference
/// is then drawn by rejection from the equal mixture of normals at `+delta`
/// and `-delta`: the bunching density never exceeds this proposal `g`, and
/// the coincidence density never exceeds `g / 2`, so both accept with a
/// ratio at most one. Each photon is lost with probability `gamma`. The first
/// detection sits uniformly inside its bin, which makes the bin difference
/// follow the triangular law.
pub fn sample_generative_diagnosed(
    p: &PhysicalParams,
    config: &MeasurementConfig,
    n_trials: u64,
    seed: RandomSeed,
) -> Result<(CountsHistogram, SamplerDiagnostics)> {
    check_trials(n_trials)?;
    config.validate()?;
    let s = p.temporal_width();
    let d = p.delta();
    let g = p.gamma();
    let (_, pb_tot) = total_rates(p);
    let normal = Normal::new(0.0, s).map_err(|e| Error::Config(e.to_string()))?;
    let width = config.bin_width();
    let nr = config.detector.number_resolving;
    let mut rng = seed.rng();
    let mut diag = SamplerDiagnostics::default();
    let mut hist = CountsHistogram::new(*config);

    // x N(0) / g reduces to alpha / cosh(tau delta / s^2).
    let alpha = p.alpha();
    let cross = |tau: f64| alpha / (tau * d / (s * s)).cosh();

    for _ in 0..n_trials {
        let outcome = match config.protocol {
            Protocol::NoHom => {
                let tau = d + normal.sample(&mut rng);
                let (a, b) = (rng.random::<f64>() >= g, rng.random::<f64>() >= g);
                match (a, b, width) {
                    (true, true, Some(w)) => Outcome::NoHomSep(bin_difference(tau, w, &mut rng)),
                    (true, true, None) => Outcome::TwoClicksNoTiming { bunched: false },
                    (false, false, _) => Outcome::ZeroClicks,
                    _ => Outcome::OneClick,
                }
            }
            Protocol::Hom => {
                let bunched = rng.random::<f64>() < pb_tot;
                let mut rejections = 0;
                let tau = loop {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let tau = sign * d + normal.sample(&mut rng);
                    diag.proposals += 1;
                    // Bunching: P_b / g = (1 + x N0/g) / 2.
                    // Coincidence: P_c / (g/2) = 1 - x N0/g.
                    let r = cross(tau);
                    let accept = if bunched { 0.5 * (1.0 + r) } else { 1.0 - r };
                    if rng.random::<f64>() < accept {
                        diag.accepted += 1;
                        break tau;
                    }
                    rejections += 1;
                    if rejections >= REJECTION_GUARD {
                        return Err(Error::RejectionGuard(REJECTION_GUARD));
                    }
                };
                let (a, b) = (rng.random::<f64>() >= g, rng.random::<f64>() >= g);
                match (a && b, a || b) {
                    (true, _) => match (bunched, nr, width) {
                        (true, false, _) => Outcome::OneClick,
                        (true, true, Some(w)) => {
                            Outcome::BunchSep(bin_difference(tau, w, &mut rng).unsigned_abs() as u32)
                        }
                        (true, true, None) => Outcome::TwoClicksNoTiming { bunched: true },
                        (false, _, Some(w)) => {
                            Outcome::CoincidenceSep(bin_difference(tau, w, &mut rng).unsigned_abs() as u32)
                        }
                        (false, _, None) => Outcome::TwoClicksNoTiming { bunched: false },
                    },
                    (false, true) => Outcome::OneClick,
                    (false, false) => Outcome::ZeroClicks,
                }
            }
        };
        hist.add(outcome, 1);
    }
    Ok((hist.with_seed(seed), diag))
}

/// Bin index difference of two detections `tau` apart when the first lands
/// uniformly inside its bin.
fn bin_difference(tau: f64, w: f64, rng: &mut ChaCha8Rng) -> i64 {
    let u = rng.random::<f64>() * w;
    ((u + tau) / w).floor() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(d: f64, a: f64, s: f64, g: f64) -> PhysicalParams {
        PhysicalParams::new(d, a, s, g).unwrap()
    }

    #[test]
    fn full_loss_gives_only_zero_clicks() {
        let c = MeasurementConfig::nrtr_hom(1.0).unwrap();
        let p = pp(0.5, 0.9, 1.0, 1.0);
        for h in [
            sample_outcomes(&p, &c, 1000, RandomSeed::new(1, 0)).unwrap(),
            sample_generative(&p, &c, 1000, RandomSeed::new(1, 0)).unwrap(),
        ] {
            assert_eq!(h.count(&Outcome::ZeroClicks), 1000);
            assert_eq!(h.counts().len(), 1);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let c = MeasurementConfig::tr_hom(0.5).unwrap();
        let p = pp(0.3, 0.8, 1.0, 0.2);
        let a = sample_generative(&p, &c, 5000, RandomSeed::new(9, 3)).unwrap();
        let b = sample_generative(&p, &c, 5000, RandomSeed::new(9, 3)).unwrap();
        let other = sample_generative(&p, &c, 5000, RandomSeed::new(9, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.counts(), other.counts());
    }

    #[test]
    fn perfect_dip_never_coincides() {
        let c = MeasurementConfig::nrtr_hom(0.3).unwrap();
        let p = pp(0.0, 1.0, 1.0, 0.0);
        let h = sample_generative(&p, &c, 20_000, RandomSeed::new(2, 0)).unwrap();
        assert!(h.iter().all(|(o, _)| !matches!(o, Outcome::CoincidenceSep(_))));
    }

    #[test]
    fn acceptance_rate_is_two_thirds() {
        let c = MeasurementConfig::nrtr_hom(1.0).unwrap();
        let p = pp(0.2, 0.9, 1.0, 0.4);
        let (_, d) = sample_generative_diagnosed(&p, &c, 200_000, RandomSeed::new(5, 0)).unwrap();
        assert!((d.acceptance_rate() - 2.0 / 3.0).abs() < 0.01, "{}", d.acceptance_rate());
    }

    #[test]
    fn merge_adds_counts_and_seeds() {
        let c = MeasurementConfig::hom();
        let p = pp(0.2, 0.9, 1.0, 0.4);
        let mut a = sample_outcomes(&p, &c, 100, RandomSeed::new(1, 0)).unwrap();
        let b = sample_outcomes(&p, &c, 50, RandomSeed::new(1, 1)).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.n_trials(), 150);
        assert_eq!(a.seeds().len(), 2);
        let other = CountsHistogram::new(MeasurementConfig::nr_hom());
        assert!(a.merge(&other).is_err());
    }

    #[test]
    fn from_counts_rejects_foreign_outcomes() {
        let c = MeasurementConfig::hom();
        assert!(CountsHistogram::from_counts(c, [(Outcome::CoincidenceSep(0), 3)]).is_err());
        assert!(CountsHistogram::from_counts(c, [(Outcome::OneClick, 3)]).is_ok());
    }
}
