//! Randomised invariants of the outcome distributions and delay information.

use hom_metrology::information::{cfi_delta, optimal_delta, qfi, qfi_two_photon, relative_information};
use hom_metrology::{MeasurementConfig, Outcome, PhysicalParams};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = (PhysicalParams, f64)> {
    (0.3f64..3.0, -2.0f64..2.0, 0.0f64..=1.0, 0.0f64..0.95, 0.2f64..3.0).prop_map(|(s, d, a, g, t)| {
        (PhysicalParams::new(d / s, a, s, g).unwrap(), t / s)
    })
}

fn all_configs(w: f64) -> Vec<MeasurementConfig> {
    vec![
        MeasurementConfig::hom(),
        MeasurementConfig::nr_hom(),
        MeasurementConfig::tr_hom(w).unwrap(),
        MeasurementConfig::nrtr_hom(w).unwrap(),
        MeasurementConfig::no_hom(w).unwrap(),
    ]
}

fn slack(p: &PhysicalParams) -> f64 {
    1e-4 * qfi(p.sigma())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_are_complete_and_nonnegative((p, w) in params()) {
        for c in all_configs(w) {
            let d = c.outcome_distribution(&p).unwrap();
            prop_assert!((d.total() - 1.0).abs() < 1e-12, "{} total {}", c.label(), d.total());
            prop_assert!(d.iter().all(|(_, q)| *q >= 0.0 && q.is_finite()));
        }
    }

    #[test]
    fn loss_outcomes_are_exact((p, w) in params()) {
        let g = p.gamma();
        for c in all_configs(w) {
            let d = c.outcome_distribution(&p).unwrap();
            prop_assert!((d.probability(&Outcome::ZeroClicks) - g * g).abs() < 1e-15);
            if c.detector.number_resolving || c.protocol == hom_metrology::Protocol::NoHom {
                prop_assert!((d.probability(&Outcome::OneClick) - 2.0 * g * (1.0 - g)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bucket_one_click_absorbs_bunches((p, _w) in params()) {
        let bucket = MeasurementConfig::hom().outcome_distribution(&p).unwrap();
        let nr = MeasurementConfig::nr_hom().outcome_distribution(&p).unwrap();
        let lhs = bucket.probability(&Outcome::OneClick);
        let rhs = nr.probability(&Outcome::OneClick)
            + nr.probability(&Outcome::TwoClicksNoTiming { bunched: true });
        prop_assert!((lhs - rhs).abs() < 1e-14, "{lhs} vs {rhs}");
    }

    #[test]
    fn hom_distribution_is_even_in_delta((p, w) in params()) {
        let m = p.with(hom_metrology::Parameter::Delta, -p.delta()).unwrap();
        for c in all_configs(w).into_iter().take(4) {
            let a = c.outcome_distribution(&p).unwrap();
            let b = c.outcome_distribution(&m).unwrap();
            for (o, q) in a.iter() {
                prop_assert!((q - b.probability(o)).abs() < 1e-14, "{} {o:?}", c.label());
            }
        }
        let c = MeasurementConfig::no_hom(w).unwrap();
        let a = c.outcome_distribution(&p).unwrap();
        let b = c.outcome_distribution(&m).unwrap();
        for (o, q) in a.iter() {
            if let Outcome::NoHomSep(n) = o {
                prop_assert!((q - b.probability(&Outcome::NoHomSep(-n))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn information_is_even_bounded_and_ordered((p, w) in params()) {
        let m = p.with(hom_metrology::Parameter::Delta, -p.delta()).unwrap();
        let tol = slack(&p);
        let bound = qfi_two_photon(p.sigma(), p.gamma());
        let mut f = Vec::new();
        for c in all_configs(w) {
            let a = cfi_delta(&c, &p).unwrap();
            let b = cfi_delta(&c, &m).unwrap();
            prop_assert!((a - b).abs() <= tol, "{} even: {a} vs {b}", c.label());
            prop_assert!(a >= -tol && a <= bound * (1.0 + 1e-4) + tol, "{} bound: {a} > {bound}", c.label());
            f.push(a);
        }
        prop_assert!(bound <= qfi(p.sigma()));
        let [hom, nr, tr, nrtr, nohom] = f[..] else { unreachable!() };
        prop_assert!(nrtr + tol >= tr, "NRTR {nrtr} < TR {tr}");
        prop_assert!(nrtr + tol >= nr, "NRTR {nrtr} < NR {nr}");
        prop_assert!(nr + tol >= hom, "NR {nr} < HOM {hom}");
        let _ = nohom;
    }

    #[test]
    fn information_scales_with_bandwidth((p, w) in params(), k in 0.25f64..4.0) {
        let q = p.rescaled(k).unwrap();
        for (c, ck) in all_configs(w).into_iter().zip(all_configs(w / k)) {
            let a = cfi_delta(&c, &p).unwrap();
            let b = cfi_delta(&ck, &q).unwrap();
            prop_assert!((b - k * k * a).abs() <= 1e-4 * k * k * a.abs() + slack(&q), "{}: {b} vs {}", c.label(), k * k * a);
            let ra = relative_information(a, p.sigma(), p.gamma());
            let rb = relative_information(b, q.sigma(), q.gamma());
            prop_assert!((ra - rb).abs() <= 1e-4 * ra.abs() + 1e-4);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // No-HOM keeps first-order delay information at delta = 0 where every
    // HOM protocol has none, so that ordering is between optimised delays.
    #[test]
    fn optimised_nrtr_beats_optimised_nohom((p, w) in params()) {
        let tol = slack(&p);
        let a = optimal_delta(&MeasurementConfig::nrtr_hom(w).unwrap(), &p).unwrap().information;
        let b = optimal_delta(&MeasurementConfig::no_hom(w).unwrap(), &p).unwrap().information;
        prop_assert!(a + tol >= b, "NRTR {a} < no-HOM {b}");
    }
}

#[test]
fn wide_bins_collapse_to_untimed_distribution() {
    let p = PhysicalParams::new(0.4, 0.9, 1.0, 0.3).unwrap();
    let tr = MeasurementConfig::nrtr_hom(60.0).unwrap().outcome_distribution(&p).unwrap();
    let untimed = MeasurementConfig::nr_hom().outcome_distribution(&p).unwrap();
    let pairs = [
        (Outcome::CoincidenceSep(0), Outcome::TwoClicksNoTiming { bunched: false }),
        (Outcome::BunchSep(0), Outcome::TwoClicksNoTiming { bunched: true }),
    ];
    for (timed, plain) in pairs {
        let a = tr.probability(&timed);
        let b = untimed.probability(&plain);
        // Triangular weight leaves 1 - |tau|/T in bin 0.
        assert!((a - b).abs() < 0.02 * b, "{timed:?}: {a} vs {b}");
    }
}
