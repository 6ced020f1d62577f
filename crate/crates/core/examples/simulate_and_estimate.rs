//! Simulate counts, estimate the delay, and compare the spread of the
//! estimator with the Cramér-Rao bound.

use hom_metrology::estimate::mle_delta;
use hom_metrology::information::cfi_delta;
use hom_metrology::simulate::{sample_generative, RandomSeed};
use hom_metrology::{MeasurementConfig, Parameter, PhysicalParams};
use rayon::prelude::*;

fn main() -> hom_metrology::Result<()> {
    let truth = PhysicalParams::new(0.5, 0.9, 1.0, 0.4)?;
    let config = MeasurementConfig::nrtr_hom(1.0)?;
    let n = 20_000;
    let reps = 100;

    let estimates = (0..reps)
        .into_par_iter()
        .map(|r| {
            let counts = sample_generative(&truth, &config, n, RandomSeed::new(42, r))?;
            Ok(mle_delta(&counts, &truth)?.estimate(Parameter::Delta).unwrap())
        })
        .collect::<hom_metrology::Result<Vec<f64>>>()?;

    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let var = estimates.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let crb = 1.0 / (n as f64 * cfi_delta(&config, &truth)?);
    println!("true delta {:.4}, mean estimate {mean:.4}", truth.delta());
    println!("variance {var:.3e}, bound {crb:.3e}, ratio {:.3}", var / crb);
    Ok(())
}
