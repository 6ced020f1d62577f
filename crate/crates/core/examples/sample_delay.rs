//! Two-stage measurement of a sample's delay: once with the sample, once
//! without, at the same reference delay.

use hom_metrology::estimate::mle_delta;
use hom_metrology::simulate::{sample_outcomes, RandomSeed};
use hom_metrology::{MeasurementConfig, Parameter, PhysicalParams};

fn main() -> hom_metrology::Result<()> {
    let (sample, reference) = (0.35, 0.1);
    let config = MeasurementConfig::no_hom(0.5)?;
    let with = PhysicalParams::new(sample - reference, 0.9, 1.0, 0.4)?;
    let without = with.with(Parameter::Delta, -reference)?;

    let a = mle_delta(&sample_outcomes(&with, &config, 200_000, RandomSeed::new(5, 0))?, &with)?;
    let b = mle_delta(&sample_outcomes(&without, &config, 200_000, RandomSeed::new(5, 1))?, &without)?;
    let da = a.estimate(Parameter::Delta).unwrap();
    let db = b.estimate(Parameter::Delta).unwrap();
    let sd = (a.crb(Parameter::Delta).unwrap() + b.crb(Parameter::Delta).unwrap()).sqrt();
    println!("sample delay {:.5} +- {sd:.5} (true {sample})", da - db);
    Ok(())
}
