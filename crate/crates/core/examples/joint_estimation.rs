//! Joint delay and visibility estimation. Time resolution makes the pair
//! identifiable; plain bucket detectors cannot separate them.

use hom_metrology::estimate::mle_joint;
use hom_metrology::information::ParameterSet;
use hom_metrology::simulate::{sample_outcomes, RandomSeed};
use hom_metrology::{Error, MeasurementConfig, Parameter, PhysicalParams};

fn main() -> hom_metrology::Result<()> {
    let truth = PhysicalParams::new(0.2, 0.9, 1.0, 0.4)?;
    let ps = ParameterSet::new(vec![Parameter::Delta, Parameter::Alpha])?;
    let start = truth.with(Parameter::Alpha, 0.5)?;

    let counts = sample_outcomes(&truth, &MeasurementConfig::nrtr_hom(1.0)?, 1_000_000, RandomSeed::new(1, 0))?;
    let r = mle_joint(&counts, &ps, &start)?;
    for (p, v) in &r.estimates {
        println!("{p:>6} = {v:.5} +- {:.5}", r.crb(*p).unwrap_or(f64::NAN).sqrt());
    }

    let counts = sample_outcomes(&truth, &MeasurementConfig::hom(), 1_000_000, RandomSeed::new(1, 0))?;
    match mle_joint(&counts, &ps, &start) {
        Err(e @ Error::SingularInformation { .. }) => println!("bucket detectors: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
