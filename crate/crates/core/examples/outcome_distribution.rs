//! Print the outcome distribution of a number- and time-resolving HOM setup.

use hom_metrology::{MeasurementConfig, PhysicalParams};

fn main() -> hom_metrology::Result<()> {
    let p = PhysicalParams::new(0.5, 0.9, 1.0, 0.4)?;
    let config = MeasurementConfig::nrtr_hom(0.5)?;
    let dist = config.outcome_distribution(&p)?;

    println!("{} at delta = {}, alpha = {}, gamma = {}", config.label(), p.delta(), p.alpha(), p.gamma());
    for (outcome, prob) in dist.iter() {
        println!("{:>16}  {prob:.6e}", outcome.to_string());
    }
    println!("total = {:.15}", dist.total());
    Ok(())
}
