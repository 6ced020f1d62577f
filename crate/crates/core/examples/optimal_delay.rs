//! Best operating delay and delay information for every protocol.

use hom_metrology::information::{optimal_delta, relative_information};
use hom_metrology::{MeasurementConfig, PhysicalParams};

fn main() -> hom_metrology::Result<()> {
    let p = PhysicalParams::new(0.0, 0.9, 1.0, 0.4)?;
    let t = 1.0;
    let configs = [
        MeasurementConfig::hom(),
        MeasurementConfig::nr_hom(),
        MeasurementConfig::tr_hom(t)?,
        MeasurementConfig::nrtr_hom(t)?,
        MeasurementConfig::no_hom(t)?,
    ];
    println!("{:>9} {:>10} {:>10} {:>8}", "protocol", "delta*", "F_delta", "I_rel");
    for c in &configs {
        let best = optimal_delta(c, &p)?;
        let rel = relative_information(best.information, p.sigma(), p.gamma());
        println!("{:>9} {:>10.5} {:>10.5} {:>8.4}", c.label(), best.delta, best.information, rel);
    }
    Ok(())
}
