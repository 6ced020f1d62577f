//! Relative information as the delay is swept; HOM curves are symmetric with
//! two peaks, the no-beamsplitter curve oscillates with the bin period.

use hom_metrology::information::{cfi_delta, relative_information};
use hom_metrology::{MeasurementConfig, Parameter, PhysicalParams};

fn main() -> hom_metrology::Result<()> {
    let base = PhysicalParams::new(0.0, 0.9, 1.0, 0.4)?;
    let t = 2.0;
    let configs = [
        MeasurementConfig::hom(),
        MeasurementConfig::tr_hom(t)?,
        MeasurementConfig::nrtr_hom(t)?,
        MeasurementConfig::no_hom(t)?,
    ];
    print!("{:>7}", "delta");
    for c in &configs {
        print!(" {:>9}", c.label());
    }
    println!();
    for i in -20..=20 {
        let d = i as f64 * 0.15;
        let p = base.with(Parameter::Delta, d)?;
        print!("{d:>7.2}");
        for c in &configs {
            print!(" {:>9.4}", relative_information(cfi_delta(c, &p)?, p.sigma(), p.gamma()));
        }
        println!();
    }
    Ok(())
}
