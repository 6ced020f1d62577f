//! Numeric Fisher matrices against the closed forms, and the rank deficiency
//! that appears without time resolution.

use hom_metrology::information::{closed_form_fim_nr, fim_numeric, ParameterSet};
use hom_metrology::{MeasurementConfig, PhysicalParams};

fn main() -> hom_metrology::Result<()> {
    let p = PhysicalParams::new(0.7, 0.9, 1.0, 0.4)?;
    let all = ParameterSet::all();

    let numeric = fim_numeric(&MeasurementConfig::nr_hom(), &p, &all)?;
    let closed = closed_form_fim_nr(&p)?;
    println!("NR-HOM numeric:\n{}", numeric.matrix());
    println!("max |numeric - closed form| = {:.2e}", (numeric.matrix() - closed.matrix()).amax());

    for config in [MeasurementConfig::nr_hom(), MeasurementConfig::nrtr_hom(1.0)?] {
        let a = fim_numeric(&config, &p, &all)?.analysis();
        let eig: Vec<String> = a.eigenvalues.iter().map(|e| format!("{e:.3e}")).collect();
        println!("{:>9}: rank {} eigenvalues [{}]", config.label(), a.rank, eig.join(", "));
    }
    Ok(())
}
