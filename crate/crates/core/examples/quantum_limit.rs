//! Approach to the quantum limit as the time bins shrink.

use hom_metrology::information::{cfi_delta, qfi, qfi_two_photon};
use hom_metrology::model::nohom_density;
use hom_metrology::verify::{score_integral_cfi, QuadratureSpec};
use hom_metrology::{MeasurementConfig, PhysicalParams};

fn main() -> hom_metrology::Result<()> {
    let p = PhysicalParams::new(0.0, 1.0, 1.0, 0.0)?;
    println!("QFI = {}, two-photon QFI at gamma 0.4 = {}", qfi(1.0), qfi_two_photon(1.0, 0.4));
    for t in [2.0, 1.0, 0.5, 0.1, 0.01] {
        let f = cfi_delta(&MeasurementConfig::nrtr_hom(t)?, &p)?;
        println!("NRTR-HOM, T = {t:<5} F_delta = {f:.6}");
    }
    let cont = score_integral_cfi(nohom_density, &p, &QuadratureSpec::default())?;
    println!("continuous arrival times, no beamsplitter: {cont:.9}");
    Ok(())
}
