//! Stores a spin wave in the moving gas and watches the retrieval efficiency
//! fall as atoms leave the beam and move along the spin-wave vector.
//!
//! cargo run --release --example spinwave_dephasing

use spinregen::ensemble::{advance_ballistic, sample_ensemble, Beams, EnsembleConfig};
use spinregen::spinwave::{imprint_write, retrieval_efficiency, spinwave_wavelength, WaveVectors};

fn main() -> spinregen::Result<()> {
    let mut cfg = EnsembleConfig::cesium_cell(100_000, 3);
    cfg.sampling_radius = 1.5e-3;
    let beams = Beams::reference();
    let vectors = WaveVectors::new(&cfg.species, &beams)?;
    println!(
        "spin-wave wavelength {:.2} mm",
        spinwave_wavelength(&cfg.species)? * 1e3
    );

    let mut ens = sample_ensemble(&cfg)?;
    let (state, leaked) = imprint_write(&mut ens.atoms, &vectors, &beams.signal, 0.9, 3e-3)?;
    println!("leaked {leaked:.2}");

    let dt = 5e-9;
    println!("  t_us  retrieval");
    for k in 0..=600 {
        if k % 50 == 0 {
            let re = retrieval_efficiency(&ens.atoms, &vectors, &beams.signal, &state);
            println!("{:6.2}  {re:.4}", k as f64 * dt * 1e6);
        }
        advance_ballistic(&mut ens, dt)?;
    }
    Ok(())
}
