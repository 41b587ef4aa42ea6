//! Samples the reference vapor and follows it for a few microseconds.
//!
//! cargo run --release --example thermal_ensemble

use spinregen::ensemble::{advance_ballistic, mean_thermal_speed, sample_ensemble, EnsembleConfig};

fn main() -> spinregen::Result<()> {
    let mut cfg = EnsembleConfig::cesium_cell(50_000, 11);
    cfg.sampling_radius = 1.5e-3;
    let mut ens = sample_ensemble(&cfg)?;

    let n = ens.len() as f64;
    let mean_speed = ens.atoms.iter().map(|a| a.velocity.norm()).sum::<f64>() / n;
    let vz_rms = (ens.atoms.iter().map(|a| a.velocity.z.powi(2)).sum::<f64>() / n).sqrt();
    println!("sigma_v      {:8.2} m/s", cfg.velocity_sigma());
    println!("rms v_z      {:8.2} m/s", vz_rms);
    println!(
        "mean speed   {:8.2} m/s (Maxwell {:.2})",
        mean_speed,
        mean_thermal_speed(&cfg.species, cfg.temperature)?
    );

    let dt = 5e-9;
    let mut replaced = 0;
    for _ in 0..1000 {
        replaced += advance_ballistic(&mut ens, dt)?.replaced.len();
    }
    println!(
        "after 5 us: {} atoms, {} re-injected at the walls of the {:.1} mm core",
        ens.len(),
        replaced,
        cfg.region_radius() * 1e3
    );
    Ok(())
}
