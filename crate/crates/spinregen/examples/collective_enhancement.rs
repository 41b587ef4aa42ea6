//! Phase matching: the interference sum for matched and mismatched wave
//! vectors over a thermal cloud.
//!
//! cargo run --release --example collective_enhancement

use nalgebra::Vector3;
use spinregen::ensemble::{sample_ensemble, Beams, EnsembleConfig};
use spinregen::spinwave::{interference_sum, momentum_mismatch, WaveVectors};

fn main() -> spinregen::Result<()> {
    let cfg = EnsembleConfig::cesium_cell(10_000, 5);
    let beams = Beams::reference();
    let vectors = WaveVectors::new(&cfg.species, &beams)?;
    let positions: Vec<Vector3<f64>> = sample_ensemble(&cfg)?
        .atoms
        .iter()
        .map(|a| a.position)
        .collect();

    let q_hf = vectors.delta_k.norm();
    let raman = vectors.forward_raman();
    let q_noise = vectors.mismatch_vector(&raman);
    for (name, q) in [
        ("matched", Vector3::zeros()),
        ("|q| = w_hf/c", Vector3::z() * q_hf),
        ("forward Raman", q_noise),
    ] {
        let s = interference_sum(&positions, &q)?;
        println!(
            "{name:14} |q| = {:10.3e} rad/m  N|S|^2 = {:.4}",
            q.norm(),
            positions.len() as f64 * s.norm_sqr()
        );
    }
    println!(
        "forward Raman mismatch {:.4e} rad/m",
        momentum_mismatch(&vectors, &raman)
    );
    Ok(())
}
