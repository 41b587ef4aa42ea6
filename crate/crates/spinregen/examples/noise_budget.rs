//! Noise at the memory output: the measured-count deconvolution and the
//! simulated noise of a read with assisted light but no stored signal.
//!
//! cargo run --release --example noise_budget

use spinregen::protocol::{fig2_sequence, run_sequence, Experiment, Fig2Condition};
use spinregen::regeneration::noise_budget;

fn main() -> spinregen::Result<()> {
    let exp = Experiment::reference(7)?;
    let eta = exp.memory.detection_efficiency;
    println!(
        "0.012 raw counts at eta = {eta}: {:.3} intrinsic photons",
        noise_budget(0.012, eta)?
    );

    let r = run_sequence(&fig2_sequence(&exp, Fig2Condition::AssistNoSignal), &exp)?;
    for read in &r.reads {
        println!(
            "read at {:6.0} ns: efficiency {:.2e}, noise {:.3} photons ({:.2e} of input)",
            read.time * 1e9,
            read.efficiency,
            read.noise_photons,
            read.noise_photons / r.input_photons
        );
    }
    Ok(())
}
