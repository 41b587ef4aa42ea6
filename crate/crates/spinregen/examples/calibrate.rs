//! Fits the gain rate so the assisted first read retrieves 98% of the input.
//!
//! cargo run --release --example calibrate

use spinregen::protocol::{calibrate_experiment, Experiment};

fn main() -> spinregen::Result<()> {
    let exp = Experiment::reference(7)?;
    let cal = calibrate_experiment(&exp, 0.98, 0.002)?;
    for (kappa, eff) in &cal.curve {
        println!("kappa {kappa:11.4e} /s  S_out(A) {eff:.4}");
    }
    println!("kappa* = {:.4e} /s gives {:.4}", cal.kappa, cal.achieved);
    Ok(())
}
