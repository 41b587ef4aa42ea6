//! Pulse-train experiment: storage with and without assisted light and the
//! noise-only run, as an efficiency table.
//!
//! cargo run --release --example fig2

use spinregen::protocol::{fig2_experiment, Experiment};

fn main() -> spinregen::Result<()> {
    let exp = Experiment::reference(7)?;
    let r = fig2_experiment(&exp)?;
    println!("{:16} {:>10} {:>10}", "", "of input", "of stored");
    for (name, input, stored) in r.table.rows() {
        println!("{name:16} {input:10.4} {stored:10.4}");
    }
    println!(
        "noise with assisted light only: {:.3} photons",
        r.table.noise_photons_a_no_sin
    );
    println!(
        "pulse-shape residual: {:.4} (noA) {:.4} (A)",
        r.table.shape_residual_no_a, r.table.shape_residual_a
    );
    Ok(())
}
