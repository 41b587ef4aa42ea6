//! Probe transmission after pump-off: dark relaxation and the faster decay
//! while the assisted light depolarizes the probed region.
//!
//! cargo run --release --example tp

use spinregen::protocol::{tp_experiment, Experiment};

fn main() -> spinregen::Result<()> {
    let exp = Experiment::reference(7)?;
    let dark = tp_experiment(false, &exp)?;
    let lit = tp_experiment(true, &exp)?;
    println!("  t_us    dark      assist");
    for i in (0..dark.times.len()).step_by(10) {
        println!(
            "{:6.1}  {:.5}  {:.5}",
            dark.times[i] * 1e6,
            dark.transmission[i],
            lit.transmission[i]
        );
    }
    println!(
        "dark fit: lifetime {:.2} us, rms residual {:.1e}",
        dark.fit.lifetime * 1e6,
        dark.fit.rms_residual
    );
    Ok(())
}
