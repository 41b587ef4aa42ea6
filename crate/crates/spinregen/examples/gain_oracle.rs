//! Two-mode gain: closed-form moments against brute-force number-state
//! evolution.
//!
//! cargo run --release --example gain_oracle

use spinregen::regeneration::{
    excitation_variance, mean_excitation, oracle_grid_check, oracle_heuristic_cutoff,
    two_mode_gain_oracle,
};
use spinregen::Error;

fn main() -> spinregen::Result<()> {
    println!("n0  kt    mean      oracle     variance   oracle");
    for n0 in [0usize, 1, 3] {
        for kt in [0.5, 1.0, 2.0] {
            let mut cutoff = oracle_heuristic_cutoff(n0, kt);
            let o = loop {
                match two_mode_gain_oracle(n0, kt, cutoff) {
                    Err(Error::Truncation { .. }) => cutoff *= 2,
                    r => break r?,
                }
            };
            println!(
                "{n0}   {kt:.2}  {:9.5}  {:9.5}  {:9.5}  {:9.5}",
                mean_excitation(n0 as f64, kt, 1.0)?,
                o.mean,
                excitation_variance(n0 as f64, kt, 1.0)?,
                o.variance
            );
        }
    }
    let grid = oracle_grid_check()?;
    println!(
        "grid of {} points: max |closed form - oracle| = {:.2e}",
        grid.points.len(),
        grid.max_error()
    );
    Ok(())
}
