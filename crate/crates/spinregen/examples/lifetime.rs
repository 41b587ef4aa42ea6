//! Retrieval efficiency against storage time, without assisted light and
//! with it on continuously. The assisted scan runs 100 µs of 2e5 atoms and
//! takes a few minutes.
//!
//! cargo run --release --example lifetime

use spinregen::protocol::{lifetime_scan, Experiment};

fn main() -> spinregen::Result<()> {
    let exp = Experiment::reference(7)?;
    for (assist, delays) in [
        (false, &exp.lifetime.delays_no_assist),
        (true, &exp.lifetime.delays_assist),
    ] {
        let c = lifetime_scan(delays, assist, &exp)?;
        let stride = (delays.len() / 10).max(1);
        println!("assist {assist}");
        for (d, re) in c.delays.iter().zip(&c.retrieval).step_by(stride) {
            println!("  {:7.2} us  {re:.4}", d * 1e6);
        }
        match c.one_over_e {
            Some(t) => println!("  1/e time {:.2} us", t * 1e6),
            None => println!("  no 1/e crossing in the scan"),
        }
    }
    Ok(())
}
