//! Loads a TOML run configuration, runs its pulse sequence and writes the
//! traces as CSV.
//!
//! cargo run --release --example config_run -- crates/spinregen/config/default.toml /tmp/traces.csv

use std::path::PathBuf;

use spinregen::config::load_config;
use spinregen::output::{emit_traces, Format, RunMeta};
use spinregen::protocol::run_sequence;

fn main() -> spinregen::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(
        args.next()
            .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/config/default.toml").into()),
    );
    let out = PathBuf::from(args.next().unwrap_or_else(|| "traces.csv".into()));

    let loaded = load_config(&config)?;
    let cfg = &loaded.config;
    let exp = cfg.to_experiment()?;
    let r = run_sequence(&cfg.to_sequence(&exp)?, &exp)?;
    let meta = RunMeta {
        config_sha256: cfg.sha256(),
        master_seed: cfg.master_seed,
    };
    emit_traces(&r, Format::Csv, &out, &meta)?;
    for read in &r.reads {
        println!("read at {:.0} ns: {:.4}", read.time * 1e9, read.efficiency);
    }
    println!("wrote {} rows to {}", r.time_s.len(), out.display());
    Ok(())
}
