//! Warm-vapor Raman quantum memory with active spin-wave regeneration.
//!
//! A Monte-Carlo ensemble of thermal Cs atoms carries a collective spin wave
//! written by a signal pulse. Atomic motion washes it out of the signal mode
//! within about a microsecond; scattered assisted photons drive a two-mode
//! parametric gain that regenerates it from fresh atoms in |1⟩.
//!
//! - [`ensemble`]: sampling, ballistic motion with wall exchange, beam weights
//! - [`spinwave`]: write imprint, mode overlap, reads, interference sums
//! - [`regeneration`]: gain law, number-basis oracle, gain/depolarization
//!   steps, κ calibration, noise budget
//! - [`protocol`]: pulse sequences, the pulse-train, lifetime and
//!   transmission experiments, relaxation fits
//! - [`config`], [`output`], [`cli`]: TOML configuration, CSV/JSON outputs
//!   and the `spinregen` command
//!
//! ```no_run
//! use spinregen::protocol::{fig2_experiment, Experiment};
//!
//! let exp = Experiment::reference(7).unwrap();
//! let fig2 = fig2_experiment(&exp).unwrap();
//! println!("S_out(A) = {:.3}", fig2.table.s_out_a);
//! ```

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod output;
mod par;
pub mod protocol;
pub mod regeneration;
pub mod spinwave;

pub use error::{Error, Result};
