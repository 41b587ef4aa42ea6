//! The four-stage memory protocol (pump, write, assist, read) and the
//! experiments built on it: the pulse-train efficiency table, the coherence
//! lifetime scans and the transmission-probability curves.

mod experiments;
mod fit;
mod sequence;

pub use experiments::{
    calibrate_experiment, fig2_experiment, fig2_sequence, lifetime_scan, lifetime_sequence,
    tp_experiment, tp_sequence, Fig2Condition, Fig2Result, Fig2Table, LifetimeCurve, TpCurve,
};
pub use fit::{
    fit_relaxation, fit_transmission, franzen_tp, gaussian_shape_residual, one_over_e_time,
    RelaxationFit,
};
pub use sequence::{
    photon_energy, run_sequence, ProbeRecord, PulseEvent, PulseKind, PulseSequence, ReadRecord,
    TraceResult,
};

use crate::ensemble::{Beams, EnsembleConfig};
use crate::error::{Error, Result};
use crate::regeneration::GainModel;
use crate::spinwave::WaveVectors;

/// Storage parameters that are not geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryParams {
    /// Fraction of the input pulse mapped into the spin wave.
    pub write_efficiency: f64,
    /// Excitation probability of an on-axis atom for a unit-efficiency write.
    pub excitation_fraction: f64,
    /// Hyperfine relaxation time in the dark, s.
    pub dark_lifetime: f64,
    /// pop1 reached in the dark.
    pub equilibrium_pop1: f64,
    /// Probe optical depth for a fully depolarized sample.
    pub optical_depth: f64,
    /// Input signal pulse energy, J.
    pub signal_energy: f64,
    /// Signal and read pulse FWHM, s.
    pub pulse_width: f64,
    /// On-axis read conversion depth used for the emitted pulse shape.
    pub read_depth: f64,
    /// Intrinsic four-wave-mixing noise per read, photons.
    pub fwm_photons: f64,
    /// Total detection efficiency of the noise measurement.
    pub detection_efficiency: f64,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            write_efficiency: 0.9,
            excitation_fraction: 3e-3,
            dark_lifetime: 18e-6,
            equilibrium_pop1: 7.0 / 16.0,
            optical_depth: 2.0,
            signal_energy: 13e-12,
            pulse_width: 70e-9,
            read_depth: 4.0,
            fwm_photons: 0.8,
            detection_efficiency: 0.07,
        }
    }
}

impl MemoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.write_efficiency) {
            return Err(Error::param("write_efficiency", "must lie in [0, 1]"));
        }
        if !(self.excitation_fraction > 0.0 && self.excitation_fraction <= 0.25) {
            return Err(Error::param("excitation_fraction", "must lie in (0, 0.25]"));
        }
        if !(0.0..=1.0).contains(&self.equilibrium_pop1) {
            return Err(Error::param("equilibrium_pop1", "must lie in [0, 1]"));
        }
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return Err(Error::param("detection_efficiency", "must lie in (0, 1]"));
        }
        for (name, v) in [
            ("dark_lifetime", self.dark_lifetime),
            ("signal_energy", self.signal_energy),
            ("pulse_width", self.pulse_width),
            ("read_depth", self.read_depth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("optical_depth", self.optical_depth),
            ("fwm_photons", self.fwm_photons),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Timing of the pulse-train experiment, s.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Timing {
    pub pump_start: f64,
    pub pump_duration: f64,
    pub write_time: f64,
    pub read_times: Vec<f64>,
    pub assist_start: f64,
    pub assist_end: f64,
    pub dt: f64,
    pub trials: usize,
}

impl Default for Fig2Timing {
    fn default() -> Self {
        Fig2Timing {
            pump_start: 0.0,
            pump_duration: 350e-9,
            write_time: 450e-9,
            read_times: vec![1170e-9, 1500e-9],
            assist_start: 840e-9,
            assist_end: 1170e-9,
            dt: 5e-9,
            trials: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LifetimeSettings {
    /// Delays after the write without assist, s.
    pub delays_no_assist: Vec<f64>,
    /// Delays after the write with continuous assist, s.
    pub delays_assist: Vec<f64>,
    pub dt: f64,
}

impl Default for LifetimeSettings {
    fn default() -> Self {
        LifetimeSettings {
            delays_no_assist: (0..=60).map(|i| i as f64 * 0.1e-6).collect(),
            delays_assist: (0..=100).map(|i| i as f64 * 1e-6).collect(),
            dt: 5e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TpSettings {
    /// Probe times after the pump is switched off, s.
    pub times: Vec<f64>,
    /// Length of the assisted-light window starting at pump-off, s.
    pub assist_duration: f64,
    pub pump_duration: f64,
    pub dt: f64,
}

impl Default for TpSettings {
    fn default() -> Self {
        TpSettings {
            times: (0..=180).map(|i| i as f64 * 0.5e-6).collect(),
            assist_duration: 10e-6,
            pump_duration: 1e-6,
            dt: 20e-9,
        }
    }
}

/// Everything a run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub ensemble: EnsembleConfig,
    pub beams: Beams,
    pub vectors: WaveVectors,
    pub model: GainModel,
    pub memory: MemoryParams,
    pub fig2: Fig2Timing,
    pub lifetime: LifetimeSettings,
    pub tp: TpSettings,
}

/// κ at the reference settings, from `calibrate_experiment` against
/// S_out(A) = 0.98.
pub const REFERENCE_KAPPA: f64 = 9.0234e6;

impl Experiment {
    /// Reference setup: Cs at 72 °C, 2e5 sampled atoms in a 1.5 mm core of
    /// the 75 mm × 10 mm cell, paper beam geometry, calibrated gain.
    pub fn reference(seed: u64) -> Result<Self> {
        let mut ensemble = EnsembleConfig::cesium_cell(200_000, seed);
        ensemble.sampling_radius = 1.5e-3;
        let beams = Beams::reference();
        let vectors = WaveVectors::new(&ensemble.species, &beams)?;
        let model = reference_model(REFERENCE_KAPPA, &beams, &vectors);
        Ok(Experiment {
            ensemble,
            beams,
            vectors,
            model,
            memory: MemoryParams::default(),
            fig2: Fig2Timing::default(),
            lifetime: LifetimeSettings::default(),
            tp: TpSettings::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        self.beams.validate()?;
        self.vectors.validate(&self.ensemble.species)?;
        self.model.validate()?;
        self.memory.validate()
    }

    /// Photons in the input signal pulse.
    pub fn input_photons(&self) -> f64 {
        self.memory.signal_energy / photon_energy(self.ensemble.species.signal_wavelength)
    }

    /// Recomputes the wave vectors and the noise mismatch after the beams
    /// changed.
    pub fn refresh_vectors(&mut self) -> Result<()> {
        self.vectors = WaveVectors::new(&self.ensemble.species, &self.beams)?;
        self.model.noise_mismatch = self.vectors.mismatch_vector(&self.vectors.forward_raman());
        Ok(())
    }
}

/// Gain on the illuminated spin wave with the default partner decay,
/// saturation and depolarization.
pub fn reference_model(kappa: f64, beams: &Beams, vectors: &WaveVectors) -> GainModel {
    GainModel {
        kappa,
        assist_on: false,
        depol_rate: 6e5,
        assist_beam: beams.illumination.clone(),
        partner_decay: 1e7,
        saturation: 0.7,
        noise_mismatch: vectors.mismatch_vector(&vectors.forward_raman()),
    }
}
