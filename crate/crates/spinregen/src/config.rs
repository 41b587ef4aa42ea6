//! Run configuration: TOML with the unit in every key name.
//!
//! Unknown keys are rejected (with a hint when only the unit suffix differs),
//! a few keys are required, and every other missing key takes its default and
//! is listed in `LoadedConfig::defaulted`. The canonical echo is the TOML
//! produced by `RunConfig::to_toml`; its SHA-256 is the config hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{BeamGeometry, Beams, EnsembleConfig, SpeciesConstants};
use crate::error::{Error, Result};
use crate::protocol::{
    fig2_sequence, reference_model, Experiment, Fig2Condition, Fig2Timing, LifetimeSettings,
    MemoryParams, PulseKind, PulseSequence, TpSettings,
};
use crate::spinwave::WaveVectors;

/// Keys that must be present in a config file, as `section.key`.
pub const REQUIRED_KEYS: [&str; 4] = [
    "master_seed",
    "ensemble.n_atoms",
    "ensemble.temperature_k",
    "gain.kappa_per_s",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub ensemble: EnsembleSection,
    pub beams: BeamsSection,
    pub sequence: SequenceSection,
    pub memory: MemorySection,
    pub gain: GainSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub n_atoms: usize,
    pub temperature_k: f64,
    pub cell_length_mm: f64,
    pub cell_radius_mm: f64,
    /// Radius of the simulated core around the beams.
    pub sampling_radius_mm: f64,
    pub atomic_mass_kg: f64,
    pub hyperfine_splitting_hz: f64,
    pub signal_wavelength_nm: f64,
    pub assist_wavelength_nm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamsSection {
    pub signal_waist_um: f64,
    pub control_waist_um: f64,
    pub assist_waist_um: f64,
    pub assist_offset_mm: f64,
    pub assist_tilt_mrad: f64,
    pub illumination_waist_um: f64,
    pub pump_waist_mm: f64,
    pub probe_waist_um: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    pub dt_ns: f64,
    pub trials: usize,
    pub pump_start_ns: f64,
    pub pump_duration_ns: f64,
    pub write_ns: f64,
    pub read_ns: Vec<f64>,
    pub assist_start_ns: f64,
    pub assist_end_ns: f64,
    /// `simulate` only: run with the assisted light and the input signal.
    pub assist: bool,
    pub input_signal: bool,
    pub record_interval_ns: f64,
    pub lifetime_dt_ns: f64,
    pub lifetime_no_assist_step_us: f64,
    pub lifetime_no_assist_max_us: f64,
    pub lifetime_assist_step_us: f64,
    pub lifetime_assist_max_us: f64,
    pub tp_dt_ns: f64,
    pub tp_pump_us: f64,
    pub tp_step_us: f64,
    pub tp_span_us: f64,
    pub tp_assist_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorySection {
    pub write_efficiency: f64,
    pub excitation_fraction: f64,
    pub dark_lifetime_us: f64,
    pub equilibrium_pop1: f64,
    pub optical_depth: f64,
    pub signal_energy_pj: f64,
    pub pulse_width_ns: f64,
    pub read_depth: f64,
    pub fwm_photons: f64,
    pub detection_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainSection {
    pub kappa_per_s: f64,
    pub depol_rate_per_s: f64,
    pub partner_decay_per_s: f64,
    /// Gain-mode excitation, in input pulses, at which the gain halves.
    pub saturation_pulses: f64,
    pub calibration_target: f64,
    pub calibration_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub format: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 7,
            ensemble: EnsembleSection::default(),
            beams: BeamsSection::default(),
            sequence: SequenceSection::default(),
            memory: MemorySection::default(),
            gain: GainSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let s = SpeciesConstants::cesium();
        EnsembleSection {
            n_atoms: 200_000,
            temperature_k: 345.15,
            cell_length_mm: 75.0,
            cell_radius_mm: 10.0,
            sampling_radius_mm: 1.5,
            atomic_mass_kg: s.atomic_mass,
            hyperfine_splitting_hz: s.hyperfine_splitting_freq,
            signal_wavelength_nm: s.signal_wavelength * 1e9,
            assist_wavelength_nm: s.assist_wavelength * 1e9,
        }
    }
}

impl Default for BeamsSection {
    fn default() -> Self {
        BeamsSection {
            signal_waist_um: 240.0,
            control_waist_um: 300.0,
            assist_waist_um: 190.0,
            assist_offset_mm: 1.0,
            assist_tilt_mrad: 4.0,
            illumination_waist_um: 240.0,
            pump_waist_mm: 5.0,
            probe_waist_um: 240.0,
        }
    }
}

impl Default for SequenceSection {
    fn default() -> Self {
        SequenceSection {
            dt_ns: 5.0,
            trials: 1,
            pump_start_ns: 0.0,
            pump_duration_ns: 350.0,
            write_ns: 450.0,
            read_ns: vec![1170.0, 1500.0],
            assist_start_ns: 840.0,
            assist_end_ns: 1170.0,
            assist: true,
            input_signal: true,
            record_interval_ns: 10.0,
            lifetime_dt_ns: 5.0,
            lifetime_no_assist_step_us: 0.1,
            lifetime_no_assist_max_us: 6.0,
            lifetime_assist_step_us: 1.0,
            lifetime_assist_max_us: 100.0,
            tp_dt_ns: 20.0,
            tp_pump_us: 1.0,
            tp_step_us: 0.5,
            tp_span_us: 90.0,
            tp_assist_us: 10.0,
        }
    }
}

impl Default for MemorySection {
    fn default() -> Self {
        let m = MemoryParams::default();
        MemorySection {
            write_efficiency: m.write_efficiency,
            excitation_fraction: m.excitation_fraction,
            dark_lifetime_us: m.dark_lifetime * 1e6,
            equilibrium_pop1: m.equilibrium_pop1,
            optical_depth: m.optical_depth,
            signal_energy_pj: m.signal_energy * 1e12,
            pulse_width_ns: m.pulse_width * 1e9,
            read_depth: m.read_depth,
            fwm_photons: m.fwm_photons,
            detection_efficiency: m.detection_efficiency,
        }
    }
}

impl Default for GainSection {
    fn default() -> Self {
        GainSection {
            kappa_per_s: crate::protocol::REFERENCE_KAPPA,
            depol_rate_per_s: 6e5,
            partner_decay_per_s: 1e7,
            saturation_pulses: 0.7,
            calibration_target: 0.98,
            calibration_tolerance: 0.002,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            format: "csv".into(),
        }
    }
}

/// A config as loaded, with the keys that took their defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// `section.key` names filled from defaults, in schema order.
    pub defaulted: Vec<String>,
    pub path: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut loaded = parse_config(&text).map_err(|message| Error::Config {
        path: path.to_path_buf(),
        message,
    })?;
    loaded.path = Some(path.to_path_buf());
    Ok(loaded)
}

/// Parses and validates config text. Errors are `line N: message` strings.
pub fn parse_config(text: &str) -> std::result::Result<LoadedConfig, String> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| describe_toml_error(text, &e))?;
    let schema = schema_keys();
    let mut present = Vec::new();
    for (key, value) in &table {
        match (value, schema.iter().find(|(s, _)| s == key)) {
            (toml::Value::Table(inner), Some((_, Some(keys)))) => {
                for k in inner.keys() {
                    let full = format!("{key}.{k}");
                    if !keys.contains(k) {
                        return Err(unknown_key(text, key, k, keys));
                    }
                    present.push(full);
                }
            }
            (_, Some((_, None))) => present.push(key.clone()),
            (_, Some((_, Some(_)))) => {
                return Err(format!(
                    "line {}: `{key}` must be a table",
                    line_of(text, None, key).unwrap_or(1)
                ));
            }
            (_, None) => {
                let top: Vec<String> = schema.iter().map(|(s, _)| s.clone()).collect();
                return Err(unknown_key(text, "", key, &top));
            }
        }
    }
    for req in REQUIRED_KEYS {
        if !present.iter().any(|p| p == req) {
            return Err(format!("missing required key `{req}`"));
        }
    }
    let config: RunConfig = toml::from_str(text).map_err(|e| describe_toml_error(text, &e))?;
    if let Err(e) = config.to_experiment() {
        let name = match &e {
            Error::InvalidParameter { name, .. } => name.clone(),
            _ => String::new(),
        };
        let at = config_key_for(&name)
            .and_then(|(s, k)| line_of(text, Some(s), k))
            .map(|l| format!("line {l}: "))
            .unwrap_or_default();
        return Err(format!("{at}{e}"));
    }
    let mut defaulted = Vec::new();
    for (section, keys) in &schema {
        match keys {
            None if !present.contains(section) => defaulted.push(section.clone()),
            Some(keys) => {
                for k in keys {
                    let full = format!("{section}.{k}");
                    if !present.contains(&full) {
                        defaulted.push(full);
                    }
                }
            }
            _ => {}
        }
    }
    Ok(LoadedConfig {
        config,
        defaulted,
        path: None,
    })
}

impl RunConfig {
    /// Canonical TOML with every key.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML.
    pub fn sha256(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// The pulse sequence of a plain run: pulse-train timing, assisted light
    /// as configured, and a write without signal when `input_signal` is off.
    pub fn to_sequence(&self, exp: &Experiment) -> Result<PulseSequence> {
        let s = &self.sequence;
        let condition = match (s.assist, s.input_signal) {
            (false, _) => Fig2Condition::NoAssist,
            (true, true) => Fig2Condition::Assist,
            (true, false) => Fig2Condition::AssistNoSignal,
        };
        let mut seq = fig2_sequence(exp, condition);
        if !s.input_signal {
            for e in seq.events.iter_mut().filter(|e| e.kind == PulseKind::Write) {
                e.strength = 0.0;
            }
        }
        seq.record_interval = Some(s.record_interval_ns * 1e-9);
        seq.validate()?;
        Ok(seq)
    }

    pub fn to_experiment(&self) -> Result<Experiment> {
        if self.master_seed > i64::MAX as u64 {
            return Err(Error::param(
                "master_seed",
                "must be below 2^63 so it fits a TOML integer",
            ));
        }
        let e = &self.ensemble;
        let species = SpeciesConstants {
            atomic_mass: e.atomic_mass_kg,
            hyperfine_splitting_freq: e.hyperfine_splitting_hz,
            signal_wavelength: e.signal_wavelength_nm * 1e-9,
            assist_wavelength: e.assist_wavelength_nm * 1e-9,
        };
        let ensemble = EnsembleConfig {
            n_atoms: e.n_atoms,
            temperature: e.temperature_k,
            cell_length: e.cell_length_mm * 1e-3,
            cell_radius: e.cell_radius_mm * 1e-3,
            sampling_radius: e.sampling_radius_mm * 1e-3,
            species,
            rng_seed: self.master_seed,
        };
        ensemble.validate()?;
        let b = &self.beams;
        for (name, v) in [
            ("signal_waist_um", b.signal_waist_um),
            ("control_waist_um", b.control_waist_um),
            ("assist_waist_um", b.assist_waist_um),
            ("illumination_waist_um", b.illumination_waist_um),
            ("pump_waist_mm", b.pump_waist_mm),
            ("probe_waist_um", b.probe_waist_um),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        let beams = Beams {
            signal: BeamGeometry::on_axis(b.signal_waist_um * 1e-6),
            control: BeamGeometry::on_axis(b.control_waist_um * 1e-6),
            assist: BeamGeometry::tilted(
                b.assist_waist_um * 1e-6,
                b.assist_offset_mm * 1e-3,
                b.assist_tilt_mrad * 1e-3,
            ),
            illumination: BeamGeometry::on_axis(b.illumination_waist_um * 1e-6),
            pump: BeamGeometry::on_axis(b.pump_waist_mm * 1e-3),
            probe: BeamGeometry::on_axis(b.probe_waist_um * 1e-6),
        };
        beams.validate()?;
        let vectors = WaveVectors::new(&ensemble.species, &beams)?;
        let g = &self.gain;
        let mut model = reference_model(g.kappa_per_s, &beams, &vectors);
        model.depol_rate = g.depol_rate_per_s;
        model.partner_decay = g.partner_decay_per_s;
        model.saturation = g.saturation_pulses;
        let m = &self.memory;
        let memory = MemoryParams {
            write_efficiency: m.write_efficiency,
            excitation_fraction: m.excitation_fraction,
            dark_lifetime: m.dark_lifetime_us * 1e-6,
            equilibrium_pop1: m.equilibrium_pop1,
            optical_depth: m.optical_depth,
            signal_energy: m.signal_energy_pj * 1e-12,
            pulse_width: m.pulse_width_ns * 1e-9,
            read_depth: m.read_depth,
            fwm_photons: m.fwm_photons,
            detection_efficiency: m.detection_efficiency,
        };
        let s = &self.sequence;
        if s.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        for (name, v) in [
            ("dt_ns", s.dt_ns),
            ("lifetime_dt_ns", s.lifetime_dt_ns),
            ("tp_dt_ns", s.tp_dt_ns),
            ("record_interval_ns", s.record_interval_ns),
            ("lifetime_no_assist_step_us", s.lifetime_no_assist_step_us),
            ("lifetime_assist_step_us", s.lifetime_assist_step_us),
            ("tp_step_us", s.tp_step_us),
            ("tp_pump_us", s.tp_pump_us),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("calibration_target", g.calibration_target),
            ("calibration_tolerance", g.calibration_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if !matches!(self.output.format.as_str(), "csv" | "json") {
            return Err(Error::param("format", "must be `csv` or `json`"));
        }
        let grid = |step: f64, max: f64| -> Vec<f64> {
            let n = (max / step).round().max(0.0) as usize;
            (0..=n).map(|i| i as f64 * step * 1e-6).collect()
        };
        let exp = Experiment {
            ensemble,
            beams,
            vectors,
            model,
            memory,
            fig2: Fig2Timing {
                pump_start: s.pump_start_ns * 1e-9,
                pump_duration: s.pump_duration_ns * 1e-9,
                write_time: s.write_ns * 1e-9,
                read_times: s.read_ns.iter().map(|r| r * 1e-9).collect(),
                assist_start: s.assist_start_ns * 1e-9,
                assist_end: s.assist_end_ns * 1e-9,
                dt: s.dt_ns * 1e-9,
                trials: s.trials,
            },
            lifetime: LifetimeSettings {
                delays_no_assist: grid(s.lifetime_no_assist_step_us, s.lifetime_no_assist_max_us),
                delays_assist: grid(s.lifetime_assist_step_us, s.lifetime_assist_max_us),
                dt: s.lifetime_dt_ns * 1e-9,
            },
            tp: TpSettings {
                times: grid(s.tp_step_us, s.tp_span_us),
                assist_duration: s.tp_assist_us * 1e-6,
                pump_duration: s.tp_pump_us * 1e-6,
                dt: s.tp_dt_ns * 1e-9,
            },
        };
        exp.validate()?;
        for c in crate::protocol::Fig2Condition::ALL {
            crate::protocol::fig2_sequence(&exp, c).validate()?;
        }
        Ok(exp)
    }
}

/// (section, Some(keys)) for tables, (key, None) for top-level values.
fn schema_keys() -> Vec<(String, Option<Vec<String>>)> {
    let value = toml::Table::try_from(RunConfig::default()).expect("config serializes");
    value
        .iter()
        .map(|(k, v)| match v {
            toml::Value::Table(t) => (k.clone(), Some(t.keys().cloned().collect())),
            _ => (k.clone(), None),
        })
        .collect()
}

/// Section and key of the config entry behind a parameter name.
fn config_key_for(name: &str) -> Option<(&'static str, &'static str)> {
    Some(match name {
        "n_atoms" => ("ensemble", "n_atoms"),
        "temperature" => ("ensemble", "temperature_k"),
        "cell_length" => ("ensemble", "cell_length_mm"),
        "cell_radius" => ("ensemble", "cell_radius_mm"),
        "sampling_radius" => ("ensemble", "sampling_radius_mm"),
        "atomic_mass" => ("ensemble", "atomic_mass_kg"),
        "hyperfine_splitting_freq" => ("ensemble", "hyperfine_splitting_hz"),
        "signal_wavelength" => ("ensemble", "signal_wavelength_nm"),
        "assist_wavelength" => ("ensemble", "assist_wavelength_nm"),
        "kappa" => ("gain", "kappa_per_s"),
        "depol_rate" => ("gain", "depol_rate_per_s"),
        "partner_decay" => ("gain", "partner_decay_per_s"),
        "saturation" => ("gain", "saturation_pulses"),
        "write_efficiency" => ("memory", "write_efficiency"),
        "excitation_fraction" => ("memory", "excitation_fraction"),
        "dark_lifetime" => ("memory", "dark_lifetime_us"),
        "equilibrium_pop1" => ("memory", "equilibrium_pop1"),
        "optical_depth" => ("memory", "optical_depth"),
        "signal_energy" => ("memory", "signal_energy_pj"),
        "pulse_width" => ("memory", "pulse_width_ns"),
        "read_depth" => ("memory", "read_depth"),
        "fwm_photons" => ("memory", "fwm_photons"),
        "detection_efficiency" => ("memory", "detection_efficiency"),
        "format" => ("output", "format"),
        "dt" => ("sequence", "dt_ns"),
        n => {
            for (s, keys) in [
                (
                    "beams",
                    &[
                        "signal_waist_um",
                        "control_waist_um",
                        "assist_waist_um",
                        "illumination_waist_um",
                        "pump_waist_mm",
                        "probe_waist_um",
                    ][..],
                ),
                (
                    "sequence",
                    &[
                        "trials",
                        "lifetime_dt_ns",
                        "tp_dt_ns",
                        "record_interval_ns",
                        "lifetime_no_assist_step_us",
                        "lifetime_assist_step_us",
                        "tp_step_us",
                        "tp_pump_us",
                    ][..],
                ),
                ("gain", &["calibration_target", "calibration_tolerance"][..]),
            ] {
                if let Some(k) = keys.iter().find(|k| **k == n) {
                    return Some((s, k));
                }
            }
            return None;
        }
    })
}

/// 1-based line of `key = ...` inside `[section]` (or at top level).
fn line_of(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = Some(name.trim().to_string());
            if section.is_none() && name.trim() == key {
                return Some(i + 1);
            }
            continue;
        }
        let k = line.split('=').next().unwrap_or("").trim();
        if k == key && current.as_deref() == section {
            return Some(i + 1);
        }
    }
    None
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let message = e.message().trim().to_string();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {message}")
        }
        None => message,
    }
}

fn unknown_key(text: &str, section: &str, key: &str, known: &[String]) -> String {
    let line = line_of(
        text,
        if section.is_empty() {
            None
        } else {
            Some(section)
        },
        key,
    )
    .unwrap_or(1);
    let full = if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    };
    let stem = |k: &str| -> String {
        let mut parts: Vec<&str> = k.split('_').collect();
        if parts.len() > 1 && UNIT_SUFFIXES.contains(parts.last().unwrap()) {
            parts.pop();
        }
        if parts.len() > 2 && parts[parts.len() - 2] == "per" {
            parts.truncate(parts.len() - 2);
        }
        parts.join("_")
    };
    match known.iter().find(|k| stem(k) == stem(key) || stem(k) == key) {
        Some(k) => format!("line {line}: unit mismatch in `{full}`: this key is spelled `{k}` (units are part of the key name)"),
        None => format!("line {line}: unknown key `{full}`; expected one of: {}", known.join(", ")),
    }
}

const UNIT_SUFFIXES: [&str; 14] = [
    "k", "c", "mm", "m", "um", "nm", "ns", "us", "s", "ms", "hz", "kg", "pj", "mrad",
];
