//! Pulse-train efficiency table, lifetime scans, transmission curves and the
//! κ calibration.

use crate::error::{Error, Result};
use crate::regeneration::{calibrate_kappa, Calibration, MAX_KAPPA_DT};

use super::fit::{fit_transmission, gaussian_shape_residual, one_over_e_time, RelaxationFit};
use super::sequence::{run_sequence, PulseEvent, PulseKind, PulseSequence, TraceResult};
use super::Experiment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fig2Condition {
    NoAssist,
    Assist,
    /// Assisted light on, no input signal: only noise reaches the output.
    AssistNoSignal,
}

impl Fig2Condition {
    pub const ALL: [Fig2Condition; 3] = [
        Fig2Condition::NoAssist,
        Fig2Condition::Assist,
        Fig2Condition::AssistNoSignal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Fig2Condition::NoAssist => "S_out_noA",
            Fig2Condition::Assist => "S_out_A",
            Fig2Condition::AssistNoSignal => "S_out_A_noSin",
        }
    }
}

/// Pump, write, optional assist window and the read pulses of the
/// pulse-train experiment.
pub fn fig2_sequence(exp: &Experiment, condition: Fig2Condition) -> PulseSequence {
    let t = &exp.fig2;
    let m = &exp.memory;
    let signal = if condition == Fig2Condition::AssistNoSignal {
        0.0
    } else {
        m.signal_energy
    };
    let mut events = vec![
        PulseEvent::new(PulseKind::Pump, t.pump_start, t.pump_duration, 23e-3),
        PulseEvent::new(PulseKind::Write, t.write_time, m.pulse_width, signal),
    ];
    if condition != Fig2Condition::NoAssist {
        events.push(PulseEvent::new(
            PulseKind::AssistOn,
            t.assist_start,
            0.0,
            0.0,
        ));
        events.push(PulseEvent::new(
            PulseKind::AssistOff,
            t.assist_end,
            0.0,
            0.0,
        ));
    }
    for &r in &t.read_times {
        events.push(PulseEvent::new(PulseKind::Read, r, m.pulse_width, 2e-9));
    }
    let end = t.read_times.iter().cloned().fold(t.write_time, f64::max);
    let mut seq = PulseSequence::new(events, t.dt, end);
    seq.trial_count = t.trials;
    seq
}

/// Efficiencies of the pulse-train experiment relative to the input pulse.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Fig2Table {
    pub s_leak: f64,
    pub s_out_no_a: f64,
    pub r2_no_a: f64,
    pub s_out_a: f64,
    pub r2_a: f64,
    /// Output without input signal, in input-pulse units.
    pub s_out_a_no_sin: f64,
    /// Photons at the memory output without input signal.
    pub noise_photons_a_no_sin: f64,
    /// Residual of the first retrieved pulse from its moment-matched Gaussian.
    pub shape_residual_no_a: f64,
    pub shape_residual_a: f64,
    /// Write efficiency; dividing by it gives efficiencies relative to the
    /// stored excitation.
    pub write_efficiency: f64,
}

impl Fig2Table {
    /// (name, relative to input, relative to stored excitation)
    pub fn rows(&self) -> Vec<(&'static str, f64, f64)> {
        let eta = self.write_efficiency;
        let stored = |v: f64| if eta > 0.0 { v / eta } else { f64::NAN };
        vec![
            ("S_leak", self.s_leak, f64::NAN),
            ("S_out_noA", self.s_out_no_a, stored(self.s_out_no_a)),
            ("R2_noA", self.r2_no_a, stored(self.r2_no_a)),
            ("S_out_A", self.s_out_a, stored(self.s_out_a)),
            ("R2_A", self.r2_a, stored(self.r2_a)),
            (
                "S_out_A_noSin",
                self.s_out_a_no_sin,
                stored(self.s_out_a_no_sin),
            ),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Fig2Result {
    pub table: Fig2Table,
    pub no_assist: TraceResult,
    pub assist: TraceResult,
    pub assist_no_signal: TraceResult,
    /// Output time grid, s.
    pub time_s: Vec<f64>,
    /// Pulse traces on `time_s`, input-pulse energy per ns:
    /// S_in, S_leak, S_out_noA, S_out_A, S_out_A_noSin.
    pub traces: [Vec<f64>; 5],
}

/// Runs the three conditions and builds the table and the pulse traces.
pub fn fig2_experiment(exp: &Experiment) -> Result<Fig2Result> {
    let run = |c: Fig2Condition| {
        let mut seq = fig2_sequence(exp, c);
        seq.capture_pulse_shapes = true;
        run_sequence(&seq, exp)
    };
    let no_assist = run(Fig2Condition::NoAssist)?;
    let assist = run(Fig2Condition::Assist)?;
    let assist_no_signal = run(Fig2Condition::AssistNoSignal)?;

    let read = |r: &TraceResult, i: usize| r.reads.get(i).map(|x| x.efficiency).unwrap_or(0.0);
    let shape = |r: &TraceResult| {
        r.reads
            .first()
            .and_then(|x| x.pulse_shape.as_ref())
            .map(|(t, p)| gaussian_shape_residual(t, p))
            .unwrap_or(0.0)
    };
    let noise = assist_no_signal
        .reads
        .first()
        .map(|r| r.noise_photons)
        .unwrap_or(0.0);
    let table = Fig2Table {
        s_leak: no_assist.leaked_fraction,
        s_out_no_a: read(&no_assist, 0),
        r2_no_a: read(&no_assist, 1),
        s_out_a: read(&assist, 0),
        r2_a: read(&assist, 1),
        s_out_a_no_sin: read(&assist_no_signal, 0) + noise / exp.input_photons(),
        noise_photons_a_no_sin: noise,
        shape_residual_no_a: shape(&no_assist),
        shape_residual_a: shape(&assist),
        write_efficiency: exp.memory.write_efficiency,
    };

    let end = exp
        .fig2
        .read_times
        .iter()
        .cloned()
        .fold(exp.fig2.write_time, f64::max)
        + 300e-9;
    let time_s: Vec<f64> = (0..=(end * 1e9).round() as usize)
        .map(|i| i as f64 * 1e-9)
        .collect();
    let sigma = exp.memory.pulse_width / (8.0 * 2f64.ln()).sqrt();
    let gauss = |t: f64, center: f64, area: f64| {
        area * 1e-9 * (-0.5 * ((t - center) / sigma).powi(2)).exp()
            / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    let write = exp.fig2.write_time;
    let s_in: Vec<f64> = time_s.iter().map(|&t| gauss(t, write, 1.0)).collect();
    let s_leak: Vec<f64> = time_s
        .iter()
        .map(|&t| gauss(t, write, table.s_leak))
        .collect();
    let output = |r: &TraceResult, noise_only: bool| -> Vec<f64> {
        time_s
            .iter()
            .map(|&t| {
                r.reads
                    .iter()
                    .map(|read| {
                        let noise = read.noise_photons / exp.input_photons();
                        let signal = match (&read.pulse_shape, noise_only) {
                            (Some((rel, p)), false) => interpolate(rel, p, t - read.time) * 1e-9,
                            _ => gauss(t, read.time, read.efficiency),
                        };
                        if noise_only {
                            signal + gauss(t, read.time, noise)
                        } else {
                            signal
                        }
                    })
                    .sum()
            })
            .collect()
    };
    let traces = [
        s_in,
        s_leak,
        output(&no_assist, false),
        output(&assist, false),
        output(&assist_no_signal, true),
    ];
    Ok(Fig2Result {
        table,
        no_assist,
        assist,
        assist_no_signal,
        time_s,
        traces,
    })
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    if x.is_empty() || at < x[0] || at > x[x.len() - 1] {
        return 0.0;
    }
    let i = x.partition_point(|&v| v <= at).min(x.len() - 1).max(1);
    let f = (at - x[i - 1]) / (x[i] - x[i - 1]);
    y[i - 1] + f * (y[i] - y[i - 1])
}

/// Pump, write, then non-destructive probes at each delay after the write.
/// With `assist` the assisted light stays on from the write onward.
pub fn lifetime_sequence(exp: &Experiment, delays: &[f64], assist: bool) -> PulseSequence {
    let t = &exp.fig2;
    let m = &exp.memory;
    let mut events = vec![
        PulseEvent::new(PulseKind::Pump, t.pump_start, t.pump_duration, 23e-3),
        PulseEvent::new(
            PulseKind::Write,
            t.write_time,
            m.pulse_width,
            m.signal_energy,
        ),
    ];
    if assist {
        events.push(PulseEvent::new(PulseKind::AssistOn, t.write_time, 0.0, 0.0));
    }
    for &d in delays {
        events.push(PulseEvent::new(
            PulseKind::Probe,
            t.write_time + d,
            0.0,
            0.0,
        ));
    }
    let end = t.write_time + delays.last().cloned().unwrap_or(0.0);
    let mut seq = PulseSequence::new(events, exp.lifetime.dt, end);
    seq.trial_count = t.trials;
    seq
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LifetimeCurve {
    pub assist: bool,
    /// Delay after the write, s.
    pub delays: Vec<f64>,
    pub retrieval: Vec<f64>,
    /// First time RE falls below RE(0)/e, s.
    pub one_over_e: Option<f64>,
}

/// Retrieval efficiency against delay after the write.
///
/// A read taken at delay d sees the same history as a non-destructive probe
/// at d, so the whole curve comes from one run.
pub fn lifetime_scan(delays: &[f64], assist: bool, exp: &Experiment) -> Result<LifetimeCurve> {
    if delays.is_empty() {
        return Err(Error::param("delays", "need at least one delay"));
    }
    if delays.windows(2).any(|w| w[1] <= w[0]) || delays[0] < 0.0 {
        return Err(Error::param(
            "delays",
            "must be non-negative and strictly ascending",
        ));
    }
    let seq = lifetime_sequence(exp, delays, assist);
    let r = run_sequence(&seq, exp)?;
    let retrieval: Vec<f64> = r.probes.iter().map(|p| p.retrieval).collect();
    let one_over_e = one_over_e_time(delays, &retrieval);
    Ok(LifetimeCurve {
        assist,
        delays: delays.to_vec(),
        retrieval,
        one_over_e,
    })
}

/// Pump, then probes after pump-off; with `assist` the assisted light is on
/// for the first `tp.assist_duration` after pump-off.
pub fn tp_sequence(exp: &Experiment, assist: bool) -> PulseSequence {
    let tp = &exp.tp;
    let off = tp.pump_duration;
    let mut events = vec![PulseEvent::new(PulseKind::Pump, 0.0, off, 23e-3)];
    if assist && tp.assist_duration > 0.0 {
        events.push(PulseEvent::new(PulseKind::AssistOn, off, 0.0, 0.0));
        events.push(PulseEvent::new(
            PulseKind::AssistOff,
            off + tp.assist_duration,
            0.0,
            0.0,
        ));
    }
    for &t in &tp.times {
        events.push(PulseEvent::new(PulseKind::Probe, off + t, 0.0, 5e-6));
    }
    let end = off + tp.times.last().cloned().unwrap_or(0.0);
    let mut seq = PulseSequence::new(events, tp.dt, end);
    seq.trial_count = exp.fig2.trials;
    seq
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TpCurve {
    pub assist: bool,
    /// Time after pump-off, s.
    pub times: Vec<f64>,
    pub transmission: Vec<f64>,
    /// Probe-region mean pop1.
    pub pop1: Vec<f64>,
    /// Relaxation fit of the transmission.
    pub fit: RelaxationFit,
}

/// Probe transmission after the pump is switched off.
///
/// No spin wave is stored, so the gain has nothing to act on and only the
/// depolarization of the assisted light matters; κ is set to zero, which
/// also lifts the κ·dt bound for the coarser step used here.
pub fn tp_experiment(assist: bool, exp: &Experiment) -> Result<TpCurve> {
    let mut e = exp.clone();
    e.model.kappa = 0.0;
    let seq = tp_sequence(&e, assist);
    let r = run_sequence(&seq, &e)?;
    let times: Vec<f64> = r
        .probes
        .iter()
        .map(|p| p.time - e.tp.pump_duration)
        .collect();
    let transmission: Vec<f64> = r.probes.iter().map(|p| p.transmission).collect();
    let pop1 = r.probes.iter().map(|p| p.pop1).collect();
    let fit = fit_transmission(&times, &transmission)?;
    Ok(TpCurve {
        assist,
        times,
        transmission,
        pop1,
        fit,
    })
}

/// Finds κ such that the first read with assist returns `target`.
pub fn calibrate_experiment(exp: &Experiment, target: f64, tolerance: f64) -> Result<Calibration> {
    let kappa_max = MAX_KAPPA_DT / exp.fig2.dt;
    let mut e = exp.clone();
    let seq = fig2_sequence(exp, Fig2Condition::Assist);
    calibrate_kappa(target, kappa_max, tolerance, |k| {
        e.model.kappa = k;
        let r = run_sequence(&seq, &e)?;
        Ok(r.reads.first().map(|x| x.efficiency).unwrap_or(0.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 10.0, 0.0];
        assert_eq!(interpolate(&x, &y, 0.5), 5.0);
        assert_eq!(interpolate(&x, &y, 2.0), 0.0);
        assert_eq!(interpolate(&x, &y, 3.0), 0.0);
    }

    #[test]
    fn reference_sequences_are_valid() {
        let exp = Experiment::reference(1).unwrap();
        for c in Fig2Condition::ALL {
            fig2_sequence(&exp, c).validate().unwrap();
        }
        lifetime_sequence(&exp, &exp.lifetime.delays_assist, true)
            .validate()
            .unwrap();
        tp_sequence(&exp, true).validate().unwrap();
    }
}
