//! Pulse sequences and the time-stepping loop.

use rayon::prelude::*;

use crate::ensemble::{
    advance_ballistic_with, beam_weight, sample_ensemble, sub_seed, Atom, Ensemble, EnsembleConfig,
    PLANCK, SPEED_OF_LIGHT,
};
use crate::error::{Error, Result};
use crate::par::par_sum;
use crate::regeneration::{assist_tick_in, relax_atom, GainModel};
use crate::spinwave::{
    imprint_write, interference_sum, read_emission_profile, read_out, ExcitationBudget,
    FrameTracker, SpinWaveState,
};

use super::Experiment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PulseKind {
    Pump,
    Write,
    AssistOn,
    AssistOff,
    Probe,
    Read,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseEvent {
    pub kind: PulseKind,
    /// s
    pub start: f64,
    /// s; zero for switching and probe events.
    pub duration: f64,
    /// J for write/read pulses (a write with zero energy carries no signal),
    /// W for pump, assist and probe light.
    pub strength: f64,
    /// Hz
    pub detuning: f64,
}

impl PulseEvent {
    pub fn new(kind: PulseKind, start: f64, duration: f64, strength: f64) -> Self {
        PulseEvent {
            kind,
            start,
            duration,
            strength,
            detuning: 0.0,
        }
    }

    fn end(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pub events: Vec<PulseEvent>,
    pub trial_count: usize,
    /// Integrator step, s.
    pub dt: f64,
    /// Last simulated time, s.
    pub end_time: f64,
    /// Spacing of the recorded trace, s; `None` records nothing.
    pub record_interval: Option<f64>,
    /// Store the emitted pulse shape of each read.
    pub capture_pulse_shapes: bool,
}

impl PulseSequence {
    pub fn new(mut events: Vec<PulseEvent>, dt: f64, end_time: f64) -> Self {
        events.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.kind.cmp(&b.kind)));
        PulseSequence {
            events,
            trial_count: 1,
            dt,
            end_time,
            record_interval: None,
            capture_pulse_shapes: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(self.end_time >= 0.0) {
            return Err(Error::param("end_time", "must be non-negative"));
        }
        if self.trial_count == 0 {
            return Err(Error::param("trial_count", "must be at least 1"));
        }
        if self.events.windows(2).any(|w| w[1].start < w[0].start) {
            return Err(Error::param("events", "must be chronologically sorted"));
        }
        for e in &self.events {
            let pulse = matches!(e.kind, PulseKind::Pump | PulseKind::Write | PulseKind::Read);
            if pulse && !(e.duration > 0.0) {
                return Err(Error::param(
                    "duration",
                    format!(
                        "{:?} pulse at {:e} s needs a positive duration",
                        e.kind, e.start
                    ),
                ));
            }
        }
        for kind in [PulseKind::Pump, PulseKind::Write, PulseKind::Read] {
            let same: Vec<&PulseEvent> = self.events.iter().filter(|e| e.kind == kind).collect();
            if same.windows(2).any(|w| w[1].start < w[0].end() - 1e-15) {
                return Err(Error::param(
                    "events",
                    format!("overlapping {kind:?} pulses"),
                ));
            }
        }
        let mut on = false;
        for e in &self.events {
            match e.kind {
                PulseKind::AssistOn if on => {
                    return Err(Error::param("events", "assist switched on twice"))
                }
                PulseKind::AssistOff if !on => {
                    return Err(Error::param("events", "assist switched off while off"))
                }
                PulseKind::AssistOn => on = true,
                PulseKind::AssistOff => on = false,
                _ => {}
            }
        }
        for w in self.events.iter().filter(|e| e.kind == PulseKind::Write) {
            for p in self
                .events
                .iter()
                .filter(|e| e.kind == PulseKind::Pump && e.start <= w.start)
            {
                if w.start - p.end() < 100e-9 - 1e-12 {
                    return Err(Error::param(
                        "events",
                        "pump must end at least 100 ns before the write",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReadRecord {
    pub time: f64,
    /// Retrieved signal relative to the input pulse.
    pub efficiency: f64,
    /// Noise photons in the collected mode: retrievable assist noise plus
    /// the constant four-wave-mixing level.
    pub noise_photons: f64,
    /// Emitted power vs time relative to the read center (s, 1/s), when captured.
    pub pulse_shape: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeRecord {
    pub time: f64,
    pub retrieval: f64,
    pub excitations: f64,
    pub pop1: f64,
    pub transmission: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceResult {
    pub time_s: Vec<f64>,
    /// Non-destructive retrieval efficiency at each recorded time.
    pub retrieval: Vec<f64>,
    /// Stored excitation Σ|amp|² in input-pulse units.
    pub excitations: Vec<f64>,
    /// Signal-mode-weighted mean populations.
    pub pop1: Vec<f64>,
    pub pop2: Vec<f64>,
    /// Probe transmission exp(−OD·⟨pop2⟩_probe).
    pub transmission: Vec<f64>,
    /// Retrievable noise photons accumulated by the gain.
    pub noise_photons: Vec<f64>,
    pub reads: Vec<ReadRecord>,
    pub probes: Vec<ProbeRecord>,
    pub leaked_fraction: f64,
    /// Photons in the input signal pulse.
    pub input_photons: f64,
    pub budget: ExcitationBudget,
    /// Excitation left in the atoms at the end, input-pulse units.
    pub remaining: f64,
    pub trials: usize,
}

/// Runs all trials of a sequence and averages them in trial order.
///
/// Trial i samples its ensemble from `sub_seed(cfg.rng_seed, i)`.
pub fn run_sequence(seq: &PulseSequence, exp: &Experiment) -> Result<TraceResult> {
    seq.validate()?;
    exp.validate()?;
    let trials: Vec<Result<TraceResult>> = (0..seq.trial_count)
        .into_par_iter()
        .map(|i| {
            let mut cfg = exp.ensemble.clone();
            cfg.rng_seed = sub_seed(exp.ensemble.rng_seed, i as u64);
            run_trial(seq, exp, &cfg)
        })
        .collect();
    let trials: Vec<TraceResult> = trials.into_iter().collect::<Result<_>>()?;
    Ok(average(trials))
}

struct Runner<'a> {
    exp: &'a Experiment,
    ens: Ensemble,
    state: SpinWaveState,
    model: crate::regeneration::GainModel,
    pump_off: f64,
    out: TraceResult,
    tracker: Option<FrameTracker>,
}

impl<'a> Runner<'a> {
    fn reservoir_pop1(&self, t: f64) -> f64 {
        let m = &self.exp.memory;
        if t <= self.pump_off {
            return 1.0;
        }
        m.equilibrium_pop1
            + (1.0 - m.equilibrium_pop1) * (-(t - self.pump_off) / m.dark_lifetime).exp()
    }

    fn lose(&mut self, coherence: f64) {
        if self.state.is_written() {
            self.state.budget.lost += coherence / self.state.input_scale;
        }
    }

    fn pump(&mut self) {
        let beam = &self.exp.beams.pump;
        let floor = (-2.0f64).exp();
        let mut lost = 0.0;
        for a in self.ens.atoms.iter_mut() {
            if beam_weight(&a.position, beam) >= floor {
                lost += a.amp.norm_sqr();
                *a = Atom {
                    position: a.position,
                    velocity: a.velocity,
                    ..Atom::at_rest(a.position)
                };
            }
        }
        self.lose(lost);
    }

    /// Retrievable fraction of the incoherent noise: |interference sum|² over
    /// the illuminated atoms at the noise mismatch vector.
    fn noise_fraction(&self) -> f64 {
        let beam = &self.model.assist_beam;
        let floor = (-2.0f64).exp();
        let lit: Vec<_> = self
            .ens
            .atoms
            .iter()
            .filter(|a| beam_weight(&a.position, beam) >= floor)
            .map(|a| a.position)
            .collect();
        interference_sum(&lit, &self.model.noise_mismatch)
            .map(|s| s.norm_sqr())
            .unwrap_or(0.0)
    }

    fn populations(&self) -> (f64, f64) {
        let b = &self.exp.beams;
        let [w, wp1, pw, pwp2] = par_sum(&self.ens.atoms, |_, a| {
            let u = beam_weight(&a.position, &b.signal);
            let v = beam_weight(&a.position, &b.probe);
            [u, u * a.pop1, v, v * a.pop2]
        });
        let pop1 = if w > 0.0 { wp1 / w } else { 1.0 };
        let probe_pop2 = if pw > 0.0 { pwp2 / pw } else { 0.0 };
        (pop1, (-self.exp.memory.optical_depth * probe_pop2).exp())
    }

    fn retrieval(&mut self) -> f64 {
        self.state
            .refresh(&self.ens.atoms, &self.exp.vectors, &self.exp.beams.signal);
        self.state.collective_amp.norm_sqr()
    }

    fn record(&mut self, t: f64) {
        let re = self.retrieval();
        let (pop1, tp) = self.populations();
        let noise = self.state.noise.n_a * self.noise_fraction();
        let o = &mut self.out;
        o.time_s.push(t);
        o.retrieval.push(re);
        o.excitations.push(self.state.n_excitations);
        o.pop1.push(pop1);
        o.pop2.push(1.0 - pop1);
        o.transmission.push(tp);
        o.noise_photons.push(noise);
    }

    fn handle(&mut self, e: &PulseEvent, t: f64, capture: bool) -> Result<()> {
        let exp = self.exp;
        match e.kind {
            PulseKind::Pump => {}
            PulseKind::Write => {
                let eta = if e.strength > 0.0 {
                    exp.memory.write_efficiency
                } else {
                    0.0
                };
                let (state, leaked) = imprint_write(
                    &mut self.ens.atoms,
                    &exp.vectors,
                    &exp.beams.signal,
                    eta,
                    exp.memory.excitation_fraction,
                )?;
                let noise = self.state.noise;
                self.state = state;
                self.state.noise = noise;
                self.out.leaked_fraction = if e.strength > 0.0 { leaked } else { 0.0 };
            }
            PulseKind::AssistOn => self.model.assist_on = true,
            PulseKind::AssistOff => {
                self.model.assist_on = false;
                self.tracker = None;
                self.state.partner = Default::default();
                self.state.noise.end_partner();
            }
            PulseKind::Probe => {
                let re = self.retrieval();
                let (pop1, tp) = self.populations();
                self.out.probes.push(ProbeRecord {
                    time: t,
                    retrieval: re,
                    excitations: self.state.n_excitations,
                    pop1,
                    transmission: tp,
                });
            }
            PulseKind::Read => {
                let shape = if capture && self.state.is_written() {
                    let m = &exp.memory;
                    let step = m.pulse_width / 70.0;
                    let times: Vec<f64> = (-210..=210).map(|i| i as f64 * step).collect();
                    let p = read_emission_profile(
                        &self.ens.atoms,
                        &exp.vectors,
                        &exp.beams.signal,
                        &exp.beams.control,
                        &self.state,
                        m.read_depth,
                        m.pulse_width,
                        &times,
                    );
                    Some((times, p))
                } else {
                    None
                };
                let efficiency = read_out(
                    &mut self.ens.atoms,
                    &exp.vectors,
                    &exp.beams.signal,
                    &mut self.state,
                );
                let fraction = self.noise_fraction();
                let noise = self.state.noise.n_a * fraction;
                self.state.noise.n_a -= noise;
                self.out.reads.push(ReadRecord {
                    time: t,
                    efficiency,
                    noise_photons: if self.state.is_written() {
                        noise + exp.memory.fwm_photons
                    } else {
                        noise
                    },
                    pulse_shape: shape,
                });
            }
        }
        Ok(())
    }

    fn step(&mut self, t: f64, dt: f64) -> Result<()> {
        let m = &self.exp.memory;
        if !(m.dark_lifetime > 0.0) {
            return Err(Error::param("dark_lifetime", "must be positive"));
        }
        let (eq, decay) = (m.equilibrium_pop1, (-dt / m.dark_lifetime).exp());
        // atoms that stay relax in the same sweep; fresh ones below
        let (report, relaxed) =
            advance_ballistic_with(&mut self.ens, dt, |a| relax_atom(a, eq, decay))?;
        self.lose(report.lost_coherence);
        if let Some(tracker) = &mut self.tracker {
            tracker.advance(&self.ens.atoms, &report.replaced);
        }
        let fresh = self.reservoir_pop1(t);
        for &i in &report.replaced {
            let a = &mut self.ens.atoms[i];
            a.pop1 = fresh;
            a.pop2 = 1.0 - fresh;
            relax_atom(a, eq, decay);
        }
        self.lose(relaxed);
        if self.model.assist_on {
            let tracker = self.tracker.get_or_insert_with(|| {
                FrameTracker::new(
                    &self.ens.atoms,
                    &self.model.assist_beam,
                    Some(self.exp.vectors.delta_k),
                    dt,
                )
            });
            let (_, lost) = assist_tick_in(
                &mut self.ens.atoms,
                tracker.frame(),
                &mut self.state,
                &self.model,
                dt,
            )?;
            self.lose(lost);
        }
        Ok(())
    }
}

fn run_trial(seq: &PulseSequence, exp: &Experiment, cfg: &EnsembleConfig) -> Result<TraceResult> {
    let dt = seq.dt;
    let n_steps = (seq.end_time / dt).round() as usize;
    let step_of = |t: f64| (t / dt).round() as usize;
    let pumps: Vec<(usize, usize)> = seq
        .events
        .iter()
        .filter(|e| e.kind == PulseKind::Pump)
        .map(|e| (step_of(e.start), step_of(e.start + e.duration)))
        .collect();
    let mut runner = Runner {
        exp,
        ens: sample_ensemble(cfg)?,
        state: SpinWaveState::default(),
        model: GainModel {
            assist_on: false,
            ..exp.model.clone()
        },
        pump_off: 0.0,
        tracker: None,
        out: TraceResult {
            input_photons: exp.input_photons(),
            trials: 1,
            ..Default::default()
        },
    };
    let record_every = seq
        .record_interval
        .map(|r| ((r / dt).round() as usize).max(1));
    let mut next_event = 0;
    for k in 0..=n_steps {
        let t = k as f64 * dt;
        if let Some(&(_, stop)) = pumps.iter().find(|&&(start, stop)| k >= start && k < stop) {
            runner.pump();
            runner.pump_off = stop as f64 * dt;
        }
        while next_event < seq.events.len() && step_of(seq.events[next_event].start) <= k {
            runner.handle(&seq.events[next_event], t, seq.capture_pulse_shapes)?;
            next_event += 1;
        }
        if let Some(every) = record_every {
            if k % every == 0 {
                runner.record(t);
            }
        }
        if k == n_steps {
            break;
        }
        runner.step(t, dt)?;
    }
    runner.retrieval();
    runner.out.budget = runner.state.budget.clone();
    runner.out.remaining = runner.state.n_excitations;
    Ok(runner.out)
}

fn average(mut trials: Vec<TraceResult>) -> TraceResult {
    if trials.len() == 1 {
        return trials.pop().unwrap();
    }
    let n = trials.len() as f64;
    let mut acc = trials[0].clone();
    let add = |a: &mut Vec<f64>, b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    for t in &trials[1..] {
        add(&mut acc.retrieval, &t.retrieval);
        add(&mut acc.excitations, &t.excitations);
        add(&mut acc.pop1, &t.pop1);
        add(&mut acc.pop2, &t.pop2);
        add(&mut acc.transmission, &t.transmission);
        add(&mut acc.noise_photons, &t.noise_photons);
        for (r, s) in acc.reads.iter_mut().zip(&t.reads) {
            r.efficiency += s.efficiency;
            r.noise_photons += s.noise_photons;
            if let (Some((_, p)), Some((_, q))) = (&mut r.pulse_shape, &s.pulse_shape) {
                add(p, q);
            }
        }
        for (p, q) in acc.probes.iter_mut().zip(&t.probes) {
            p.retrieval += q.retrieval;
            p.excitations += q.excitations;
            p.pop1 += q.pop1;
            p.transmission += q.transmission;
        }
        acc.budget.retrieved += t.budget.retrieved;
        acc.budget.leaked += t.budget.leaked;
        acc.budget.lost += t.budget.lost;
        acc.remaining += t.remaining;
        acc.leaked_fraction += t.leaked_fraction;
    }
    let scale = |a: &mut Vec<f64>| a.iter_mut().for_each(|x| *x /= n);
    scale(&mut acc.retrieval);
    scale(&mut acc.excitations);
    scale(&mut acc.pop1);
    scale(&mut acc.pop2);
    scale(&mut acc.transmission);
    scale(&mut acc.noise_photons);
    for r in acc.reads.iter_mut() {
        r.efficiency /= n;
        r.noise_photons /= n;
        if let Some((_, p)) = &mut r.pulse_shape {
            scale(p);
        }
    }
    for p in acc.probes.iter_mut() {
        p.retrieval /= n;
        p.excitations /= n;
        p.pop1 /= n;
        p.transmission /= n;
    }
    acc.budget.retrieved /= n;
    acc.budget.leaked /= n;
    acc.budget.lost /= n;
    acc.remaining /= n;
    acc.leaked_fraction /= n;
    acc.trials = trials.len();
    acc
}

/// Photon energy hc/λ.
pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}
