//! Collective spin wave carried by the per-atom coherences.
//!
//! The write imprints amp_j ∝ u_j·exp(iΔk·r_j) with u the signal-mode weight.
//! Retrieval projects the coherences onto the signal mode evaluated at the
//! current atom positions, so atoms leaving the beam or moving along Δk lose
//! overlap without any extra bookkeeping.
//!
//! Efficiencies are normalized by the input scale ε·Σu² fixed at the write,
//! where ε is the physical excitation probability of an on-axis atom for a
//! unit-efficiency write. Both numerator and denominator grow with the number
//! of sampled atoms, so results do not depend on it.

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::ensemble::{beam_weight, Atom, BeamGeometry, Beams, SpeciesConstants, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::par::{par_sum, CHUNK};
use crate::regeneration::NoiseMoments;

/// Weights below this are treated as zero in mode sums.
pub(crate) const WEIGHT_FLOOR: f64 = 1e-8;

/// Cutoff of a `FrameTracker`. The assisted light runs for tens of thousands
/// of steps, so its frame is kept tighter: the atoms left out carry about
/// 1e-4 of the depolarizing flux and 1e-8 of the gain-mode norm.
pub(crate) const TRACK_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct WaveVectors {
    pub k_s: Vector3<f64>,
    pub k_c: Vector3<f64>,
    pub k_a: Vector3<f64>,
    /// Stored spin-wave vector k_S − k_C.
    pub delta_k: Vector3<f64>,
}

impl WaveVectors {
    /// Signal and control along their beam axes, control one hyperfine
    /// splitting below the signal frequency, assisted beam along its own axis.
    pub fn new(species: &SpeciesConstants, beams: &Beams) -> Result<Self> {
        species.validate()?;
        let f_s = SPEED_OF_LIGHT / species.signal_wavelength;
        let f_c = f_s - species.hyperfine_splitting_freq;
        let k = |f: f64| 2.0 * PI * f / SPEED_OF_LIGHT;
        let k_s = beams.signal.axis * k(f_s);
        let k_c = beams.control.axis * k(f_c);
        let k_a = beams.assist.axis * (2.0 * PI / species.assist_wavelength);
        let v = WaveVectors {
            k_s,
            k_c,
            k_a,
            delta_k: k_s - k_c,
        };
        v.validate(species)?;
        Ok(v)
    }

    pub fn validate(&self, species: &SpeciesConstants) -> Result<()> {
        let expected = 2.0 * PI * species.hyperfine_splitting_freq / SPEED_OF_LIGHT;
        if ((self.delta_k.norm() - expected) / expected).abs() > 1e-3 {
            return Err(Error::param(
                "delta_k",
                "|k_S − k_C| must equal ω_hf/c within 0.1%",
            ));
        }
        Ok(())
    }

    /// Spontaneous Raman photon scattered forward along the signal axis, one
    /// hyperfine splitting below the assisted photon.
    pub fn forward_raman(&self) -> Vector3<f64> {
        let hf = self.delta_k.norm();
        self.k_s.normalize() * (self.k_a.norm() - hf)
    }

    /// (k_A − k_RA) − (k_S − k_C)
    pub fn mismatch_vector(&self, k_ra: &Vector3<f64>) -> Vector3<f64> {
        (self.k_a - k_ra) - self.delta_k
    }
}

/// What happened to the stored excitation, in input-pulse units.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExcitationBudget {
    pub retrieved: f64,
    pub leaked: f64,
    /// Coherence removed by escapes, depolarization or population limits.
    pub lost: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpinWaveState {
    /// ε·Σu² at the write; zero before any write.
    pub input_scale: f64,
    /// Normalized projection onto the read mode; |collective_amp|² is the
    /// current retrieval efficiency.
    pub collective_amp: Complex64,
    /// Σ|amp|² in input-pulse units.
    pub n_excitations: f64,
    /// Partner amplitude of the parametric gain, normalized like `collective_amp`.
    pub partner: Complex64,
    /// Vacuum-seeded noise moments, in absolute excitation numbers.
    pub noise: NoiseMoments,
    pub budget: ExcitationBudget,
}

impl SpinWaveState {
    pub fn is_written(&self) -> bool {
        self.input_scale > 0.0
    }

    /// Recomputes `collective_amp` and `n_excitations` from the atoms.
    pub fn refresh(&mut self, atoms: &[Atom], vectors: &WaveVectors, read_beam: &BeamGeometry) {
        if !self.is_written() {
            return;
        }
        let ov = mode_overlap(atoms, vectors, read_beam);
        self.collective_amp = ov.normalized(self.input_scale);
        self.n_excitations = total_coherence(atoms) / self.input_scale;
    }
}

/// Projection Σ u_j exp(−iΔk·r_j) amp_j and the mode norm Σ u_j².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeOverlap {
    pub projection: Complex64,
    pub weight_sq: f64,
}

impl ModeOverlap {
    pub fn normalized(&self, input_scale: f64) -> Complex64 {
        if self.weight_sq <= 0.0 || input_scale <= 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.projection / (self.weight_sq * input_scale).sqrt()
        }
    }
}

pub fn mode_overlap(atoms: &[Atom], vectors: &WaveVectors, beam: &BeamGeometry) -> ModeOverlap {
    ModeFrame::new(atoms, vectors, beam).overlap(atoms)
}

/// The atoms inside a beam, with their weight u and spin-wave phase
/// exp(iΔk·r), for one set of positions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModeFrame {
    pub index: Vec<u32>,
    pub weight: Vec<f64>,
    pub phase: Vec<Complex64>,
}

impl ModeFrame {
    pub fn new(atoms: &[Atom], vectors: &WaveVectors, beam: &BeamGeometry) -> Self {
        Self::build(atoms, beam, Some(&vectors.delta_k))
    }

    /// Weights only; every phase is 1.
    pub fn weights(atoms: &[Atom], beam: &BeamGeometry) -> Self {
        Self::build(atoms, beam, None)
    }

    fn build(atoms: &[Atom], beam: &BeamGeometry, delta_k: Option<&Vector3<f64>>) -> Self {
        let cut = beam.cutoff_radius_sq(WEIGHT_FLOOR);
        let w2 = beam.waist * beam.waist;
        let parts: Vec<(Vec<u32>, Vec<f64>, Vec<Complex64>)> = atoms
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let (mut idx, mut weight, mut phase) = (Vec::new(), Vec::new(), Vec::new());
                for (k, a) in chunk.iter().enumerate() {
                    let r2 = beam.transverse_distance_sq(&a.position);
                    if r2 > cut {
                        continue;
                    }
                    idx.push((c * CHUNK + k) as u32);
                    weight.push((-2.0 * r2 / w2).exp());
                    phase.push(match delta_k {
                        Some(dk) => Complex64::from_polar(1.0, dk.dot(&a.position)),
                        None => Complex64::new(1.0, 0.0),
                    });
                }
                (idx, weight, phase)
            })
            .collect();
        let mut frame = ModeFrame::default();
        for (idx, weight, phase) in parts {
            frame.index.extend(idx);
            frame.weight.extend(weight);
            frame.phase.extend(phase);
        }
        frame
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Σ u_j exp(−iΔk·r_j) amp_j and Σ u_j².
    pub fn overlap(&self, atoms: &[Atom]) -> ModeOverlap {
        let [re, im, w2] = par_sum(&self.index, |k, &i| {
            let u = self.weight[k];
            let p = atoms[i as usize].amp * self.phase[k].conj() * u;
            [p.re, p.im, u * u]
        });
        ModeOverlap {
            projection: Complex64::new(re, im),
            weight_sq: w2,
        }
    }

    /// Sums of f(entry, atom) over the frame.
    pub(crate) fn sum<const K: usize>(
        &self,
        atoms: &[Atom],
        f: impl Fn(usize, &Atom) -> [f64; K] + Sync,
    ) -> [f64; K] {
        par_sum(&self.index, |k, &i| f(k, &atoms[i as usize]))
    }

    /// Calls f(entry, atom) on every atom of the frame, in entry order.
    pub(crate) fn for_each_mut<R>(
        &self,
        atoms: &mut [Atom],
        mut f: impl FnMut(usize, &mut Atom) -> R,
    ) -> Vec<R> {
        self.index
            .iter()
            .enumerate()
            .map(|(k, &i)| f(k, &mut atoms[i as usize]))
            .collect()
    }
}

const NO_SLOT: u32 = u32::MAX;

/// A `ModeFrame` carried along ballistic trajectories, so that per-step work
/// scales with the atoms near the beam instead of the whole sample.
///
/// On a straight line the squared transverse distance is quadratic in time:
/// each weight advances by a ratio that itself changes by a fixed factor per
/// step, and each phase by a fixed rotation. The frame holds every atom
/// within the cutoff plus a margin of half a waist, and is rebuilt before
/// the fastest atom could have crossed that margin.
pub(crate) struct FrameTracker {
    beam: BeamGeometry,
    delta_k: Option<Vector3<f64>>,
    dt: f64,
    frame: ModeFrame,
    ratio: Vec<f64>,
    ratio_step: Vec<f64>,
    rotation: Vec<Complex64>,
    slot: Vec<u32>,
    reach_sq: f64,
    margin: f64,
    travel: f64,
    v_max: f64,
}

struct Entry {
    weight: f64,
    ratio: f64,
    ratio_step: f64,
    phase: Complex64,
    rotation: Complex64,
}

impl FrameTracker {
    /// Tracker for steps of `dt`; `delta_k` None gives unit phases.
    pub(crate) fn new(
        atoms: &[Atom],
        beam: &BeamGeometry,
        delta_k: Option<Vector3<f64>>,
        dt: f64,
    ) -> Self {
        let margin = 0.5 * beam.waist;
        let reach = beam.cutoff_radius_sq(TRACK_FLOOR).sqrt() + margin;
        let mut t = FrameTracker {
            beam: beam.clone(),
            delta_k,
            dt,
            frame: ModeFrame::default(),
            ratio: Vec::new(),
            ratio_step: Vec::new(),
            rotation: Vec::new(),
            slot: Vec::new(),
            reach_sq: reach * reach,
            margin,
            travel: 0.0,
            v_max: 0.0,
        };
        t.rebuild(atoms);
        t
    }

    pub(crate) fn frame(&self) -> &ModeFrame {
        &self.frame
    }

    fn entry(&self, a: &Atom) -> Entry {
        let ax = &self.beam.axis;
        let d = a.position - self.beam.transverse_offset;
        let d = d - ax * d.dot(ax);
        let v = a.velocity - ax * a.velocity.dot(ax);
        let s = -2.0 / (self.beam.waist * self.beam.waist);
        let b = d.dot(&v) * self.dt;
        let c = v.norm_squared() * self.dt * self.dt;
        let (phase, rotation) = match &self.delta_k {
            Some(dk) => (
                Complex64::from_polar(1.0, dk.dot(&a.position)),
                Complex64::from_polar(1.0, dk.dot(&a.velocity) * self.dt),
            ),
            None => (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
        };
        Entry {
            weight: (s * d.norm_squared()).exp(),
            ratio: (s * (2.0 * b + c)).exp(),
            ratio_step: (2.0 * s * c).exp(),
            phase,
            rotation,
        }
    }

    fn push(&mut self, i: usize, e: Entry) {
        self.slot[i] = self.frame.index.len() as u32;
        self.frame.index.push(i as u32);
        self.frame.weight.push(e.weight);
        self.frame.phase.push(e.phase);
        self.ratio.push(e.ratio);
        self.ratio_step.push(e.ratio_step);
        self.rotation.push(e.rotation);
    }

    fn set(&mut self, k: usize, e: Entry) {
        self.frame.weight[k] = e.weight;
        self.frame.phase[k] = e.phase;
        self.ratio[k] = e.ratio;
        self.ratio_step[k] = e.ratio_step;
        self.rotation[k] = e.rotation;
    }

    fn rebuild(&mut self, atoms: &[Atom]) {
        let reach_sq = self.reach_sq;
        let beam = &self.beam;
        let parts: Vec<(Vec<usize>, f64)> = atoms
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut idx = Vec::new();
                let mut v2: f64 = 0.0;
                for (k, a) in chunk.iter().enumerate() {
                    v2 = v2.max(a.velocity.norm_squared());
                    if beam.transverse_distance_sq(&a.position) <= reach_sq {
                        idx.push(c * CHUNK + k);
                    }
                }
                (idx, v2)
            })
            .collect();
        self.frame = ModeFrame::default();
        self.ratio.clear();
        self.ratio_step.clear();
        self.rotation.clear();
        self.slot = vec![NO_SLOT; atoms.len()];
        self.v_max = parts.iter().map(|p| p.1).fold(0.0, f64::max).sqrt();
        self.travel = 0.0;
        let members: Vec<usize> = parts.into_iter().flat_map(|p| p.0).collect();
        let entries: Vec<Entry> = members.par_iter().map(|&i| self.entry(&atoms[i])).collect();
        for (i, e) in members.into_iter().zip(entries) {
            self.push(i, e);
        }
    }

    /// Follows the atoms through one ballistic step of `dt`; `replaced`
    /// lists the atoms re-injected during it.
    pub(crate) fn advance(&mut self, atoms: &[Atom], replaced: &[usize]) {
        for k in 0..self.frame.len() {
            self.frame.weight[k] *= self.ratio[k];
            self.ratio[k] *= self.ratio_step[k];
            self.frame.phase[k] *= self.rotation[k];
        }
        for &i in replaced {
            let a = &atoms[i];
            self.v_max = self.v_max.max(a.velocity.norm());
            let e = self.entry(a);
            if self.slot[i] != NO_SLOT {
                self.set(self.slot[i] as usize, e);
            } else if self.beam.transverse_distance_sq(&a.position) <= self.reach_sq {
                self.push(i, e);
            }
        }
        self.travel += self.v_max * self.dt;
        if self.travel + self.v_max * self.dt > self.margin {
            self.rebuild(atoms);
        }
    }
}

pub(crate) fn total_coherence(atoms: &[Atom]) -> f64 {
    par_sum(atoms, |_, a| [a.amp.norm_sqr()])[0]
}

/// c / f, the spin-wave wavelength 2π/|Δk|.
pub fn spinwave_wavelength(species: &SpeciesConstants) -> Result<f64> {
    if !(species.hyperfine_splitting_freq > 0.0) {
        return Err(Error::param("hyperfine_splitting_freq", "must be positive"));
    }
    Ok(SPEED_OF_LIGHT / species.hyperfine_splitting_freq)
}

/// Maps the signal pulse onto the atoms. Returns the new state and the leaked
/// fraction 1 − write_efficiency.
///
/// Each atom gains amp = sqrt(η·ε)·u·exp(iΔk·r), where ε is the excitation
/// probability of an on-axis atom per unit write efficiency; populations are
/// lifted as needed to carry that coherence.
pub fn imprint_write(
    atoms: &mut [Atom],
    vectors: &WaveVectors,
    signal_beam: &BeamGeometry,
    write_efficiency: f64,
    excitation_fraction: f64,
) -> Result<(SpinWaveState, f64)> {
    if !(0.0..=1.0).contains(&write_efficiency) {
        return Err(Error::param("write_efficiency", "must lie in [0, 1]"));
    }
    if !(excitation_fraction > 0.0 && excitation_fraction <= 0.25) {
        return Err(Error::param("excitation_fraction", "must lie in (0, 0.25]"));
    }
    let cut = signal_beam.cutoff_radius_sq(WEIGHT_FLOOR);
    let [w2, wmax] = par_sum(atoms, |_, a| {
        let u = beam_weight(&a.position, signal_beam);
        [u * u, if u > 1e-6 { 1.0 } else { 0.0 }]
    });
    if wmax == 0.0 {
        return Err(Error::DegenerateGeometry(
            "no atom inside the signal mode".into(),
        ));
    }
    let scale = (write_efficiency * excitation_fraction).sqrt();
    if scale > 0.0 {
        atoms.par_iter_mut().for_each(|a| {
            let r2 = signal_beam.transverse_distance_sq(&a.position);
            if r2 > cut {
                return;
            }
            let u = (-2.0 * r2 / (signal_beam.waist * signal_beam.waist)).exp();
            a.amp += Complex64::from_polar(scale * u, vectors.delta_k.dot(&a.position));
            a.lift_populations();
        });
    }
    let input_scale = excitation_fraction * w2;
    let mut state = SpinWaveState {
        input_scale,
        ..Default::default()
    };
    state.budget.leaked = 1.0 - write_efficiency;
    state.refresh(atoms, vectors, signal_beam);
    Ok((state, 1.0 - write_efficiency))
}

/// Frozen-position equivalent of motion: rotates each coherence by
/// exp(−iΔk·v dt), the phase the read mode accumulates relative to the atom
/// over dt. A negative dt undoes a previous tick.
pub fn dephase_tick(atoms: &mut [Atom], vectors: &WaveVectors, dt: f64) {
    atoms.par_iter_mut().for_each(|a| {
        if a.amp.norm_sqr() > 0.0 {
            a.amp *= Complex64::from_polar(1.0, -vectors.delta_k.dot(&a.velocity) * dt);
        }
    });
}

/// Current retrieval efficiency |⟨m|amp⟩|²/input_scale against the read mode,
/// without disturbing the state.
pub fn retrieval_efficiency(
    atoms: &[Atom],
    vectors: &WaveVectors,
    read_beam: &BeamGeometry,
    state: &SpinWaveState,
) -> f64 {
    if !state.is_written() {
        return 0.0;
    }
    mode_overlap(atoms, vectors, read_beam)
        .normalized(state.input_scale)
        .norm_sqr()
}

/// Complete read: removes the read-mode component from the coherences and
/// returns the retrieved efficiency.
pub fn read_out(
    atoms: &mut [Atom],
    vectors: &WaveVectors,
    read_beam: &BeamGeometry,
    state: &mut SpinWaveState,
) -> f64 {
    if !state.is_written() {
        return 0.0;
    }
    let frame = ModeFrame::new(atoms, vectors, read_beam);
    let ov = frame.overlap(atoms);
    if ov.weight_sq <= 0.0 {
        return 0.0;
    }
    let efficiency = ov.normalized(state.input_scale).norm_sqr();
    let coeff = ov.projection / ov.weight_sq;
    frame.for_each_mut(atoms, |k, a| {
        a.amp -= coeff * frame.phase[k] * frame.weight[k];
        a.lift_populations();
    });
    state.budget.retrieved += efficiency;
    state.refresh(atoms, vectors, read_beam);
    efficiency
}

/// (1/N) Σ_j exp(i q·r_j)
pub fn interference_sum(positions: &[Vector3<f64>], q: &Vector3<f64>) -> Result<Complex64> {
    if positions.is_empty() {
        return Err(Error::param("positions", "need at least one position"));
    }
    let [re, im] = par_sum(positions, |_, r| {
        let (s, c) = q.dot(r).sin_cos();
        [c, s]
    });
    Ok(Complex64::new(re, im) / positions.len() as f64)
}

/// |(k_A − k_RA) − (k_S − k_C)|
pub fn momentum_mismatch(vectors: &WaveVectors, k_ra: &Vector3<f64>) -> f64 {
    vectors.mismatch_vector(k_ra).norm()
}

/// Temporal shape of the signal emitted by a read pulse, sampled at `times`
/// relative to the pulse center and scaled so its integral equals the
/// retrieved efficiency.
///
/// Each atom converts at a rate set by the local control intensity: with
/// envelope f(t) of unit area and cumulative F(t), atom j radiates
/// sqrt(D·w_j·f)·exp(−D·w_j·F/2) into the collected mode, where w_j is the
/// control weight and D the read depth on axis. A spin wave spread across
/// regions of different control intensity therefore gives a distorted pulse.
pub fn read_emission_profile(
    atoms: &[Atom],
    vectors: &WaveVectors,
    read_beam: &BeamGeometry,
    control_beam: &BeamGeometry,
    state: &SpinWaveState,
    depth: f64,
    fwhm: f64,
    times: &[f64],
) -> Vec<f64> {
    if !state.is_written() || times.is_empty() {
        return vec![0.0; times.len()];
    }
    let cut = read_beam.cutoff_radius_sq(WEIGHT_FLOOR);
    let sources: Vec<(Complex64, f64)> = atoms
        .iter()
        .filter_map(|a| {
            let r2 = read_beam.transverse_distance_sq(&a.position);
            if r2 > cut || a.amp.norm_sqr() == 0.0 {
                return None;
            }
            let u = (-2.0 * r2 / (read_beam.waist * read_beam.waist)).exp();
            let c = a.amp * Complex64::from_polar(u, -vectors.delta_k.dot(&a.position));
            Some((c, beam_weight(&a.position, control_beam)))
        })
        .collect();
    let sigma = fwhm / (8.0 * 2f64.ln()).sqrt();
    let power: Vec<f64> = times
        .iter()
        .map(|&t| {
            let f = (-0.5 * (t / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt());
            let big_f = 0.5 * (1.0 + erf(t / (sigma * 2f64.sqrt())));
            let field: Complex64 = sources
                .iter()
                .map(|&(c, w)| c * ((depth * w * f).sqrt() * (-0.5 * depth * w * big_f).exp()))
                .sum();
            field.norm_sqr()
        })
        .collect();
    let area = trapezoid(times, &power);
    let efficiency = retrieval_efficiency(atoms, vectors, read_beam, state);
    if area <= 0.0 {
        return vec![0.0; times.len()];
    }
    power.into_iter().map(|p| p * efficiency / area).collect()
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Error function, Abramowitz–Stegun 7.1.26 (absolute error below 1.5e-7).
pub(crate) fn erf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736
                + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let y = 1.0 - poly * (-x * x).exp();
    if x >= 0.0 {
        y
    } else {
        -y
    }
}
