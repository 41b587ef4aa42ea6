//! Per-step gain, depolarization and dark relaxation on the ensemble.
//!
//! The gain couples the phase-matched spin-wave mode to a partner mode, the
//! assisted photons scattered into the conjugate direction. Over a step the
//! pair (c, β) evolves under
//!
//! ```text
//! d/dt [c, β] = [[0, κ_eff], [κ_eff, −Γp]] · [c, β]
//! ```
//!
//! which with Γp = 0 is the two-mode transformation c → cosh·c + sinh·β. The
//! gain mode is m_j ∝ a_j·pop1_j·exp(iΔk·r_j) with a the illumination weight,
//! so the growth of c lands on lit atoms in |1⟩ with the stored phase, fresh
//! atoms included. κ_eff = κ·⟨pop1⟩_a / (1 + |c|²/n_sat), evaluated at the
//! step midpoint.
//!
//! Spontaneous noise is not added to the atoms. Its vacuum-seeded moments are
//! tracked separately from the same linear system.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ensemble::{lifted_pop1, Atom};
use crate::error::{Error, Result};
use crate::spinwave::{ModeFrame, SpinWaveState, WaveVectors};

use super::GainModel;

/// Largest allowed κ·dt.
pub const MAX_KAPPA_DT: f64 = 0.05;

/// Normally ordered moments ⟨a†a⟩, ⟨b†b⟩ and ⟨ab⟩ of the vacuum-seeded
/// noise in the spin-wave (a) and partner (b) modes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseMoments {
    pub n_a: f64,
    pub n_b: f64,
    pub x: f64,
}

impl NoiseMoments {
    fn rate(&self, kappa: f64, gamma: f64) -> [f64; 3] {
        [
            2.0 * kappa * self.x,
            2.0 * kappa * self.x - 2.0 * gamma * self.n_b,
            kappa * (self.n_a + self.n_b + 1.0) - gamma * self.x,
        ]
    }

    fn shifted(&self, d: [f64; 3], f: f64) -> Self {
        NoiseMoments {
            n_a: self.n_a + f * d[0],
            n_b: self.n_b + f * d[1],
            x: self.x + f * d[2],
        }
    }

    /// One RK4 step at constant κ and partner decay.
    pub fn step(&mut self, kappa: f64, gamma: f64, dt: f64) {
        if kappa == 0.0 && gamma == 0.0 {
            return;
        }
        let k1 = self.rate(kappa, gamma);
        let k2 = self.shifted(k1, 0.5 * dt).rate(kappa, gamma);
        let k3 = self.shifted(k2, 0.5 * dt).rate(kappa, gamma);
        let k4 = self.shifted(k3, dt).rate(kappa, gamma);
        for i in 0..3 {
            let d = dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            match i {
                0 => self.n_a += d,
                1 => self.n_b += d,
                _ => self.x += d,
            }
        }
    }

    /// The partner field vanishes with the assisted light.
    pub fn end_partner(&mut self) {
        self.n_b = 0.0;
        self.x = 0.0;
    }
}

/// exp(dt·[[0, κ], [κ, −Γ]]) as a row-major 2×2 matrix.
pub fn gain_propagator(kappa: f64, gamma: f64, dt: f64) -> [[f64; 2]; 2] {
    let mu = (0.25 * gamma * gamma + kappa * kappa).sqrt();
    let x = mu * dt;
    let (ch, shc) = if x < 1e-8 {
        (1.0, dt)
    } else {
        (x.cosh(), x.sinh() / mu)
    };
    let damp = (-0.5 * gamma * dt).exp();
    [
        [damp * (ch + 0.5 * gamma * shc), damp * kappa * shc],
        [damp * kappa * shc, damp * (ch - 0.5 * gamma * shc)],
    ]
}

fn propagate(m: &[[f64; 2]; 2], c: Complex64, b: Complex64) -> (Complex64, Complex64) {
    (c * m[0][0] + b * m[0][1], c * m[1][0] + b * m[1][1])
}

/// Diagnostics of one gain step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GainTick {
    pub kappa_eff: f64,
    /// Illumination-weighted mean pop1.
    pub mean_pop1: f64,
    /// Normalized gain-mode amplitude after the step.
    pub gain_mode_amp: Complex64,
}

/// Applies one step of parametric gain to the atoms and the state.
pub fn apply_gain_tick(
    atoms: &mut [Atom],
    state: &mut SpinWaveState,
    model: &GainModel,
    vectors: &WaveVectors,
    dt: f64,
) -> Result<GainTick> {
    if !model.assist_on || model.kappa == 0.0 || dt == 0.0 {
        return Ok(GainTick::default());
    }
    let frame = ModeFrame::new(atoms, vectors, &model.assist_beam);
    apply_gain_tick_in(atoms, &frame, state, model, dt)
}

/// `apply_gain_tick` on a precomputed frame of the assisted-light region.
pub fn apply_gain_tick_in(
    atoms: &mut [Atom],
    frame: &ModeFrame,
    state: &mut SpinWaveState,
    model: &GainModel,
    dt: f64,
) -> Result<GainTick> {
    gain_tick(atoms, frame, state, model, dt, None).map(|r| r.0)
}

/// Gain step followed by the depolarization of the same step, sharing the
/// write-back sweep over the frame when the gain has one. Returns the tick
/// and the Σ|amp|² removed by depolarization.
pub(crate) fn assist_tick_in(
    atoms: &mut [Atom],
    frame: &ModeFrame,
    state: &mut SpinWaveState,
    model: &GainModel,
    dt: f64,
) -> Result<(GainTick, f64)> {
    let depol =
        (model.assist_on && model.depol_rate != 0.0 && dt > 0.0).then_some(model.depol_rate * dt);
    let (tick, lost) = gain_tick(atoms, frame, state, model, dt, depol)?;
    match lost {
        Some(lost) => Ok((tick, lost)),
        None => Ok((tick, depolarize_tick_in(atoms, frame, model, dt)?)),
    }
}

/// The gain step. With `depol = Some(R·dt)` the write-back also depolarizes
/// each atom, and the removed coherence comes back as `Some`; `None` means
/// nothing was depolarized.
fn gain_tick(
    atoms: &mut [Atom],
    frame: &ModeFrame,
    state: &mut SpinWaveState,
    model: &GainModel,
    dt: f64,
    depol: Option<f64>,
) -> Result<(GainTick, Option<f64>)> {
    if !model.assist_on || model.kappa == 0.0 || dt == 0.0 {
        return Ok((GainTick::default(), None));
    }
    if dt < 0.0 {
        return Err(Error::param("dt", "must be non-negative"));
    }
    if model.kappa * dt > MAX_KAPPA_DT {
        return Err(Error::StepSize {
            product: model.kappa * dt,
            limit: MAX_KAPPA_DT,
        });
    }
    let [pre, pim, g2, sa, sap] = frame.sum(atoms, |k, a| {
        let w = frame.weight[k];
        let g = w * a.pop1;
        let p = a.amp * frame.phase[k].conj() * g;
        [p.re, p.im, g * g, w, w * a.pop1]
    });
    if sa == 0.0 {
        return Ok((GainTick::default(), None));
    }
    let gamma = model.partner_decay;
    let sat = model.saturation;
    let k_of = |pop1: f64, c: Complex64| model.kappa * pop1 / (1.0 + c.norm_sqr() / sat);

    let mut tick = GainTick {
        kappa_eff: k_of(sap / sa, Complex64::new(0.0, 0.0)),
        mean_pop1: sap / sa,
        gain_mode_amp: Complex64::new(0.0, 0.0),
    };
    let mut lost_depol = None;
    if state.is_written() && g2 > 0.0 {
        // Midpoint rule. The half-step predictor moves every atom along the
        // start-of-step mode and lifts its populations; κ_eff, the mode shape
        // g_j = w_j·pop1_j and the projection of the initial amplitudes are
        // then all taken at that midpoint, which keeps the step second order
        // while pop1 follows the growing coherence.
        let s = state.input_scale;
        let c0 = Complex64::new(pre, pim) / (g2 * s).sqrt();
        let beta = state.partner;
        let (c_half, _) = propagate(
            &gain_propagator(k_of(sap / sa, c0), gamma, 0.5 * dt),
            c0,
            beta,
        );
        let half = (c_half - c0) * (s / g2).sqrt();
        let mid_pop1 = |k: usize, a: &Atom| {
            let amp = a.amp + half * frame.phase[k] * (frame.weight[k] * a.pop1);
            lifted_pop1(a.pop1, a.pop2, amp.norm_sqr())
        };
        let [hre, him, ire, iim, gm2, sapm] = frame.sum(atoms, |k, a| {
            let w = frame.weight[k];
            let p1 = mid_pop1(k, a);
            let g = w * p1;
            let ph = frame.phase[k].conj() * g;
            let amp = a.amp + half * frame.phase[k] * (w * a.pop1);
            let h = amp * ph;
            let i = a.amp * ph;
            [h.re, h.im, i.re, i.im, g * g, w * p1]
        });
        let norm = (gm2 * s).sqrt();
        let c_mid = Complex64::new(hre, him) / norm;
        let c_start = Complex64::new(ire, iim) / norm;
        let k_mid = k_of(sapm / sa, c_mid);
        let (c_new, beta_new) = propagate(&gain_propagator(k_mid, gamma, dt), c_start, beta);
        // amp_j += (c' − c)·sqrt(S)·m_j with m_j = g_j e^{iΔk·r_j}/sqrt(Σg²)
        let coeff = (c_new - c_start) * (s / gm2).sqrt();
        let lost = frame.for_each_mut(atoms, |k, a| {
            let g = frame.weight[k] * mid_pop1(k, a);
            a.amp += coeff * frame.phase[k] * g;
            a.lift_populations();
            match depol {
                Some(rate) => depolarize_atom(a, rate * frame.weight[k]),
                None => 0.0,
            }
        });
        lost_depol = depol.map(|_| lost.iter().sum());
        state.partner = beta_new;
        tick.kappa_eff = k_mid;
        tick.mean_pop1 = sapm / sa;
        tick.gain_mode_amp = c_new;
    }
    state.noise.step(tick.kappa_eff, gamma, dt);
    Ok((tick, lost_depol))
}

/// Optical pumping |1⟩ → |2⟩ by the assisted light:
/// pop1 ← pop1·exp(−R·a·dt). Coherences that no longer fit the populations
/// are shortened; the removed Σ|amp|² is returned.
pub fn depolarize_tick(atoms: &mut [Atom], model: &GainModel, dt: f64) -> Result<f64> {
    if dt < 0.0 {
        return Err(Error::param("dt", "must be non-negative"));
    }
    if !model.assist_on || model.depol_rate == 0.0 || dt == 0.0 {
        return Ok(0.0);
    }
    let frame = ModeFrame::weights(atoms, &model.assist_beam);
    depolarize_tick_in(atoms, &frame, model, dt)
}

/// `depolarize_tick` on a precomputed frame of the assisted-light region.
pub fn depolarize_tick_in(
    atoms: &mut [Atom],
    frame: &ModeFrame,
    model: &GainModel,
    dt: f64,
) -> Result<f64> {
    if dt < 0.0 {
        return Err(Error::param("dt", "must be non-negative"));
    }
    if !model.assist_on || model.depol_rate == 0.0 || dt == 0.0 {
        return Ok(0.0);
    }
    let rate = model.depol_rate * dt;
    let lost = frame.for_each_mut(atoms, |k, a| depolarize_atom(a, rate * frame.weight[k]));
    Ok(lost.iter().sum())
}

fn depolarize_atom(a: &mut Atom, exponent: f64) -> f64 {
    a.pop1 *= (-exponent).exp();
    a.pop2 = 1.0 - a.pop1;
    clamp_coherence(a)
}

/// Hyperfine relaxation in the dark toward `equilibrium_pop1` with 1/e time
/// `lifetime`. Returns Σ|amp|² removed by the population bound.
pub fn relax_dark_tick(
    atoms: &mut [Atom],
    lifetime: f64,
    equilibrium_pop1: f64,
    dt: f64,
) -> Result<f64> {
    if !(lifetime > 0.0) {
        return Err(Error::param("lifetime", "must be positive"));
    }
    if dt == 0.0 {
        return Ok(0.0);
    }
    let decay = (-dt / lifetime).exp();
    let lost: Vec<f64> = atoms
        .par_chunks_mut(crate::par::CHUNK)
        .map(|chunk| {
            chunk
                .iter_mut()
                .map(|a| relax_atom(a, equilibrium_pop1, decay))
                .sum()
        })
        .collect();
    Ok(lost.iter().sum())
}

/// One dark-relaxation step with per-step factor `decay`; returns the
/// coherence removed by the population bound.
pub(crate) fn relax_atom(a: &mut Atom, equilibrium_pop1: f64, decay: f64) -> f64 {
    a.pop1 = equilibrium_pop1 + (a.pop1 - equilibrium_pop1) * decay;
    a.pop2 = 1.0 - a.pop1;
    if a.amp.re != 0.0 || a.amp.im != 0.0 {
        clamp_coherence(a)
    } else {
        0.0
    }
}

fn clamp_coherence(a: &mut Atom) -> f64 {
    let a2 = a.amp.norm_sqr();
    let limit = a.pop1 * a.pop2;
    if a2 <= limit {
        return 0.0;
    }
    a.amp *= (limit / a2).sqrt();
    a2 - limit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::BeamGeometry;
    use nalgebra::Vector3;

    #[test]
    fn propagator_without_decay_is_hyperbolic() {
        let m = gain_propagator(2.0, 0.0, 0.3);
        assert!((m[0][0] - 0.6f64.cosh()).abs() < 1e-15);
        assert!((m[0][1] - 0.6f64.sinh()).abs() < 1e-15);
        assert_eq!(gain_propagator(0.0, 0.0, 1.0), [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn propagator_composes() {
        let (k, g) = (3.0e6, 1.0e7);
        let one = gain_propagator(k, g, 2e-8);
        let half = gain_propagator(k, g, 1e-8);
        for i in 0..2 {
            for j in 0..2 {
                let two = half[i][0] * half[0][j] + half[i][1] * half[1][j];
                assert!((two - one[i][j]).abs() < 1e-14);
            }
        }
        let pure_decay = gain_propagator(0.0, g, 1e-7);
        assert!((pure_decay[1][1] - (-1.0f64).exp()).abs() < 1e-14);
        assert!(pure_decay[0][0] == 1.0 && pure_decay[0][1] == 0.0);
    }

    #[test]
    fn vacuum_noise_tracks_sinh_squared() {
        let mut n = NoiseMoments::default();
        let (k, dt) = (5e6, 5e-9);
        for _ in 0..200 {
            n.step(k, 0.0, dt);
        }
        let expected = (k * 200.0 * dt).sinh().powi(2);
        // RK4 global error ~ steps·(2κdt)^5/120 ≈ 5e-7
        assert!(
            (n.n_a / expected - 1.0).abs() < 2e-6,
            "{} vs {expected}",
            n.n_a
        );
    }

    #[test]
    fn depolarization_on_axis() {
        let model = GainModel {
            depol_rate: 1e5,
            ..GainModel::ideal(0.0, BeamGeometry::on_axis(240e-6))
        };
        let mut atoms = vec![Atom::at_rest(Vector3::zeros())];
        depolarize_tick(&mut atoms, &model, 10e-6).unwrap();
        assert!((atoms[0].pop1 - (-1.0f64).exp()).abs() < 1e-12);
        assert!((atoms[0].pop1 + atoms[0].pop2 - 1.0).abs() < 1e-12);
        let idle = GainModel::ideal(0.0, BeamGeometry::on_axis(240e-6));
        let mut atoms2 = vec![Atom::at_rest(Vector3::zeros())];
        depolarize_tick(&mut atoms2, &idle, 10e-6).unwrap();
        assert_eq!(atoms2[0].pop1, 1.0);
    }

    #[test]
    fn dark_relaxation_law() {
        let mut atoms = vec![Atom::at_rest(Vector3::zeros())];
        relax_dark_tick(&mut atoms, 18e-6, 7.0 / 16.0, 18e-6).unwrap();
        let expected = 7.0 / 16.0 + (9.0 / 16.0) * (-1.0f64).exp();
        assert!((atoms[0].pop1 - expected).abs() < 1e-14);
    }
}
