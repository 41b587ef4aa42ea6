//! Thermal atomic ensemble in a cylindrical vapor cell.
//!
//! Atoms move ballistically. An atom that leaves the simulated region is
//! replaced by a fresh one entering through the boundary with the flux-weighted
//! thermal velocity of a thermalizing wall, so a uniform Maxwellian gas stays
//! uniform and Maxwellian.
//!
//! The simulated region is a coaxial cylinder of radius
//! `min(sampling_radius, cell_radius)` spanning the full cell length. Because
//! motion is collisionless, an atom that crosses this surface cannot come back
//! without hitting the wall first. Simulating only the core of the cell is
//! therefore exact, provided the protocol gives entering atoms the populations
//! of the unsimulated remainder.

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par::CHUNK;

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Species data. The hyperfine splitting is ω_hf/2π in Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeciesConstants {
    pub atomic_mass: f64,
    pub hyperfine_splitting_freq: f64,
    pub signal_wavelength: f64,
    pub assist_wavelength: f64,
}

impl SpeciesConstants {
    /// ¹³³Cs on the D2 line with an assisted beam near D1.
    pub fn cesium() -> Self {
        SpeciesConstants {
            atomic_mass: 2.207e-25,
            hyperfine_splitting_freq: 9.192_631_770e9,
            signal_wavelength: 852.3e-9,
            assist_wavelength: 894.6e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("atomic_mass", self.atomic_mass)?;
        positive("hyperfine_splitting_freq", self.hyperfine_splitting_freq)?;
        positive("signal_wavelength", self.signal_wavelength)?;
        positive("assist_wavelength", self.assist_wavelength)?;
        if self.assist_wavelength == self.signal_wavelength {
            return Err(Error::param(
                "assist_wavelength",
                "must differ from signal_wavelength",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub n_atoms: usize,
    /// K
    pub temperature: f64,
    /// m
    pub cell_length: f64,
    /// m
    pub cell_radius: f64,
    /// Radius of the simulated core, m. Values at or above `cell_radius`
    /// simulate the whole cell.
    pub sampling_radius: f64,
    pub species: SpeciesConstants,
    pub rng_seed: u64,
}

impl EnsembleConfig {
    /// Cs at 72 °C in the 75 mm cell, full-cell sampling.
    pub fn cesium_cell(n_atoms: usize, rng_seed: u64) -> Self {
        EnsembleConfig {
            n_atoms,
            temperature: 345.15,
            cell_length: 75e-3,
            cell_radius: 10e-3,
            sampling_radius: 10e-3,
            species: SpeciesConstants::cesium(),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::param("n_atoms", "must be at least 1"));
        }
        positive("temperature", self.temperature)?;
        positive("cell_length", self.cell_length)?;
        positive("cell_radius", self.cell_radius)?;
        positive("sampling_radius", self.sampling_radius)?;
        self.species.validate()
    }

    /// Radius of the region that is actually simulated.
    pub fn region_radius(&self) -> f64 {
        self.sampling_radius.min(self.cell_radius)
    }

    pub fn region_volume(&self) -> f64 {
        PI * self.region_radius().powi(2) * self.cell_length
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let r = self.region_radius();
        p.x * p.x + p.y * p.y <= r * r && p.z.abs() <= 0.5 * self.cell_length
    }

    /// One-dimensional thermal velocity spread sqrt(kT/m).
    pub fn velocity_sigma(&self) -> f64 {
        (BOLTZMANN * self.temperature / self.species.atomic_mass).sqrt()
    }
}

/// One simulated atom. `amp` is the ground-state coherence ρ₁₂ in the atom frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub pop1: f64,
    pub pop2: f64,
    pub amp: Complex64,
}

impl Atom {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Atom {
            position,
            velocity: Vector3::zeros(),
            pop1: 1.0,
            pop2: 0.0,
            amp: Complex64::new(0.0, 0.0),
        }
    }

    /// Moves population to |2⟩ if needed so that |amp|² ≤ pop1·pop2 holds,
    /// as for a pure state carrying this coherence.
    pub(crate) fn lift_populations(&mut self) {
        let a2 = self.amp.norm_sqr();
        if self.pop1 * self.pop2 >= a2 {
            return;
        }
        self.pop1 = lifted_pop1(self.pop1, self.pop2, a2);
        self.pop2 = 1.0 - self.pop1;
        if self.amp.norm_sqr() > self.pop1 * self.pop2 {
            self.amp *= (self.pop1 * self.pop2).sqrt() / self.amp.norm();
        }
    }
}

/// pop1 after `Atom::lift_populations` for a coherence of squared size `a2`.
pub(crate) fn lifted_pop1(pop1: f64, pop2: f64, a2: f64) -> f64 {
    if pop1 * pop2 >= a2 {
        return pop1;
    }
    let minor = 0.5 * (1.0 - (1.0 - 4.0 * a2.min(0.25)).sqrt());
    // keep the majority level on the side it already is
    if pop1 >= 0.5 {
        1.0 - minor
    } else {
        minor
    }
}

/// Gaussian beam. `transverse_offset` is a point the axis passes through.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamGeometry {
    pub axis: Vector3<f64>,
    pub waist: f64,
    pub transverse_offset: Vector3<f64>,
    pub tilt_angle: f64,
}

impl BeamGeometry {
    /// Beam along +z through the origin.
    pub fn on_axis(waist: f64) -> Self {
        BeamGeometry {
            axis: Vector3::z(),
            waist,
            transverse_offset: Vector3::zeros(),
            tilt_angle: 0.0,
        }
    }

    /// Beam displaced by `offset` along x and tilted by `tilt` in the x–z plane.
    pub fn tilted(waist: f64, offset: f64, tilt: f64) -> Self {
        BeamGeometry {
            axis: Vector3::new(tilt.sin(), 0.0, tilt.cos()),
            waist,
            transverse_offset: Vector3::new(offset, 0.0, 0.0),
            tilt_angle: tilt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.axis.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::param("axis", "must be a unit vector"));
        }
        positive("waist", self.waist)?;
        let angle = self.axis.z.clamp(-1.0, 1.0).acos();
        if (angle - self.tilt_angle.abs()).abs() > 1e-9 {
            return Err(Error::param(
                "tilt_angle",
                "inconsistent with axis direction",
            ));
        }
        Ok(())
    }

    /// Squared distance from `p` to the beam axis.
    #[inline]
    pub fn transverse_distance_sq(&self, p: &Vector3<f64>) -> f64 {
        let d = p - self.transverse_offset;
        let along = d.dot(&self.axis);
        (d.norm_squared() - along * along).max(0.0)
    }

    /// Squared radius beyond which the weight is below `floor`.
    pub fn cutoff_radius_sq(&self, floor: f64) -> f64 {
        -0.5 * self.waist * self.waist * floor.ln()
    }
}

/// The optical beams of the experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Beams {
    pub signal: BeamGeometry,
    pub control: BeamGeometry,
    /// The directly applied assisted laser.
    pub assist: BeamGeometry,
    /// Region lit by the scattered assisted photons at the spin wave.
    pub illumination: BeamGeometry,
    pub pump: BeamGeometry,
    pub probe: BeamGeometry,
}

impl Beams {
    /// Waists and assisted-beam placement of the reference setup.
    pub fn reference() -> Self {
        Beams {
            signal: BeamGeometry::on_axis(240e-6),
            control: BeamGeometry::on_axis(300e-6),
            assist: BeamGeometry::tilted(190e-6, 1e-3, 4e-3),
            illumination: BeamGeometry::on_axis(240e-6),
            pump: BeamGeometry::on_axis(5e-3),
            probe: BeamGeometry::on_axis(240e-6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for b in [
            &self.signal,
            &self.control,
            &self.assist,
            &self.illumination,
            &self.pump,
            &self.probe,
        ] {
            b.validate()?;
        }
        Ok(())
    }
}

/// Gaussian intensity weight exp(−2r²/w²).
#[inline]
pub fn beam_weight(position: &Vector3<f64>, beam: &BeamGeometry) -> f64 {
    (-2.0 * beam.transverse_distance_sq(position) / (beam.waist * beam.waist)).exp()
}

/// Mean speed sqrt(8kT/(πm)).
pub fn mean_thermal_speed(species: &SpeciesConstants, temperature: f64) -> Result<f64> {
    positive("temperature", temperature)?;
    Ok((8.0 * BOLTZMANN * temperature / (PI * species.atomic_mass)).sqrt())
}

/// Atoms plus the per-atom respawn counters that key replacement randomness.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub atoms: Vec<Atom>,
    pub config: EnsembleConfig,
    respawns: Vec<u32>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Builds an ensemble from explicit atoms, e.g. for hand-made test states.
    pub fn from_atoms(atoms: Vec<Atom>, config: EnsembleConfig) -> Self {
        let respawns = vec![0; atoms.len()];
        Ensemble {
            atoms,
            config,
            respawns,
        }
    }
}

/// Outcome of one ballistic step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BallisticReport {
    /// Indices of replaced atoms, ascending.
    pub replaced: Vec<usize>,
    /// Σ|amp|² carried out of the region by the escaped atoms.
    pub lost_coherence: f64,
}

/// Uniform positions, Maxwellian velocities, everyone in |1⟩.
pub fn sample_ensemble(cfg: &EnsembleConfig) -> Result<Ensemble> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let sigma = cfg.velocity_sigma();
    let radius = cfg.region_radius();
    let atoms = (0..cfg.n_atoms)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            let z = cfg.cell_length * (rng.random::<f64>() - 0.5);
            let v = Vector3::new(
                sigma * rng.sample::<f64, _>(StandardNormal),
                sigma * rng.sample::<f64, _>(StandardNormal),
                sigma * rng.sample::<f64, _>(StandardNormal),
            );
            Atom {
                velocity: v,
                ..Atom::at_rest(Vector3::new(r * phi.cos(), r * phi.sin(), z))
            }
        })
        .collect();
    Ok(Ensemble::from_atoms(atoms, cfg.clone()))
}

/// Moves every atom by v·dt and replaces the ones that left the region.
pub fn advance_ballistic(ens: &mut Ensemble, dt: f64) -> Result<BallisticReport> {
    advance_ballistic_with(ens, dt, |_| 0.0).map(|r| r.0)
}

/// `advance_ballistic` that also applies `update` to every atom staying in
/// the region, in the same sweep; returns the sum of its results.
pub(crate) fn advance_ballistic_with<F>(
    ens: &mut Ensemble,
    dt: f64,
    update: F,
) -> Result<(BallisticReport, f64)>
where
    F: Fn(&mut Atom) -> f64 + Sync,
{
    if !(dt >= 0.0) {
        return Err(Error::param("dt", "must be non-negative"));
    }
    let cfg = &ens.config;
    let seed = cfg.rng_seed;
    let (r2_max, half) = (cfg.region_radius().powi(2), 0.5 * cfg.cell_length);
    let chunks: Vec<(Vec<(usize, f64)>, f64)> = ens
        .atoms
        .par_chunks_mut(CHUNK)
        .zip(ens.respawns.par_chunks_mut(CHUNK))
        .enumerate()
        .map(|(c, (atoms, counts))| {
            let mut out = Vec::new();
            let mut extra = 0.0;
            for (k, (atom, count)) in atoms.iter_mut().zip(counts.iter_mut()).enumerate() {
                let p = &mut atom.position;
                let v = &atom.velocity;
                p.x += v.x * dt;
                p.y += v.y * dt;
                p.z += v.z * dt;
                if p.x * p.x + p.y * p.y <= r2_max && p.z.abs() <= half {
                    extra += update(atom);
                    continue;
                }
                let i = c * CHUNK + k;
                let lost = atom.amp.norm_sqr();
                let mut rng = respawn_rng(seed, i, *count);
                *count += 1;
                *atom = replace_escaped(atom, cfg, &mut rng).expect("atom is out of bounds");
                out.push((i, lost));
            }
            (out, extra)
        })
        .collect();
    let extra = chunks.iter().map(|c| c.1).sum();
    let escapes: Vec<(usize, f64)> = chunks.into_iter().flat_map(|c| c.0).collect();
    let lost_coherence = escapes.iter().map(|e| e.1).sum();
    let report = BallisticReport {
        replaced: escapes.into_iter().map(|e| e.0).collect(),
        lost_coherence,
    };
    Ok((report, extra))
}

/// A fresh atom entering through a uniformly chosen boundary point with the
/// flux-weighted thermal velocity (Rayleigh normal component, Gaussian
/// tangential components), pop1 = 1 and no coherence.
pub fn replace_escaped<R: Rng + ?Sized>(
    atom: &Atom,
    cfg: &EnsembleConfig,
    rng: &mut R,
) -> Result<Atom> {
    if cfg.contains(&atom.position) {
        return Err(Error::Contract(
            "replace_escaped called on an in-bounds atom".into(),
        ));
    }
    let radius = cfg.region_radius();
    let half = 0.5 * cfg.cell_length;
    let inset = 1.0 - 1e-12;
    let side_area = 2.0 * PI * radius * cfg.cell_length;
    let cap_area = 2.0 * PI * radius * radius;
    let phi = 2.0 * PI * rng.random::<f64>();
    let (c, s) = (phi.cos(), phi.sin());
    let (position, normal, t1, t2) = if rng.random::<f64>() * (side_area + cap_area) < side_area {
        let z = cfg.cell_length * (rng.random::<f64>() - 0.5) * inset;
        (
            Vector3::new(radius * inset * c, radius * inset * s, z),
            Vector3::new(-c, -s, 0.0),
            Vector3::new(-s, c, 0.0),
            Vector3::z(),
        )
    } else {
        let r = radius * rng.random::<f64>().sqrt() * inset;
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        (
            Vector3::new(r * c, r * s, side * half * inset),
            Vector3::new(0.0, 0.0, -side),
            Vector3::x(),
            Vector3::y(),
        )
    };
    let sigma = cfg.velocity_sigma();
    let vn = sigma * (-2.0 * (1.0 - rng.random::<f64>()).ln()).sqrt();
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    let velocity = normal * vn + t1 * (sigma * g1) + t2 * (sigma * g2);
    Ok(Atom {
        velocity,
        ..Atom::at_rest(position)
    })
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of sub-stream `index` of `master`: splitmix64(master ⊕ splitmix64(index)).
pub fn sub_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

const RESPAWN_DOMAIN: u64 = 0x7265_7370_6177_6e00;

fn respawn_rng(seed: u64, atom: usize, count: u32) -> ChaCha8Rng {
    let key = sub_seed(sub_seed(seed ^ RESPAWN_DOMAIN, atom as u64), count as u64);
    ChaCha8Rng::seed_from_u64(key)
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> EnsembleConfig {
        EnsembleConfig::cesium_cell(n, 11)
    }

    #[test]
    fn frozen_gas_is_slow() {
        let mut c = cfg(2000);
        c.temperature = 1e-6;
        let ens = sample_ensemble(&c).unwrap();
        assert!(ens.atoms.iter().all(|a| a.velocity.norm() < 1.0));
    }

    #[test]
    fn mean_speed_matches_closed_form() {
        let expected = (8.0 * BOLTZMANN * 345.15 / (PI * 2.207e-25)).sqrt();
        let ens = sample_ensemble(&cfg(100_000)).unwrap();
        let mean: f64 = ens.atoms.iter().map(|a| a.velocity.norm()).sum::<f64>() / 1e5;
        assert!((mean / expected - 1.0).abs() < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn mean_speed_function() {
        let s = SpeciesConstants::cesium();
        let v = mean_thermal_speed(&s, 345.15).unwrap();
        assert!((v - 234.5).abs() < 0.5, "{v}");
        let v4 = mean_thermal_speed(&s, 4.0 * 345.15).unwrap();
        assert!((v4 / v - 2.0).abs() < 1e-14);
        let heavy = SpeciesConstants {
            atomic_mass: 1.0,
            ..s
        };
        assert!(mean_thermal_speed(&heavy, 345.15).unwrap() < 1e-9);
        assert!(mean_thermal_speed(&heavy, -1.0).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = cfg(0);
        assert!(sample_ensemble(&c).is_err());
        c.n_atoms = 10;
        c.temperature = 0.0;
        assert!(sample_ensemble(&c).is_err());
    }

    #[test]
    fn same_seed_same_ensemble() {
        let a = sample_ensemble(&cfg(500)).unwrap();
        let b = sample_ensemble(&cfg(500)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_step_and_kinematics() {
        let c = cfg(1);
        let mut ens = Ensemble::from_atoms(
            vec![Atom {
                velocity: Vector3::new(100.0, 0.0, 0.0),
                ..Atom::at_rest(Vector3::zeros())
            }],
            c,
        );
        advance_ballistic(&mut ens, 0.0).unwrap();
        assert_eq!(ens.atoms[0].position, Vector3::zeros());
        advance_ballistic(&mut ens, 1e-6).unwrap();
        assert!((ens.atoms[0].position.x - 100e-6).abs() < 1e-15);
        assert!(ens.atoms[0].position.y == 0.0 && ens.atoms[0].position.z == 0.0);
    }

    #[test]
    fn many_small_steps_equal_one_large_step() {
        let mut c = cfg(10_000);
        c.cell_radius = 1.0;
        c.sampling_radius = 1.0;
        c.cell_length = 10.0;
        let mut fine = sample_ensemble(&c).unwrap();
        let mut coarse = fine.clone();
        for _ in 0..100 {
            assert!(advance_ballistic(&mut fine, 10e-9)
                .unwrap()
                .replaced
                .is_empty());
        }
        advance_ballistic(&mut coarse, 1e-6).unwrap();
        for (a, b) in fine.atoms.iter().zip(&coarse.atoms) {
            assert!((a.position - b.position).norm() < 1e-12);
        }
    }

    #[test]
    fn replacement_is_fresh_and_deterministic() {
        let c = cfg(1);
        let mut out = Atom::at_rest(Vector3::new(0.02, 0.0, 0.0));
        out.amp = Complex64::new(0.1, 0.2);
        out.pop1 = 0.3;
        out.pop2 = 0.7;
        let a = replace_escaped(&out, &c, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = replace_escaped(&out, &c, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.amp, Complex64::new(0.0, 0.0));
        assert_eq!(a.pop1, 1.0);
        assert!(c.contains(&a.position));
        let inside = Atom::at_rest(Vector3::zeros());
        assert!(matches!(
            replace_escaped(&inside, &c, &mut ChaCha8Rng::seed_from_u64(5)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn beam_weights() {
        let b = BeamGeometry::on_axis(240e-6);
        assert_eq!(beam_weight(&Vector3::new(0.0, 0.0, 0.01), &b), 1.0);
        let w = beam_weight(&Vector3::new(240e-6, 0.0, 0.0), &b);
        assert!((w - (-2.0f64).exp()).abs() < 1e-15);
        let assisted = BeamGeometry::on_axis(190e-6);
        assert!(beam_weight(&Vector3::new(1e-3, 0.0, 0.0), &assisted) < 1e-24);
        let direct = Beams::reference().assist;
        assert!(beam_weight(&Vector3::zeros(), &direct) < 1e-24);
        assert!(direct.validate().is_ok());
    }

    #[test]
    fn sub_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|i| sub_seed(42, i)).collect();
        let mut sorted = s.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(sub_seed(42, 3), s[3]);
    }
}
