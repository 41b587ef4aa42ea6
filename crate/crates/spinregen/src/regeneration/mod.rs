//! Parametric gain driven by the assisted light.
//!
//! Closed forms for the two-mode gain law, an exact truncated-basis oracle for
//! them, the per-step gain and depolarization applied to the ensemble, the
//! calibration of κ against a target efficiency, and the photon noise budget.

mod gain;
mod oracle;

pub use gain::{
    apply_gain_tick, apply_gain_tick_in, depolarize_tick, depolarize_tick_in, gain_propagator,
    relax_dark_tick, GainTick, NoiseMoments, MAX_KAPPA_DT,
};
pub(crate) use gain::{assist_tick_in, relax_atom};
pub use oracle::{oracle_grid_check, oracle_heuristic_cutoff, two_mode_gain_oracle, GridCheck};

use nalgebra::Vector3;

use crate::ensemble::BeamGeometry;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GainModel {
    /// Coupling coefficient κ, 1/s.
    pub kappa: f64,
    pub assist_on: bool,
    /// |1⟩ → |2⟩ pumping rate on the illumination axis, 1/s.
    pub depol_rate: f64,
    /// Region lit by the assisted photons.
    pub assist_beam: BeamGeometry,
    /// Decay rate of the partner (scattered assisted-photon) amplitude, 1/s.
    pub partner_decay: f64,
    /// Gain-mode excitation, in input-pulse units, at which the gain halves.
    /// `f64::INFINITY` disables saturation.
    pub saturation: f64,
    /// Wave-vector mismatch of the spontaneous Raman noise, rad/m.
    pub noise_mismatch: Vector3<f64>,
}

impl GainModel {
    /// Unsaturated, non-decaying gain on the given region; no depolarization.
    pub fn ideal(kappa: f64, assist_beam: BeamGeometry) -> Self {
        GainModel {
            kappa,
            assist_on: true,
            depol_rate: 0.0,
            assist_beam,
            partner_decay: 0.0,
            saturation: f64::INFINITY,
            noise_mismatch: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("kappa", self.kappa)?;
        non_negative("depol_rate", self.depol_rate)?;
        non_negative("partner_decay", self.partner_decay)?;
        if !(self.saturation > 0.0) {
            return Err(Error::param("saturation", "must be positive"));
        }
        self.assist_beam.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GainMoments {
    pub mean: f64,
    pub variance: f64,
    /// Population left in the highest retained number state.
    pub truncation: f64,
}

/// n0·cosh²(κt) + sinh²(κt)
pub fn mean_excitation(n0: f64, kappa: f64, t: f64) -> Result<f64> {
    check_gain_args(n0, kappa, t)?;
    let x = kappa * t;
    Ok(n0 * x.cosh().powi(2) + x.sinh().powi(2))
}

/// sinh²(2κt)·(1 + n0)/4, for a number-state input of n0 excitations.
pub fn excitation_variance(n0: f64, kappa: f64, t: f64) -> Result<f64> {
    check_gain_args(n0, kappa, t)?;
    Ok((2.0 * kappa * t).sinh().powi(2) * (1.0 + n0) / 4.0)
}

/// Intrinsic photons at the memory output: raw counts divided by the total
/// detection efficiency.
pub fn noise_budget(raw_noise_counts: f64, detection_efficiency: f64) -> Result<f64> {
    if !(detection_efficiency > 0.0 && detection_efficiency <= 1.0) {
        return Err(Error::param("detection_efficiency", "must lie in (0, 1]"));
    }
    non_negative("raw_noise_counts", raw_noise_counts)?;
    Ok(raw_noise_counts / detection_efficiency)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub kappa: f64,
    pub achieved: f64,
    /// Every (κ, efficiency) evaluated, in order.
    pub curve: Vec<(f64, f64)>,
}

/// Bisection for κ ∈ [0, kappa_max] such that `efficiency(κ)` is within
/// `tolerance` of `target`, assuming the efficiency grows with κ.
pub fn calibrate_kappa<F>(
    target: f64,
    kappa_max: f64,
    tolerance: f64,
    mut efficiency: F,
) -> Result<Calibration>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(kappa_max > 0.0) || !(tolerance > 0.0) {
        return Err(Error::param(
            "kappa_max",
            "bracket and tolerance must be positive",
        ));
    }
    let mut curve = Vec::new();
    let mut eval = |k: f64, curve: &mut Vec<(f64, f64)>| -> Result<f64> {
        let e = efficiency(k)?;
        curve.push((k, e));
        Ok(e)
    };
    let f0 = eval(0.0, &mut curve)?;
    if (f0 - target).abs() <= tolerance {
        return Ok(Calibration {
            kappa: 0.0,
            achieved: f0,
            curve,
        });
    }
    if f0 > target {
        return Err(Error::Calibration {
            reason: format!("target {target} is below the no-gain efficiency {f0:.6}"),
            curve,
        });
    }
    let fmax = eval(kappa_max, &mut curve)?;
    if fmax < target - tolerance {
        for i in 1..8 {
            eval(kappa_max * i as f64 / 8.0, &mut curve)?;
        }
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        return Err(Error::Calibration {
            reason: format!("target {target} unreachable: efficiency {fmax:.6} at the bracket limit κ = {kappa_max:.4e} /s"),
            curve,
        });
    }
    let (mut lo, mut hi) = (0.0, kappa_max);
    let (mut best_k, mut best_f) = (kappa_max, fmax);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let f = eval(mid, &mut curve)?;
        if (f - target).abs() < (best_f - target).abs() {
            best_k = mid;
            best_f = f;
        }
        if (f - target).abs() <= tolerance {
            return Ok(Calibration {
                kappa: mid,
                achieved: f,
                curve,
            });
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * kappa_max {
            break;
        }
    }
    if (best_f - target).abs() <= tolerance {
        Ok(Calibration {
            kappa: best_k,
            achieved: best_f,
            curve,
        })
    } else {
        Err(Error::Calibration {
            reason: format!("efficiency is not monotone near target {target}"),
            curve,
        })
    }
}

fn check_gain_args(n0: f64, kappa: f64, t: f64) -> Result<()> {
    non_negative("n0", n0)?;
    non_negative("kappa", kappa)?;
    non_negative("t", t)
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_law_values() {
        assert_eq!(mean_excitation(5.0, 0.0, 3.0).unwrap(), 5.0);
        let m = mean_excitation(0.0, 1.0, 1.0).unwrap();
        assert!((m - 1.3811).abs() < 5e-5);
        let m = mean_excitation(1.0, 0.5, 1.0).unwrap();
        assert!((m - 1f64.cosh()).abs() < 1e-14);
        assert!((m - 1.5431).abs() < 5e-5);
        assert!(mean_excitation(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn variance_values() {
        assert_eq!(excitation_variance(4.0, 1.0, 0.0).unwrap(), 0.0);
        let v = excitation_variance(0.0, 1.0, 1.0).unwrap();
        assert!((v - 3.2885291).abs() < 1e-6, "{v}");
        let v = excitation_variance(3.0, 0.3, 1.0).unwrap();
        assert!((v - 0.6f64.sinh().powi(2)).abs() < 1e-15);
        let c = 0.3f64.cosh().powi(2) * 0.3f64.sinh().powi(2) * 4.0;
        assert!((v - c).abs() < 1e-14);
    }

    #[test]
    fn noise_budget_values() {
        assert!((noise_budget(0.012, 0.07).unwrap() - 0.171).abs() < 5e-4);
        assert_eq!(noise_budget(0.0, 0.3).unwrap(), 0.0);
        assert!((noise_budget(0.8 * 0.07, 1.0).unwrap() - 0.056).abs() < 1e-12);
        assert!(noise_budget(0.012, 0.0).is_err());
    }

    #[test]
    fn calibration_on_a_known_curve() {
        let f = |k: f64| Ok(0.4 + 0.6 * (k / 1e6).tanh());
        let c = calibrate_kappa(0.98, 1e7, 1e-6, f).unwrap();
        let expected = 1e6 * (0.58f64 / 0.6).atanh();
        assert!((c.kappa - expected).abs() / expected < 1e-4);
        let zero = calibrate_kappa(0.4, 1e7, 1e-6, f).unwrap();
        assert_eq!(zero.kappa, 0.0);
        match calibrate_kappa(1.5, 1e7, 1e-6, f) {
            Err(Error::Calibration { curve, .. }) => assert!(curve.len() > 2),
            other => panic!("expected calibration error, got {other:?}"),
        }
    }
}
