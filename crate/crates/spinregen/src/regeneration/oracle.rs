//! Exact numerics for the two-mode parametric transformation.
//!
//! The generator a†b† − ab conserves n_a − n_b, so starting from |n0, 0⟩ the
//! state stays in the chain |n0 + k, k⟩. Truncating at n_a ≤ cutoff leaves a
//! real antisymmetric tridiagonal generator, which is exponentiated by a
//! Taylor series over substeps short enough that every series converges to
//! machine precision.

use crate::error::{Error, Result};

use super::{excitation_variance, mean_excitation, GainMoments};

/// Smallest cutoff the oracle accepts: n0 + 10·(1 + 5κt).
pub fn oracle_heuristic_cutoff(n0: usize, kappa_t: f64) -> usize {
    n0 + (10.0 * (1.0 + 5.0 * kappa_t)).ceil() as usize
}

/// Mean and variance of n_a after evolving |n0, 0⟩ for κt under
/// exp(κt (a†b† − ab)), on the basis truncated at n_a ≤ `fock_cutoff`.
pub fn two_mode_gain_oracle(n0: usize, kappa_t: f64, fock_cutoff: usize) -> Result<GainMoments> {
    if !(0.0..=2.0).contains(&kappa_t) {
        return Err(Error::param("kappa_t", "must lie in [0, 2]"));
    }
    let minimum = oracle_heuristic_cutoff(n0, kappa_t);
    if fock_cutoff < minimum {
        return Err(Error::param(
            "fock_cutoff",
            format!("must be at least {minimum} for n0 = {n0}, κt = {kappa_t}"),
        ));
    }
    let dim = fock_cutoff - n0 + 1;
    // coupling between chain sites k−1 and k
    let s: Vec<f64> = (0..dim).map(|k| (((n0 + k) * k) as f64).sqrt()).collect();
    let norm_bound = 2.0 * s.iter().cloned().fold(0.0, f64::max);
    let substeps = ((kappa_t * norm_bound / 2.0).ceil() as usize).max(1);
    let h = kappa_t / substeps as f64;

    let mut psi = vec![0.0; dim];
    psi[0] = 1.0;
    let mut term = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    for _ in 0..substeps {
        term.copy_from_slice(&psi);
        for order in 1..60 {
            // next = (h/order)·G·term
            let f = h / order as f64;
            let mut size: f64 = 0.0;
            for k in 0..dim {
                let down = if k > 0 { s[k] * term[k - 1] } else { 0.0 };
                let up = if k + 1 < dim {
                    s[k + 1] * term[k + 1]
                } else {
                    0.0
                };
                next[k] = f * (down - up);
                size = size.max(next[k].abs());
            }
            for k in 0..dim {
                psi[k] += next[k];
            }
            std::mem::swap(&mut term, &mut next);
            if size < 1e-20 {
                break;
            }
        }
    }

    let total: f64 = psi.iter().map(|c| c * c).sum();
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, c) in psi.iter().enumerate() {
        let p = c * c / total;
        let n = (n0 + k) as f64;
        m1 += p * n;
        m2 += p * n * n;
    }
    let top = psi[dim - 1].powi(2) / total;
    if top > 1e-10 {
        return Err(Error::Truncation {
            population: top,
            cutoff: fock_cutoff,
        });
    }
    Ok(GainMoments {
        mean: m1,
        variance: m2 - m1 * m1,
        truncation: top,
    })
}

/// Closed forms against the oracle over n0 ∈ {0..5}, κt ∈ {0, 0.25, …, 2}.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCheck {
    pub max_mean_error: f64,
    pub max_variance_error: f64,
    /// (n0, κt, cutoff, |Δmean|, |Δvariance|) per grid point.
    pub points: Vec<(usize, f64, usize, f64, f64)>,
}

impl GridCheck {
    pub fn max_error(&self) -> f64 {
        self.max_mean_error.max(self.max_variance_error)
    }
}

/// Runs the grid, growing each cutoff until the top state holds less than
/// 1e-22 of the population. The first guess assumes the chain populations
/// fall off like tanh²(κt)^k.
pub fn oracle_grid_check() -> Result<GridCheck> {
    let mut check = GridCheck {
        max_mean_error: 0.0,
        max_variance_error: 0.0,
        points: Vec::new(),
    };
    for n0 in 0..=5usize {
        for step in 0..=8 {
            let kt = 0.25 * step as f64;
            let ratio = kt.tanh().powi(2);
            let tail = if ratio > 0.0 {
                ((55.0 + 5.0 * n0 as f64) / -ratio.ln()).ceil() as usize
            } else {
                0
            };
            let mut cutoff = oracle_heuristic_cutoff(n0, kt).max(n0 + tail + 10);
            let moments = loop {
                match two_mode_gain_oracle(n0, kt, cutoff) {
                    Ok(m) if m.truncation < 1e-22 => break m,
                    Ok(_) | Err(Error::Truncation { .. }) => cutoff = cutoff * 5 / 4 + 1,
                    Err(e) => return Err(e),
                }
            };
            let dm = (moments.mean - mean_excitation(n0 as f64, 1.0, kt)?).abs();
            let dv = (moments.variance - excitation_variance(n0 as f64, 1.0, kt)?).abs();
            check.max_mean_error = check.max_mean_error.max(dm);
            check.max_variance_error = check.max_variance_error.max(dv);
            check.points.push((n0, kt, cutoff, dm, dv));
        }
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_without_gain() {
        let m = two_mode_gain_oracle(0, 0.0, 10).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 0.0);
    }

    #[test]
    fn vacuum_at_unit_gain() {
        let m = two_mode_gain_oracle(0, 1.0, 60).unwrap();
        assert!((m.mean - 1f64.sinh().powi(2)).abs() < 1e-9);
        assert!((m.variance - 2f64.sinh().powi(2) / 4.0).abs() < 1e-8);
        assert!((m.mean - 1.3811).abs() < 5e-5);
    }

    #[test]
    fn two_excitations() {
        let m = two_mode_gain_oracle(2, 0.7, 200).unwrap();
        assert!((m.mean - mean_excitation(2.0, 0.7, 1.0).unwrap()).abs() < 1e-8);
        assert!((m.variance - excitation_variance(2.0, 0.7, 1.0).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn small_cutoff_is_flagged() {
        assert!(matches!(
            two_mode_gain_oracle(0, 2.0, 20),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            two_mode_gain_oracle(0, 2.0, 110),
            Err(Error::Truncation { .. })
        ));
    }
}
