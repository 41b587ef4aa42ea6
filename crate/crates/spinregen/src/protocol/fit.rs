//! Relaxation fits and curve metrics.

use crate::error::{Error, Result};

/// tp_eq + (tp_0 − tp_eq)·exp(−t/lifetime)
pub fn franzen_tp(t: f64, lifetime: f64, tp_initial: f64, tp_equilibrium: f64) -> Result<f64> {
    if !(lifetime > 0.0) {
        return Err(Error::param("lifetime", "must be positive"));
    }
    Ok(tp_equilibrium + (tp_initial - tp_equilibrium) * (-t / lifetime).exp())
}

/// y(t) = equilibrium + (initial − equilibrium)·exp(−t/lifetime)
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RelaxationFit {
    pub lifetime: f64,
    pub initial: f64,
    pub equilibrium: f64,
    pub rms_residual: f64,
}

/// Least-squares fit of a single exponential relaxation. The two amplitudes
/// are solved linearly for each trial lifetime and the lifetime is found by a
/// log-spaced scan refined with golden-section search.
pub fn fit_relaxation(t: &[f64], y: &[f64]) -> Result<RelaxationFit> {
    if t.len() != y.len() || t.len() < 3 {
        return Err(Error::Fit(
            "need at least three (t, y) samples of equal length".into(),
        ));
    }
    let span =
        t.iter().cloned().fold(f64::MIN, f64::max) - t.iter().cloned().fold(f64::MAX, f64::min);
    if !(span > 0.0) {
        return Err(Error::Fit("time samples span zero".into()));
    }
    let sse = |ln_tau: f64| {
        linear_amplitudes(t, y, ln_tau.exp())
            .map(|(_, _, s)| s)
            .unwrap_or(f64::INFINITY)
    };
    let (lo, hi) = ((span * 1e-3).ln(), (span * 1e3).ln());
    let n = 400;
    let grid: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let best = (0..=n)
        .min_by(|&a, &b| sse(grid[a]).total_cmp(&sse(grid[b])))
        .unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if sse(c) < sse(d) {
            b = d;
        } else {
            a = c;
        }
        if (b - a).abs() < 1e-13 {
            break;
        }
    }
    let tau = (0.5 * (a + b)).exp();
    let (eq, amp, s) = linear_amplitudes(t, y, tau)
        .ok_or_else(|| Error::Fit("singular normal equations".into()))?;
    Ok(RelaxationFit {
        lifetime: tau,
        initial: eq + amp,
        equilibrium: eq,
        rms_residual: (s / t.len() as f64).sqrt(),
    })
}

/// Solves y ≈ A + B·exp(−t/τ); returns (A, B, sum of squared residuals).
fn linear_amplitudes(t: &[f64], y: &[f64], tau: f64) -> Option<(f64, f64, f64)> {
    let n = t.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let e = (-ti / tau).exp();
        se += e;
        see += e * e;
        sy += yi;
        sey += e * yi;
    }
    let det = n * see - se * se;
    if det.abs() < 1e-300 * n.max(1.0) || det <= 0.0 {
        return None;
    }
    let b = (n * sey - se * sy) / det;
    let a = (sy - b * se) / n;
    let sse = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| (yi - a - b * (-ti / tau).exp()).powi(2))
        .sum();
    Some((a, b, sse))
}

/// Franzen fit of a transmission curve TP = exp(−absorbance), done on the
/// absorbance where the dark relaxation is a single exponential. The returned
/// `initial`/`equilibrium` are transmissions.
pub fn fit_transmission(t: &[f64], tp: &[f64]) -> Result<RelaxationFit> {
    if tp.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::Fit("transmission samples must lie in (0, 1]".into()));
    }
    let absorbance: Vec<f64> = tp.iter().map(|p| -p.ln()).collect();
    let f = fit_relaxation(t, &absorbance)?;
    Ok(RelaxationFit {
        initial: (-f.initial).exp(),
        equilibrium: (-f.equilibrium).exp(),
        ..f
    })
}

/// First time the curve falls below values[0]/e, by linear interpolation of
/// ln(value) between the bracketing samples. `None` if it never does.
pub fn one_over_e_time(t: &[f64], values: &[f64]) -> Option<f64> {
    let first = *values.first()?;
    if !(first > 0.0) {
        return None;
    }
    let threshold = first / std::f64::consts::E;
    for i in 1..values.len().min(t.len()) {
        if values[i] < threshold {
            let (y0, y1) = (values[i - 1], values[i]);
            let frac = if y1 > 0.0 && y0 > 0.0 {
                (threshold.ln() - y0.ln()) / (y1.ln() - y0.ln())
            } else {
                (threshold - y0) / (y1 - y0)
            };
            return Some(t[i - 1] + frac * (t[i] - t[i - 1]));
        }
    }
    None
}

/// Distance of a pulse from a Gaussian: the Gaussian with the pulse's area,
/// mean and variance is subtracted and the residual norm is divided by the
/// pulse norm. Zero for a Gaussian sampled finely enough.
pub fn gaussian_shape_residual(t: &[f64], p: &[f64]) -> f64 {
    let area: f64 = crate::spinwave::trapezoid(t, p);
    if !(area > 0.0) {
        return 0.0;
    }
    let mean_t: Vec<f64> = t.iter().zip(p).map(|(t, p)| t * p).collect();
    let mean = crate::spinwave::trapezoid(t, &mean_t) / area;
    let var_t: Vec<f64> = t
        .iter()
        .zip(p)
        .map(|(t, p)| (t - mean).powi(2) * p)
        .collect();
    let var = crate::spinwave::trapezoid(t, &var_t) / area;
    if !(var > 0.0) {
        return 0.0;
    }
    let norm = area / (2.0 * std::f64::consts::PI * var).sqrt();
    let (mut r, mut s) = (0.0, 0.0);
    for (&ti, &pi) in t.iter().zip(p) {
        let g = norm * (-0.5 * (ti - mean).powi(2) / var).exp();
        r += (pi - g).powi(2);
        s += pi * pi;
    }
    (r / s).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn franzen_endpoints() {
        assert!((franzen_tp(0.0, 18e-6, 0.9, 0.3).unwrap() - 0.9).abs() < 1e-15);
        let at_tau = franzen_tp(18e-6, 18e-6, 0.9, 0.3).unwrap();
        assert!((at_tau - (0.3 + 0.6 / std::f64::consts::E)).abs() < 1e-15);
        assert!(franzen_tp(1.0, 0.0, 0.9, 0.3).is_err());
    }

    #[test]
    fn recovers_synthetic_relaxation() {
        let t: Vec<f64> = (0..120).map(|i| i as f64 * 0.5e-6).collect();
        let y: Vec<f64> = t.iter().map(|&t| 1.1 - 0.8 * (-t / 18e-6).exp()).collect();
        let f = fit_relaxation(&t, &y).unwrap();
        assert!((f.lifetime / 18e-6 - 1.0).abs() < 1e-6, "{}", f.lifetime);
        assert!((f.initial - 0.3).abs() < 1e-6 && (f.equilibrium - 1.1).abs() < 1e-6);
    }

    #[test]
    fn one_over_e_interpolation() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.9 * (-t / 1.3f64).exp()).collect();
        assert!((one_over_e_time(&t, &y).unwrap() - 1.3).abs() < 1e-9);
        assert_eq!(one_over_e_time(&t, &vec![0.5; 50]), None);
    }

    #[test]
    fn gaussian_has_no_residual() {
        let t: Vec<f64> = (-300..=300).map(|i| i as f64).collect();
        let g: Vec<f64> = t
            .iter()
            .map(|t| (-0.5 * (t / 30.0f64).powi(2)).exp())
            .collect();
        assert!(gaussian_shape_residual(&t, &g) < 1e-6);
        let skew: Vec<f64> = t
            .iter()
            .map(|&t| if t > 0.0 { (-t / 30.0f64).exp() } else { 0.0 })
            .collect();
        assert!(gaussian_shape_residual(&t, &skew) > 0.1);
    }
}
