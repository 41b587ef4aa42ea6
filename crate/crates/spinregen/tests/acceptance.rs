//! Acceptance run: one PASS/FAIL line per criterion, then a tally.
//!
//! Runs the full 2e5-atom reference setup and takes several minutes. The
//! process exits 0 even when a criterion fails so that the remaining test
//! targets still run; read the lines, not the exit status.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Vector3;

use spinregen::config::RunConfig;
use spinregen::ensemble::{sample_ensemble, EnsembleConfig};
use spinregen::protocol::{
    calibrate_experiment, fig2_experiment, lifetime_scan, tp_experiment, Experiment, Fig2Table,
};
use spinregen::regeneration::{noise_budget, oracle_grid_check};
use spinregen::spinwave::interference_sum;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

/// Errors are kept as text so that later criteria can reuse earlier results.
type Check<T> = Result<T, String>;

fn text(e: spinregen::Error) -> String {
    e.to_string()
}

fn report(id: usize, name: &str, elapsed: Duration, outcome: Check<Outcome>) -> bool {
    let o = outcome.unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
    println!(
        "{} [{id}] {name}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    o.pass
}

fn reference() -> Check<Experiment> {
    RunConfig::default().to_experiment().map_err(text)
}

fn oracle() -> Check<Outcome> {
    let start = Instant::now();
    let check = oracle_grid_check().map_err(text)?;
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        check.max_error() < 1e-8 && secs < 10.0,
        format!(
            "max error {:.2e} over {} points (< 1e-8), {secs:.2} s (< 10 s)",
            check.max_error(),
            check.points.len()
        ),
    ))
}

fn noise() -> Check<Outcome> {
    let n = noise_budget(0.012, 0.07).map_err(text)?;
    Ok(Outcome::new(
        (n - 0.17).abs() <= 0.005,
        format!("0.012 / 0.07 = {n:.4} (0.17 ± 0.005)"),
    ))
}

fn interference() -> Check<Outcome> {
    let start = Instant::now();
    let exp = reference()?;
    let q = exp.vectors.delta_k;
    let n = 10_000;
    let seeds = 100;
    let mut matched_worst: f64 = 0.0;
    let mut samples = Vec::with_capacity(seeds);
    // not part of the verdict: the Raman-noise mismatch, |q|·L ≫ 2π
    let raman = exp.model.noise_mismatch;
    let mut raman_mean = 0.0;
    for seed in 0..seeds as u64 {
        let cfg = EnsembleConfig::cesium_cell(n, 1000 + seed);
        let positions: Vec<Vector3<f64>> = sample_ensemble(&cfg)
            .map_err(text)?
            .atoms
            .iter()
            .map(|a| a.position)
            .collect();
        let s0 = interference_sum(&positions, &Vector3::zeros()).map_err(text)?;
        matched_worst = matched_worst.max((s0.norm_sqr() - 1.0).abs());
        samples.push(interference_sum(&positions, &q).map_err(text)?.norm_sqr());
        raman_mean += interference_sum(&positions, &raman)
            .map_err(text)?
            .norm_sqr()
            / seeds as f64;
    }
    let m = seeds as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let sigma = (var / m).sqrt();
    let expected = 1.0 / n as f64;
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        matched_worst < 1e-12 && (mean - expected).abs() <= 3.0 * sigma && secs < 30.0,
        format!(
            "|q| = {:.3} rad/m: mean |S|² {mean:.4e}, 1/N {expected:.1e}, 3σ {:.2e}; \
             q = 0 worst |S|²−1 {matched_worst:.1e}; at |q| = {:.3e} rad/m N·mean |S|² \
             {:.3}; {secs:.1} s",
            q.norm(),
            3.0 * sigma,
            raman.norm(),
            raman_mean * n as f64
        ),
    ))
}

fn table_line(t: &Fig2Table) -> String {
    t.rows()
        .iter()
        .map(|(name, v, _)| format!("{name} {v:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn main() {
    println!("acceptance run, reference config at 2e5 atoms");
    let mut passed = 0;
    let mut total = 0;
    let mut tally = |pass: bool| {
        total += 1;
        passed += pass as usize;
    };

    let t = Instant::now();
    let r = oracle();
    tally(report(1, "gain-law oracle", t.elapsed(), r));

    let t = Instant::now();
    let r = noise();
    tally(report(2, "noise budget", t.elapsed(), r));

    let t = Instant::now();
    let r = interference();
    tally(report(3, "collective interference", t.elapsed(), r));

    // 4: lifetime without assisted light
    let t = Instant::now();
    let no_assist = reference().and_then(|exp| {
        let c = lifetime_scan(&exp.lifetime.delays_no_assist, false, &exp).map_err(text)?;
        Ok(c.one_over_e)
    });
    let r = no_assist.as_ref().map_err(Clone::clone).map(|t| match t {
        Some(t) => Outcome::new(
            (0.5e-6..=3e-6).contains(t),
            format!("1/e time {:.3} us (0.5 to 3 us)", t * 1e6),
        ),
        None => Outcome::new(false, "no 1/e crossing in 6 us"),
    });
    tally(report(4, "no-assist lifetime", t.elapsed(), r));

    // 5: calibrate, then the assisted lifetime
    let t = Instant::now();
    let calibrated = reference().and_then(|mut exp| {
        let cal = calibrate_experiment(&exp, 0.98, 0.002).map_err(text)?;
        exp.model.kappa = cal.kappa;
        Ok((exp, cal))
    });
    let r = calibrated
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|(exp, cal)| {
            let c = lifetime_scan(&exp.lifetime.delays_assist, true, exp).map_err(text)?;
            let secs = t.elapsed().as_secs_f64();
            let base = no_assist.clone().ok().flatten();
            Ok(match (c.one_over_e, base) {
                (Some(a), Some(b)) => Outcome::new(
                    (0.98 - cal.achieved).abs() <= 0.01
                        && a >= 10.0 * b
                        && a < 100e-6
                        && secs < 300.0,
                    format!(
                        "κ {:.4e} /s gives S_out(A) {:.4}; 1/e {:.2} us = {:.1}× no-assist \
                     (≥ 10×, < 100 us); {secs:.0} s (< 300 s)",
                        cal.kappa,
                        cal.achieved,
                        a * 1e6,
                        a / b
                    ),
                ),
                (a, b) => Outcome::new(
                    false,
                    format!("missing 1/e time: assist {a:?}, no assist {b:?}"),
                ),
            })
        });
    tally(report(5, "regenerated lifetime", t.elapsed(), r));

    // 6: pulse-train pattern at the calibrated κ
    let t = Instant::now();
    let r = calibrated
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|(exp, _)| {
            let tab = fig2_experiment(exp).map_err(text)?.table;
            let checks = [
                ("S_leak 0.10 ± 0.03", (tab.s_leak - 0.10).abs() <= 0.03),
                ("S_out(noA) < S_out(A)", tab.s_out_no_a < tab.s_out_a),
                ("R2(A) ≤ 0.02", tab.r2_a <= 0.02),
                ("R2(noA) ≥ 0.03", tab.r2_no_a >= 0.03),
                ("S_out(A+noS_in) ≤ 0.001", tab.s_out_a_no_sin <= 1e-3),
            ];
            let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
            let verdict = if failed.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", failed.join(", "))
            };
            Ok(Outcome::new(
                failed.is_empty(),
                format!("{}{verdict}", table_line(&tab)),
            ))
        });
    tally(report(6, "pulse-train pattern", t.elapsed(), r));

    // 7: probe transmission
    let t = Instant::now();
    let r = reference().and_then(|exp| {
        let dark = tp_experiment(false, &exp).map_err(text)?;
        let lit = tp_experiment(true, &exp).map_err(text)?;
        let mut faster = true;
        let mut checked = 0;
        for i in 0..dark.times.len() {
            let time = dark.times[i];
            if time > 0.0 && time <= 5e-6 + 1e-12 {
                checked += 1;
                let d = (dark.transmission[i] - dark.transmission[0]).abs();
                let a = (lit.transmission[i] - lit.transmission[0]).abs();
                faster &= a > d;
            }
        }
        let fit = dark.fit.lifetime;
        let within = (fit / 18e-6 - 1.0).abs() <= 0.05;
        Ok(Outcome::new(
            faster && checked > 0 && within,
            format!(
                "assisted relaxes further at all {checked} probes in (0, 5] us: {faster}; \
                 dark fit {:.3} us (18 us ± 5%)",
                fit * 1e6
            ),
        ))
    });
    tally(report(7, "transmission", t.elapsed(), r));

    // 8: determinism and step-size convergence
    let t = Instant::now();
    let r = calibrated
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|(exp, _)| {
            let a = fig2_experiment(exp).map_err(text)?;
            let b = fig2_experiment(exp).map_err(text)?;
            let identical = a == b;
            let files = cli_runs_are_identical();
            let mut fine = exp.clone();
            fine.fig2.dt /= 2.0;
            let f = fig2_experiment(&fine).map_err(text)?.table;
            let mut worst: (f64, &str) = (0.0, "");
            for ((name, coarse, _), (_, halved, _)) in a.table.rows().iter().zip(f.rows()) {
                let d = (coarse - halved).abs();
                if d > worst.0 {
                    worst = (d, name);
                }
            }
            Ok(Outcome::new(
                identical && files && worst.0 < 0.005,
                format!(
                    "repeat identical: {identical}; CLI files byte-identical: {files}; \
                 halving dt moves {} by {:.2e} (< 0.005)",
                    worst.1, worst.0
                ),
            ))
        });
    tally(report(8, "determinism and convergence", t.elapsed(), r));

    println!("acceptance: {passed}/{total} criteria pass");
}

/// Two `simulate` runs of the reference config write the same bytes.
fn cli_runs_are_identical() -> bool {
    let dir = std::env::temp_dir().join(format!("spinregen-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    let run = || -> Option<(Vec<u8>, Vec<u8>)> {
        let out = Command::new(env!("CARGO_BIN_EXE_spinregen"))
            .args(["--seed", "7", "--out"])
            .arg(&dir)
            .arg("simulate")
            .output()
            .ok()?;
        if !out.status.success() {
            return None;
        }
        Some((
            fs::read(dir.join("traces.csv")).ok()?,
            fs::read(dir.join("simulate_summary.json")).ok()?,
        ))
    };
    let first = run();
    let second = run();
    let _ = fs::remove_dir_all(&dir);
    first.is_some() && first == second
}
