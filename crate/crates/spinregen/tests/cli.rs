use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spinregen::config::RunConfig;

fn spinregen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinregen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A config small enough for a few seconds per command.
fn small_config(dir: &Path) -> String {
    let mut c = RunConfig::default();
    c.ensemble.n_atoms = 5000;
    c.sequence.lifetime_no_assist_max_us = 2.0;
    c.sequence.lifetime_assist_step_us = 0.5;
    c.sequence.lifetime_assist_max_us = 2.0;
    c.sequence.tp_span_us = 5.0;
    let path = dir.join("small.toml");
    fs::write(&path, c.to_toml()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn usage_and_help() {
    let o = spinregen(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(spinregen(&["transmogrify"]).status.code(), Some(1));
    let o = spinregen(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in [
        "simulate",
        "fig2",
        "lifetime-scan",
        "tp-scan",
        "calibrate",
        "oracle-check",
        "noise-budget",
    ] {
        assert!(stdout(&o).contains(sub), "help lacks {sub}");
    }
}

#[test]
fn noise_budget_prints_the_intrinsic_noise() {
    let o = spinregen(&["noise-budget", "--raw", "0.012", "--eta", "0.07"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0.171");
    assert_eq!(
        spinregen(&["noise-budget", "--eta", "0"]).status.code(),
        Some(1)
    );
}

#[test]
fn oracle_check_passes() {
    let o = spinregen(&["oracle-check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("max |closed form - oracle|"));
}

#[test]
fn config_errors_name_the_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let base = RunConfig::default().to_toml();
    let cases = [
        (
            base.replace("temperature_k = 345.15", "temperature_k = -5.0"),
            "temperature",
        ),
        (
            base.replace("n_atoms = 200000", "n_atoms = 200000\ncolour = 3"),
            "colour",
        ),
        (
            base.replace("cell_radius_mm = 10.0", "cell_radius_m = 0.01"),
            "cell_radius",
        ),
        (base.replace("kappa_per_s", "# kappa_per_s"), "kappa_per_s"),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        fs::write(&path, text).unwrap();
        let o = spinregen(&["--config", path.to_str().unwrap(), "simulate"]);
        assert_eq!(o.status.code(), Some(1), "{key}: {}", stderr(&o));
        let err = stderr(&o);
        assert!(err.contains(key), "{key}: {err}");
        // a missing key has no line to point at
        if i < 3 {
            assert!(err.contains("line"), "{key}: {err}");
        }
    }
    let o = spinregen(&["--config", "/nonexistent/x.toml", "simulate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn omitted_keys_are_defaulted_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text = RunConfig::default()
        .to_toml()
        .replace("n_atoms = 200000", "n_atoms = 3000")
        .replace("cell_radius_mm = 10.0\n", "");
    let cfg = dir.path().join("partial.toml");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let o = spinregen(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "simulate",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("simulate_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["defaulted_keys"][0], "ensemble.cell_radius_mm");
    assert!(summary["config"]
        .as_str()
        .unwrap()
        .contains("cell_radius_mm = 10.0"));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    // the output dir is part of the hashed config, so every run writes there
    let out = dir.path().join("out");
    let run = |seed: &str| {
        let o = spinregen(&[
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
            "simulate",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (
            fs::read(out.join("traces.csv")).unwrap(),
            fs::read(out.join("simulate_summary.json")).unwrap(),
        )
    };
    let a = run("5");
    let b = run("5");
    let c = run("6");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
    let text = String::from_utf8(a.0).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap();
    assert!(
        head.starts_with("# spinregen")
            && head.contains("config_sha256=")
            && head.contains("master_seed=5")
    );
    assert_eq!(
        lines.next().unwrap(),
        "time_s,retrieval,excitations,pop1,pop2,transmission,noise_photons"
    );
}

#[test]
fn fig2_writes_the_pulse_trains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("fig2");
    let o = spinregen(&[
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
        "fig2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fig2.json")).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["config_sha256"].as_str().unwrap().len(), 64);
    for col in ["time_s", "S_leak", "S_out_noA", "S_out_A", "S_out_A_noSin"] {
        assert!(doc["columns"][col].is_array(), "missing {col}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fig2_summary.json")).unwrap()).unwrap();
    assert!(summary["headline"]["S_out_A"].as_f64().unwrap() > 0.5);
    assert!(summary["generator"]
        .as_str()
        .unwrap()
        .starts_with("spinregen"));
}

#[test]
fn scans_and_calibration_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    let outs = out.to_str().unwrap();
    for (args, files) in [
        (
            vec!["lifetime-scan"],
            vec!["lifetime_noA.csv", "lifetime_A.csv"],
        ),
        (
            vec!["lifetime-scan", "--assist", "off"],
            vec!["lifetime_noA.csv"],
        ),
        (vec!["tp-scan"], vec!["tp.csv"]),
        (vec!["calibrate"], vec!["calibration.csv"]),
    ] {
        let mut argv = vec!["--config", &cfg, "--out", outs];
        argv.extend(&args);
        let o = spinregen(&argv);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        for f in files {
            let text = fs::read_to_string(out.join(f)).unwrap();
            assert!(text.starts_with("# spinregen"), "{f}");
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("calibrate_summary.json")).unwrap())
            .unwrap();
    assert!(summary["calibrated_kappa_per_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn unreachable_calibration_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = RunConfig::default()
        .to_toml()
        .replace("n_atoms = 200000", "n_atoms = 5000")
        .replace("calibration_target = 0.98", "calibration_target = 1.5");
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("o");
    let o = spinregen(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "calibrate",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(out.join("calibration.csv").exists());
}
