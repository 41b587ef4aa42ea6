use nalgebra::Vector3;

use spinregen::ensemble::{
    advance_ballistic, beam_weight, sample_ensemble, Beams, EnsembleConfig, BOLTZMANN,
};
use spinregen::protocol::{
    calibrate_experiment, fig2_sequence, lifetime_scan, run_sequence, Experiment, Fig2Condition,
    PulseEvent, PulseKind, PulseSequence,
};
use spinregen::regeneration::{apply_gain_tick, GainModel};
use spinregen::spinwave::{
    imprint_write, interference_sum, read_out, retrieval_efficiency, SpinWaveState, WaveVectors,
};
use spinregen::Error;

fn small_experiment(seed: u64) -> Experiment {
    let mut exp = Experiment::reference(seed).unwrap();
    exp.ensemble.n_atoms = 20_000;
    exp
}

#[test]
fn velocity_distribution_is_stationary() {
    let mut cfg = EnsembleConfig::cesium_cell(100_000, 21);
    cfg.sampling_radius = 1.5e-3;
    let mut ens = sample_ensemble(&cfg).unwrap();
    let sigma2 = BOLTZMANN * cfg.temperature / cfg.species.atomic_mass;
    let transit = cfg.region_radius() / sigma2.sqrt();
    let dt = 1e-6;
    let steps = (100.0 * transit / dt).ceil() as usize;
    for _ in 0..steps {
        advance_ballistic(&mut ens, dt).unwrap();
    }
    let n = ens.len() as f64;
    for axis in 0..3 {
        let mean = ens.atoms.iter().map(|a| a.velocity[axis]).sum::<f64>() / n;
        let var = ens
            .atoms
            .iter()
            .map(|a| (a.velocity[axis] - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        assert!(
            (var / sigma2 - 1.0).abs() < 0.05,
            "axis {axis}: variance ratio {}",
            var / sigma2
        );
    }
}

/// Collective excitation after `total` of gain on a static ensemble, in
/// steps of `total / steps`.
fn gained_excitation(steps: usize, total: f64) -> f64 {
    let mut cfg = EnsembleConfig::cesium_cell(4000, 5);
    cfg.sampling_radius = 0.8e-3;
    let beams = Beams::reference();
    let v = WaveVectors::new(&cfg.species, &beams).unwrap();
    let mut ens = sample_ensemble(&cfg).unwrap();
    for a in &mut ens.atoms {
        a.velocity = Vector3::zeros();
    }
    let (mut state, _) = imprint_write(&mut ens.atoms, &v, &beams.signal, 0.9, 3e-3).unwrap();
    let mut model = GainModel::ideal(3e6, beams.illumination.clone());
    model.partner_decay = 1e7;
    model.saturation = 0.7;
    let dt = total / steps as f64;
    for _ in 0..steps {
        apply_gain_tick(&mut ens.atoms, &mut state, &model, &v, dt).unwrap();
    }
    retrieval_efficiency(&ens.atoms, &v, &beams.illumination, &state)
}

#[test]
fn gain_steps_converge_at_second_order() {
    let total = 400e-9;
    let reference = gained_excitation(2048, total);
    let errors: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&m| (gained_excitation(m, total) - reference).abs())
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "order {order}, errors {errors:?}");
    }
}

#[test]
fn raman_noise_is_not_phase_matched() {
    let exp = Experiment::reference(1).unwrap();
    let q = exp.model.noise_mismatch;
    let seeds = 20;
    let mut mean = 0.0;
    let mut n_lit = 0.0;
    for seed in 0..seeds {
        let mut cfg = EnsembleConfig::cesium_cell(20_000, 100 + seed);
        cfg.sampling_radius = 1.5e-3;
        let lit: Vec<Vector3<f64>> = sample_ensemble(&cfg)
            .unwrap()
            .atoms
            .iter()
            .map(|a| a.position)
            .filter(|p| beam_weight(p, &exp.beams.illumination) > (-2.0f64).exp())
            .collect();
        n_lit += lit.len() as f64 / seeds as f64;
        mean += interference_sum(&lit, &q).unwrap().norm_sqr() / seeds as f64;
    }
    assert!(mean <= 3.0 / n_lit, "mean |S|² {mean}, 3/N {}", 3.0 / n_lit);
}

#[test]
fn second_read_gets_at_most_the_rest() {
    let mut cfg = EnsembleConfig::cesium_cell(20_000, 4);
    cfg.sampling_radius = 1.0e-3;
    let beams = Beams::reference();
    let v = WaveVectors::new(&cfg.species, &beams).unwrap();
    let mut ens = sample_ensemble(&cfg).unwrap();
    let (mut state, _) = imprint_write(&mut ens.atoms, &v, &beams.signal, 0.9, 3e-3).unwrap();
    advance_ballistic(&mut ens, 400e-9).unwrap();
    let r1 = read_out(&mut ens.atoms, &v, &beams.signal, &mut state);
    let r2 = read_out(&mut ens.atoms, &v, &beams.signal, &mut state);
    assert!(r1 > 0.1);
    assert!(r2 <= 1.0 - r1 + 0.02, "r1 {r1} r2 {r2}");
}

#[test]
fn frozen_gas_keeps_its_retrieval() {
    let mut exp = small_experiment(3);
    exp.ensemble.temperature = 1e-9;
    exp.model.kappa = 0.0;
    let delays: Vec<f64> = (0..=6).map(|i| i as f64 * 0.5e-6).collect();
    let c = lifetime_scan(&delays, false, &exp).unwrap();
    for re in &c.retrieval {
        assert!((re - c.retrieval[0]).abs() < 1e-3, "{:?}", c.retrieval);
    }
}

#[test]
fn excitation_budget_balances_without_gain() {
    let mut exp = small_experiment(9);
    exp.model.kappa = 0.0;
    for condition in [Fig2Condition::NoAssist, Fig2Condition::Assist] {
        let r = run_sequence(&fig2_sequence(&exp, condition), &exp).unwrap();
        let b = &r.budget;
        let total = b.retrieved + b.leaked + b.lost + r.remaining;
        assert!(
            (total - 1.0).abs() < 0.02,
            "{condition:?}: {total} from {b:?}"
        );
    }
}

#[test]
fn nothing_written_nothing_read() {
    let exp = small_experiment(2);
    let seq = PulseSequence::new(
        vec![
            PulseEvent::new(PulseKind::Pump, 0.0, 350e-9, 23e-3),
            PulseEvent::new(PulseKind::Read, 1170e-9, 70e-9, 2e-9),
            PulseEvent::new(PulseKind::Read, 1500e-9, 70e-9, 2e-9),
        ],
        5e-9,
        1500e-9,
    );
    let r = run_sequence(&seq, &exp).unwrap();
    assert_eq!(r.reads.len(), 2);
    for read in &r.reads {
        assert_eq!(read.efficiency, 0.0);
        assert_eq!(read.noise_photons, 0.0);
    }
}

#[test]
fn runs_repeat_exactly() {
    let exp = small_experiment(17);
    let mut seq = fig2_sequence(&exp, Fig2Condition::Assist);
    seq.record_interval = Some(20e-9);
    seq.trial_count = 2;
    let a = run_sequence(&seq, &exp).unwrap();
    let b = run_sequence(&seq, &exp).unwrap();
    assert_eq!(a, b);
    let other = run_sequence(&seq, &small_experiment(18)).unwrap();
    assert_ne!(a.reads[0].efficiency, other.reads[0].efficiency);
}

#[test]
fn unreachable_calibration_target_is_an_error() {
    let exp = small_experiment(5);
    match calibrate_experiment(&exp, 1.5, 0.002) {
        Err(Error::Calibration { curve, .. }) => assert!(!curve.is_empty()),
        other => panic!("expected a calibration error, got {other:?}"),
    }
}

#[test]
fn spin_wave_state_starts_empty() {
    let state = SpinWaveState::default();
    assert!(!state.is_written());
}
