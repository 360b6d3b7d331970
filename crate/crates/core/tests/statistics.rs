//! Monte-Carlo checks of the reference run against closed-form oracles.

use core::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use std::num::NonZeroU64;

use eprb_core::analysis::{correlations, running_report, tally_pairs, tally_sides};
use eprb_core::protocol::{run_with_strategies, ThresholdLhv};
use eprb_core::{
    run_experiment, AnalysisMode, ExperimentConfig, PulseAxis, SettingLabel, SettingPair, Side, TrialRecord,
};

const T: u64 = 100_000;

fn reference_log(trials: u64, seed: u64) -> (ExperimentConfig, Vec<TrialRecord>) {
    let config = ExperimentConfig::reference(trials, seed);
    let log = run_experiment(&config).unwrap();
    (config, log)
}

/// E[x | θ, φ] with detected ↦ +1 is `2cos²(θ−φ) − 1 = cos 2(θ−φ)`. The two
/// pulse axes are orthogonal, so averaging over the source mode gives
/// `E[xy] = −cos 2θ_a · cos 2θ_b`.
fn gill_oracle(theta_a: f64, theta_b: f64) -> f64 {
    -(2.0 * theta_a).cos() * (2.0 * theta_b).cos()
}

#[test]
fn exposures_follow_the_multinomial_split() {
    let (config, log) = reference_log(T, 0);
    let (left, right) = tally_sides(&log);
    // Each side sees one of four (label, axis) regimes per trial, each with
    // probability 1/4.
    let p = 0.25;
    let mean = T as f64 * p;
    let bound = 3.0 * (T as f64 * p * (1.0 - p)).sqrt();
    for counts in [&left, &right] {
        assert_eq!(counts.total_exposures(), T);
        for label in SettingLabel::ALL {
            for axis in PulseAxis::ALL {
                let cell = counts.cell(label, axis);
                assert!(cell.detections <= cell.exposures);
                assert!(
                    (cell.exposures as f64 - mean).abs() < bound,
                    "{:?} {label} {axis:?}: {} exposures",
                    counts.side(),
                    cell.exposures
                );
            }
        }
    }
    // θ = 0 is parallel to axis 0 and orthogonal to axis π/2.
    assert_eq!(config.angle(Side::Left, SettingLabel::One).radians(), 0.0);
    let par = left.cell(SettingLabel::One, PulseAxis::Zero);
    assert_eq!(par.detections, par.exposures);
    assert_eq!(left.cell(SettingLabel::One, PulseAxis::HalfPi).detections, 0);
}

#[test]
fn gill_correlations_match_the_bernoulli_oracle() {
    for seed in 0..3 {
        let (config, log) = reference_log(T, seed);
        let kappa = correlations(&log, &config, AnalysisMode::Gill).unwrap();
        let counts = tally_pairs(&log);
        for pair in SettingPair::ALL {
            let expected = gill_oracle(
                config.angle(Side::Left, pair.a).radians(),
                config.angle(Side::Right, pair.b).radians(),
            );
            let n = counts.get(pair).n_total() as f64;
            let se = ((1.0 - expected * expected) / n).sqrt().max(1.0 / n);
            let got = kappa.get(pair);
            assert!(
                (got - expected).abs() < 4.0 * se,
                "seed {seed} pair {pair}: {got} vs {expected}"
            );
            assert!((-1.0..=1.0).contains(&got));
        }
        assert!(kappa.contrast().abs() <= 2.0);
    }
    // The published configuration gives κ_11 = −cos(π/4) for this oracle.
    assert!((gill_oracle(0.0, FRAC_PI_8) + FRAC_PI_4.cos()).abs() < 1e-15);
}

#[test]
fn malus_error_shrinks_with_more_trials() {
    let error = |trials: u64, seed: u64| {
        let (config, log) = reference_log(trials, seed);
        let kappa = correlations(&log, &config, AnalysisMode::Malus).unwrap();
        SettingPair::ALL
            .iter()
            .map(|&p| {
                let delta = config.angle(Side::Right, p.b).radians() - config.angle(Side::Left, p.a).radians();
                (kappa.get(p) - (2.0 * delta).cos()).abs()
            })
            .sum::<f64>()
    };
    let median = |trials: u64| {
        let mut errs: Vec<f64> = (0..20).map(|s| error(trials, s)).collect();
        errs.sort_by(f64::total_cmp);
        (errs[9] + errs[10]) / 2.0
    };
    let (at_t, at_4t) = (median(10_000), median(40_000));
    assert!(at_4t <= at_t, "median error {at_4t} at 4T vs {at_t} at T");
}

#[test]
fn x_rate_does_not_depend_on_b_label() {
    for seed in 0..3 {
        let (_, log) = reference_log(T, seed);
        for side in [Side::Left, Side::Right] {
            let other = match side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
            };
            let mut n = [0f64; 2];
            let mut k = [0f64; 2];
            for rec in &log {
                let i = rec.label(other).index();
                n[i] += 1.0;
                k[i] += rec.detected(side) as u8 as f64;
            }
            let p = [k[0] / n[0], k[1] / n[1]];
            let se = (p[0] * (1.0 - p[0]) / n[0] + p[1] * (1.0 - p[1]) / n[1]).sqrt();
            assert!((p[0] - p[1]).abs() < 4.0 * se, "seed {seed} {side:?}: {p:?}");
        }
    }
}

#[test]
fn stride_equal_to_length_gives_the_summary() {
    let (config, log) = reference_log(5_000, 4);
    for mode in [AnalysisMode::Gill, AnalysisMode::Malus] {
        let report = running_report(&log, &config, mode, NonZeroU64::new(5_000).unwrap());
        assert_eq!(report.running_curve.len(), 1);
        let summary = report.summary.unwrap();
        assert_eq!(report.running_curve[0], summary);
        assert_eq!(summary.kappa, correlations(&log, &config, mode).unwrap());
    }
}

#[test]
fn threshold_baseline_is_a_local_model() {
    // Threshold detectors at the published angles: X with θ=0 fires exactly
    // on VH, X with θ=π/4 never fires (intensity ½ is not above ½), and Y
    // with θ=±π/8 fires exactly on HV.
    let config = ExperimentConfig::reference(20_000, 9);
    let out = run_with_strategies(&config, ThresholdLhv, ThresholdLhv).unwrap();
    let kappa = correlations(&out.log, &config, AnalysisMode::Gill).unwrap();
    let counts = tally_pairs(&out.log);
    let one = SettingLabel::One;
    let two = SettingLabel::Two;
    assert_eq!(kappa.get(SettingPair::new(one, one)), -1.0);
    assert_eq!(kappa.get(SettingPair::new(one, two)), -1.0);
    for pair in [SettingPair::new(two, one), SettingPair::new(two, two)] {
        let se = 1.0 / (counts.get(pair).n_total() as f64).sqrt();
        assert!(kappa.get(pair).abs() < 4.0 * se);
    }
    // Same seed, same labels: the strategy only changes detections.
    let reference = run_experiment(&config).unwrap();
    for (a, b) in out.log.iter().zip(&reference) {
        assert_eq!(
            (a.index, a.mode, a.a_label, a.b_label),
            (b.index, b.mode, b.a_label, b.b_label)
        );
    }
}
