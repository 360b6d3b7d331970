//! Property tests for the protocol, estimator and stream invariants.

use std::num::NonZeroU64;

use eprb_core::analysis::{
    chsh, correlations, estimate_factors, kappa_gill, kappa_malus, running_report, tally_pairs, tally_sides,
};
use eprb_core::protocol::referee_verify;
use eprb_core::{
    derive_stream, run_experiment, AnalysisMode, Angle, DetectorRule, ExperimentConfig, Role, SettingLabel,
    SettingPair, Side, SourceMode, TrialRecord, Verdict,
};
use proptest::prelude::*;

fn arb_label() -> impl Strategy<Value = SettingLabel> {
    prop_oneof![Just(SettingLabel::One), Just(SettingLabel::Two)]
}

fn arb_log() -> impl Strategy<Value = Vec<TrialRecord>> {
    let rec = (
        prop_oneof![Just(SourceMode::VH), Just(SourceMode::HV)],
        arb_label(),
        arb_label(),
        any::<bool>(),
        any::<bool>(),
    );
    prop::collection::vec(rec, 0..200).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (mode, a, b, x, y))| TrialRecord {
                index: i as u64,
                mode,
                a_label: a,
                b_label: b,
                x_detected: x,
                y_detected: y,
            })
            .collect()
    })
}

fn arb_angle_pair() -> impl Strategy<Value = [Angle; 2]> {
    (0.0..std::f64::consts::TAU, 0.01f64..3.0).prop_map(|(a, d)| [Angle::from_radians(a), Angle::from_radians(a + d)])
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        arb_angle_pair(),
        arb_angle_pair(),
        1u64..400,
        any::<u64>(),
        prop_oneof![Just(DetectorRule::StrictLess), Just(DetectorRule::LessOrEqual)],
    )
        .prop_map(|(l, r, trials, seed, rule)| ExperimentConfig {
            left_angles: l,
            right_angles: r,
            trials,
            master_seed: seed,
            detector_rule: rule,
        })
}

fn labels(log: &[TrialRecord], side: Side) -> Vec<SettingLabel> {
    log.iter().map(|r| r.label(side)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn runs_are_pure_functions_of_the_config(config in arb_config()) {
        let log = run_experiment(&config).unwrap();
        prop_assert_eq!(log.len() as u64, config.trials);
        for (n, rec) in log.iter().enumerate() {
            prop_assert_eq!(rec.index, n as u64);
        }
        prop_assert_eq!(run_experiment(&config).unwrap(), log);
    }

    #[test]
    fn pair_counts_partition_the_log(log in arb_log()) {
        let counts = tally_pairs(&log);
        let total: u64 = SettingPair::ALL.iter().map(|&p| counts.get(p).n_total()).sum();
        prop_assert_eq!(total, log.len() as u64);
        prop_assert_eq!(counts.total(), log.len() as u64);
        for p in SettingPair::ALL {
            let t = counts.get(p);
            prop_assert_eq!(t.n_equal + t.n_unequal, t.n_total());
            match kappa_gill(&counts, p) {
                Ok(k) => prop_assert!((-1.0..=1.0).contains(&k)),
                Err(_) => prop_assert_eq!(t.n_total(), 0),
            }
        }
    }

    #[test]
    fn side_counts_cover_every_trial(log in arb_log()) {
        let (left, right) = tally_sides(&log);
        prop_assert_eq!(left.total_exposures(), log.len() as u64);
        prop_assert_eq!(right.total_exposures(), log.len() as u64);
    }

    #[test]
    fn contrast_is_recomputable(config in arb_config().prop_map(|c| ExperimentConfig { trials: 400, ..c })) {
        let log = run_experiment(&config).unwrap();
        for mode in [AnalysisMode::Gill, AnalysisMode::Malus] {
            let report = running_report(&log, &config, mode, NonZeroU64::new(50).unwrap());
            for point in report.running_curve.iter().chain(report.summary.as_ref().ok()) {
                let s = chsh(&point.kappa.to_map()).unwrap();
                prop_assert!((s - point.contrast).abs() < 1e-12);
                if mode == AnalysisMode::Gill {
                    for p in SettingPair::ALL {
                        prop_assert!(point.kappa.get(p).abs() <= 1.0);
                    }
                }
            }
        }
        if let Ok(k) = correlations(&log, &config, AnalysisMode::Malus) {
            let (l, r) = tally_sides(&log);
            for p in SettingPair::ALL {
                let fl = estimate_factors(&l, p.a, config.angle(Side::Left, p.a)).unwrap();
                let fr = estimate_factors(&r, p.b, config.angle(Side::Right, p.b)).unwrap();
                prop_assert!(fl.cos_est.powi(2) <= 1.0 && fl.sin_est.powi(2) <= 1.0);
                prop_assert_eq!(kappa_malus(&fl, &fr), k.get(p));
                // cos²Δ + sin²Δ factorises into the two sides' norms, which
                // bounds κ* even when sampling noise breaks cos² + sin² = 1.
                let norm = |f: &eprb_core::analysis::FactorEstimate| f.cos_est.powi(2) + f.sin_est.powi(2);
                prop_assert!(k.get(p).abs() <= norm(&fl) * norm(&fr) + 1e-12);
            }
        }
    }

    #[test]
    fn referee_passes_exactly_on_faithful_disclosure(config in arb_config(), flip in any::<prop::sample::Index>(), side_a in any::<bool>()) {
        let log = run_experiment(&config).unwrap();
        let (a, b) = (labels(&log, Side::Left), labels(&log, Side::Right));
        let ok = referee_verify(config.trials, &a, &b, &log);
        prop_assert_eq!(ok.verdict, Verdict::Pass);
        prop_assert_eq!((ok.trials_checked, ok.mismatches), (config.trials, 0));

        let (mut ta, mut tb) = (a.clone(), b.clone());
        let target = if side_a { &mut ta } else { &mut tb };
        let i = flip.index(target.len());
        target[i] = match target[i] { SettingLabel::One => SettingLabel::Two, SettingLabel::Two => SettingLabel::One };
        let bad = referee_verify(config.trials, &ta, &tb, &log);
        prop_assert_eq!(bad.verdict, Verdict::Fail);
        prop_assert_eq!(bad.mismatches, 1);

        let short = referee_verify(config.trials, &a[..i], &b, &log);
        prop_assert_eq!(short.verdict, Verdict::Fail);
        prop_assert_eq!(short.trials_checked, i as u64);
    }

    #[test]
    fn streams_replay_and_differ(seed in any::<u64>()) {
        let draw = |s: u64, role| {
            let mut st = derive_stream(s, role);
            (0..8).map(|_| st.next_u64()).collect::<Vec<_>>()
        };
        for role in Role::ALL {
            prop_assert_eq!(draw(seed, role), draw(seed, role));
            prop_assert_ne!(draw(seed, role), draw(seed.wrapping_add(1), role));
            for other in Role::ALL.into_iter().filter(|&r| r != role) {
                prop_assert_ne!(draw(seed, role), draw(seed, other));
            }
        }
    }
}
