//! The five computers of the locality protocol, plus collector and referee.
//!
//! Each role is a separate state machine and only ever sees the messages on
//! its inbound edges:
//!
//! ```text
//!   O ──pulse──▶ X ◀──setting── A          X ──outcome──▶ collector ──record──▶ referee
//!   O ──pulse──▶ Y ◀──setting── B          Y ──outcome──▶ collector
//!                                          A, B ──disclosure──▶ referee
//! ```
//!
//! A [`Station`] has no method accepting anything from the other station or
//! the other randomizer, so the topology is enforced by the type signatures.
//! [`run_experiment`] drives all roles in-process in the fixed order
//! O, A, B, X, Y for each trial.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::angle::{malus_intensity, Angle};
use crate::model::{
    ConfigError, DetectorRule, ExperimentConfig, PulseAxis, SettingLabel, Side, SourceMode, TrialRecord,
};
use crate::stream::{derive_stream, RandomStream, Role};

/// Source → station. Carries only the pulse destined for the receiving station.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourcePulseMsg {
    pub trial: u64,
    pub axis: PulseAxis,
}

/// Randomizer → its own station. The label, not the angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SettingMsg {
    pub trial: u64,
    pub label: SettingLabel,
}

/// Station → collector. Besides the detection bit it carries the station's own
/// label and pulse axis, both of which were already local to that station.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutcomeMsg {
    pub trial: u64,
    pub label: SettingLabel,
    pub axis: PulseAxis,
    pub detected: bool,
}

/// What the source emits in one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceEmission {
    pub to_x: SourcePulseMsg,
    pub to_y: SourcePulseMsg,
    pub mode: SourceMode,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("{channel} message for trial {got} arrived, expected trial {expected}")]
    OutOfOrder {
        channel: &'static str,
        expected: u64,
        got: u64,
    },
    #[error("trial {trial}: stations report non-orthogonal pulse axes")]
    AxisMismatch { trial: u64 },
    #[error("trial {trial}: outcome label {label} does not match")]
    LabelMismatch { trial: u64, label: SettingLabel },
}

fn check_order(channel: &'static str, expected: &mut u64, got: u64) -> Result<(), ProtocolError> {
    if got != *expected {
        return Err(ProtocolError::OutOfOrder {
            channel,
            expected: *expected,
            got,
        });
    }
    *expected += 1;
    Ok(())
}

/// One fair choice between the two pulse pairs.
pub fn source_step(stream: &mut RandomStream, trial: u64) -> SourceEmission {
    let mode = if stream.next_bool() {
        SourceMode::VH
    } else {
        SourceMode::HV
    };
    SourceEmission {
        to_x: SourcePulseMsg {
            trial,
            axis: mode.axis(Side::Left),
        },
        to_y: SourcePulseMsg {
            trial,
            axis: mode.axis(Side::Right),
        },
        mode,
    }
}

/// One fair coin toss for a setting label.
pub fn randomizer_step(stream: &mut RandomStream, trial: u64) -> SettingMsg {
    let label = if stream.next_bool() {
        SettingLabel::One
    } else {
        SettingLabel::Two
    };
    SettingMsg { trial, label }
}

/// How a station turns its local inputs into a detection bit.
///
/// `own_past_labels` holds the labels this station received on earlier trials;
/// the shipped strategies ignore it.
pub trait StationStrategy {
    fn detect(
        &mut self,
        setting: Angle,
        pulse_axis: Angle,
        stream: &mut RandomStream,
        own_past_labels: &[SettingLabel],
    ) -> bool;
}

/// Malus-law photodetector: one uniform draw compared with
/// `cos²(setting − pulse_axis)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MalusPoisson {
    pub rule: DetectorRule,
}

impl StationStrategy for MalusPoisson {
    fn detect(&mut self, setting: Angle, pulse_axis: Angle, stream: &mut RandomStream, _: &[SettingLabel]) -> bool {
        self.rule
            .fires(stream.next_uniform(), malus_intensity(setting, pulse_axis))
    }
}

/// Deterministic local hidden-variable baseline: fire iff the transmitted
/// fraction exceeds one half. Draws nothing from the stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ThresholdLhv;

impl StationStrategy for ThresholdLhv {
    fn detect(&mut self, setting: Angle, pulse_axis: Angle, _: &mut RandomStream, _: &[SettingLabel]) -> bool {
        malus_intensity(setting, pulse_axis) > 0.5
    }
}

pub fn station_step<S: StationStrategy + ?Sized>(
    strategy: &mut S,
    setting: Angle,
    pulse_axis: Angle,
    stream: &mut RandomStream,
) -> bool {
    strategy.detect(setting, pulse_axis, stream, &[])
}

/// Computer O.
#[derive(Debug, Clone)]
pub struct Source {
    stream: RandomStream,
    next_trial: u64,
}

impl Source {
    pub fn new(master_seed: u64) -> Self {
        Source {
            stream: derive_stream(master_seed, Role::Source),
            next_trial: 0,
        }
    }

    pub fn emit(&mut self) -> SourceEmission {
        let e = source_step(&mut self.stream, self.next_trial);
        self.next_trial += 1;
        e
    }
}

/// Computer A or B. Keeps a private copy of every label for later disclosure.
#[derive(Debug, Clone)]
pub struct Randomizer {
    stream: RandomStream,
    emitted: Vec<SettingLabel>,
}

impl Randomizer {
    /// `Side::Left` is A (uses the `RandA` stream), `Side::Right` is B.
    pub fn new(master_seed: u64, side: Side) -> Self {
        let role = match side {
            Side::Left => Role::RandA,
            Side::Right => Role::RandB,
        };
        Randomizer {
            stream: derive_stream(master_seed, role),
            emitted: Vec::new(),
        }
    }

    pub fn emit(&mut self) -> SettingMsg {
        let msg = randomizer_step(&mut self.stream, self.emitted.len() as u64);
        self.emitted.push(msg.label);
        msg
    }

    pub fn disclose(&self) -> &[SettingLabel] {
        &self.emitted
    }

    pub fn into_disclosure(self) -> Vec<SettingLabel> {
        self.emitted
    }
}

/// Computer X or Y.
///
/// Inbound messages from the source and from the station's own randomizer
/// may arrive interleaved in any order; each channel must be in trial order.
/// A trial is measured as soon as both of its inputs are present.
pub struct Station<S> {
    angles: [Angle; 2],
    strategy: S,
    stream: RandomStream,
    pulses: VecDeque<SourcePulseMsg>,
    settings: VecDeque<SettingMsg>,
    next_pulse: u64,
    next_setting: u64,
    past_labels: Vec<SettingLabel>,
}

impl<S: StationStrategy> Station<S> {
    /// `Side::Left` is X (uses `StationX` stream), `Side::Right` is Y.
    pub fn new(config: &ExperimentConfig, side: Side, strategy: S) -> Self {
        let role = match side {
            Side::Left => Role::StationX,
            Side::Right => Role::StationY,
        };
        Station {
            angles: config.angles(side),
            strategy,
            stream: derive_stream(config.master_seed, role),
            pulses: VecDeque::new(),
            settings: VecDeque::new(),
            next_pulse: 0,
            next_setting: 0,
            past_labels: Vec::new(),
        }
    }

    pub fn on_pulse(&mut self, msg: SourcePulseMsg) -> Result<Option<OutcomeMsg>, ProtocolError> {
        check_order("source pulse", &mut self.next_pulse, msg.trial)?;
        self.pulses.push_back(msg);
        Ok(self.try_measure())
    }

    pub fn on_setting(&mut self, msg: SettingMsg) -> Result<Option<OutcomeMsg>, ProtocolError> {
        check_order("setting", &mut self.next_setting, msg.trial)?;
        self.settings.push_back(msg);
        Ok(self.try_measure())
    }

    /// Trials measured so far.
    pub fn completed(&self) -> u64 {
        self.past_labels.len() as u64
    }

    fn try_measure(&mut self) -> Option<OutcomeMsg> {
        if self.pulses.is_empty() || self.settings.is_empty() {
            return None;
        }
        let pulse = self.pulses.pop_front()?;
        let setting = self.settings.pop_front()?;
        // Both channels are checked for order, so the fronts share a trial.
        debug_assert_eq!(pulse.trial, setting.trial);
        let detected = self.strategy.detect(
            self.angles[setting.label.index()],
            pulse.axis.angle(),
            &mut self.stream,
            &self.past_labels,
        );
        self.past_labels.push(setting.label);
        Some(OutcomeMsg {
            trial: pulse.trial,
            label: setting.label,
            axis: pulse.axis,
            detected,
        })
    }
}

/// Pairs up station outcomes into [`TrialRecord`]s.
#[derive(Debug, Default)]
pub struct Collector {
    from_x: VecDeque<OutcomeMsg>,
    from_y: VecDeque<OutcomeMsg>,
    next_x: u64,
    next_y: u64,
}

impl Collector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_outcome(&mut self, side: Side, msg: OutcomeMsg) -> Result<Option<TrialRecord>, ProtocolError> {
        match side {
            Side::Left => {
                check_order("outcome X", &mut self.next_x, msg.trial)?;
                self.from_x.push_back(msg);
            }
            Side::Right => {
                check_order("outcome Y", &mut self.next_y, msg.trial)?;
                self.from_y.push_back(msg);
            }
        }
        if self.from_x.is_empty() || self.from_y.is_empty() {
            return Ok(None);
        }
        let (x, y) = match (self.from_x.pop_front(), self.from_y.pop_front()) {
            (Some(x), Some(y)) => (x, y),
            _ => return Ok(None),
        };
        if x.axis.orthogonal() != y.axis {
            return Err(ProtocolError::AxisMismatch { trial: x.trial });
        }
        Ok(Some(TrialRecord {
            index: x.trial,
            mode: SourceMode::from_left_axis(x.axis),
            a_label: x.label,
            b_label: y.label,
            x_detected: x.detected,
            y_detected: y.detected,
        }))
    }
}

/// Output of an in-process run: the collector's log plus both randomizers'
/// disclosed label sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub log: Vec<TrialRecord>,
    pub disclosed_a: Vec<SettingLabel>,
    pub disclosed_b: Vec<SettingLabel>,
}

/// Runs every role in-process with arbitrary station strategies.
pub fn run_with_strategies<SX, SY>(config: &ExperimentConfig, x: SX, y: SY) -> Result<RunOutput, ConfigError>
where
    SX: StationStrategy,
    SY: StationStrategy,
{
    config.validate()?;
    let mut source = Source::new(config.master_seed);
    let mut rand_a = Randomizer::new(config.master_seed, Side::Left);
    let mut rand_b = Randomizer::new(config.master_seed, Side::Right);
    let mut station_x = Station::new(config, Side::Left, x);
    let mut station_y = Station::new(config, Side::Right, y);
    let mut collector = Collector::new();
    let mut log = Vec::with_capacity(config.trials as usize);

    for _ in 0..config.trials {
        let emission = source.emit();
        let setting_a = rand_a.emit();
        let setting_b = rand_b.emit();
        let out_x = deliver(&mut station_x, emission.to_x, setting_a);
        let out_y = deliver(&mut station_y, emission.to_y, setting_b);
        collector
            .on_outcome(Side::Left, out_x)
            .expect("in-process outcomes are in order");
        let record = collector
            .on_outcome(Side::Right, out_y)
            .expect("in-process outcomes are in order")
            .expect("both outcomes delivered");
        debug_assert_eq!(record.mode, emission.mode);
        log.push(record);
    }

    Ok(RunOutput {
        log,
        disclosed_a: rand_a.into_disclosure(),
        disclosed_b: rand_b.into_disclosure(),
    })
}

fn deliver<S: StationStrategy>(station: &mut Station<S>, pulse: SourcePulseMsg, setting: SettingMsg) -> OutcomeMsg {
    let first = station.on_pulse(pulse).expect("in-process pulses are in order");
    debug_assert!(first.is_none());
    station
        .on_setting(setting)
        .expect("in-process settings are in order")
        .expect("pulse and setting both delivered")
}

/// The reference run: Malus-law detectors at both stations.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>, ConfigError> {
    let station = MalusPoisson {
        rule: config.detector_rule,
    };
    run_with_strategies(config, station, station).map(|out| out.log)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RefereeReport {
    pub trials_checked: u64,
    pub mismatches: u64,
    pub verdict: Verdict,
}

/// Confirms that the labels the randomizers disclose are the ones in the log.
///
/// Only the common prefix of the three sequences is compared; any length
/// other than `expected_trials` fails.
pub fn referee_verify(
    expected_trials: u64,
    disclosed_a: &[SettingLabel],
    disclosed_b: &[SettingLabel],
    log: &[TrialRecord],
) -> RefereeReport {
    let checked = disclosed_a.len().min(disclosed_b.len()).min(log.len());
    let mismatches = log[..checked]
        .iter()
        .zip(disclosed_a)
        .zip(disclosed_b)
        .enumerate()
        .filter(|(n, ((rec, a), b))| rec.index != *n as u64 || rec.a_label != **a || rec.b_label != **b)
        .count() as u64;
    let lengths_ok = [disclosed_a.len(), disclosed_b.len(), log.len()]
        .iter()
        .all(|&len| len as u64 == expected_trials);
    RefereeReport {
        trials_checked: checked as u64,
        mismatches,
        verdict: if mismatches == 0 && lengths_ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_4;

    fn frequency(n: usize, mut hit: impl FnMut() -> bool) -> f64 {
        (0..n).filter(|_| hit()).count() as f64 / n as f64
    }

    #[test]
    fn source_modes_are_fair_and_orthogonal() {
        let mut s = derive_stream(11, Role::Source);
        let freq = frequency(100_000, || {
            let e = source_step(&mut s, 0);
            assert_eq!(e.to_x.axis.orthogonal(), e.to_y.axis);
            assert_eq!(e.to_x.axis, e.mode.axis(Side::Left));
            e.mode == SourceMode::VH
        });
        assert!((freq - 0.5).abs() < 0.005, "{freq}");
    }

    #[test]
    fn randomizer_labels_fair_and_independent() {
        let mut a = Randomizer::new(5, Side::Left);
        let mut b = Randomizer::new(5, Side::Right);
        let n = 100_000;
        let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = if a.emit().label == SettingLabel::One { 1.0 } else { -1.0 };
            let y = if b.emit().label == SettingLabel::One { 1.0 } else { -1.0 };
            sa += x;
            sb += y;
            sab += x * y;
        }
        let n = n as f64;
        assert!((0.5 * (1.0 + sa / n) - 0.5).abs() < 0.005);
        assert!((0.5 * (1.0 + sb / n) - 0.5).abs() < 0.005);
        let cov = sab / n - (sa / n) * (sb / n);
        assert!(cov.abs() < 0.01, "{cov}");
        assert_eq!(a.disclose().len(), 100_000);
    }

    #[test]
    fn station_step_edge_cases() {
        let mut s = derive_stream(1, Role::StationX);
        let mut strict = MalusPoisson::default();
        let mut loose = MalusPoisson {
            rule: DetectorRule::LessOrEqual,
        };
        for _ in 0..10_000 {
            assert!(station_step(&mut strict, Angle::ZERO, Angle::ZERO, &mut s));
            assert!(station_step(&mut loose, Angle::ZERO, Angle::ZERO, &mut s));
            assert!(!station_step(&mut strict, Angle::QUARTER_TURN, Angle::ZERO, &mut s));
        }
        let quarter = Angle::from_radians(FRAC_PI_4);
        let rate = frequency(100_000, || station_step(&mut strict, quarter, Angle::ZERO, &mut s));
        assert!((rate - 0.5).abs() < 0.005, "{rate}");
    }

    #[test]
    fn threshold_baseline_is_deterministic() {
        let mut s = derive_stream(1, Role::StationX);
        let mut t = ThresholdLhv;
        assert!(station_step(&mut t, Angle::ZERO, Angle::ZERO, &mut s));
        assert!(!station_step(
            &mut t,
            Angle::from_radians(FRAC_PI_4),
            Angle::ZERO,
            &mut s
        ));
    }

    #[test]
    fn station_buffers_either_arrival_order() {
        let config = ExperimentConfig::reference(3, 9);
        let mut st = Station::new(&config, Side::Left, MalusPoisson::default());
        let pulse = |trial| SourcePulseMsg {
            trial,
            axis: PulseAxis::Zero,
        };
        let setting = |trial| SettingMsg {
            trial,
            label: SettingLabel::One,
        };
        // Settings run ahead of pulses.
        assert_eq!(st.on_setting(setting(0)), Ok(None));
        assert_eq!(st.on_setting(setting(1)), Ok(None));
        let out = st.on_pulse(pulse(0)).unwrap().unwrap();
        // label 1 on the left is θ = 0, parallel to axis 0
        assert!(out.detected);
        assert_eq!(out.trial, 0);
        assert_eq!(st.on_pulse(pulse(1)).unwrap().map(|o| o.trial), Some(1));
        assert_eq!(st.on_pulse(pulse(2)), Ok(None));
        assert_eq!(st.on_setting(setting(2)).unwrap().map(|o| o.trial), Some(2));
        assert_eq!(st.completed(), 3);
    }

    #[test]
    fn station_rejects_out_of_order() {
        let config = ExperimentConfig::reference(3, 9);
        let mut st = Station::new(&config, Side::Right, MalusPoisson::default());
        let err = st
            .on_pulse(SourcePulseMsg {
                trial: 1,
                axis: PulseAxis::Zero,
            })
            .unwrap_err();
        assert_eq!(
            err,
            ProtocolError::OutOfOrder {
                channel: "source pulse",
                expected: 0,
                got: 1
            }
        );
    }

    #[test]
    fn collector_checks_axes() {
        let mut c = Collector::new();
        let msg = OutcomeMsg {
            trial: 0,
            label: SettingLabel::One,
            axis: PulseAxis::Zero,
            detected: true,
        };
        assert_eq!(c.on_outcome(Side::Left, msg), Ok(None));
        assert_eq!(
            c.on_outcome(Side::Right, msg),
            Err(ProtocolError::AxisMismatch { trial: 0 })
        );
    }

    #[test]
    fn minimal_and_repeatable_runs() {
        let config = ExperimentConfig::reference(1, 42);
        let log = run_experiment(&config).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].index, 0);

        let config = ExperimentConfig::reference(2_000, 42);
        assert_eq!(run_experiment(&config), run_experiment(&config));
        let other = ExperimentConfig {
            master_seed: 43,
            ..config
        };
        assert_ne!(run_experiment(&config), run_experiment(&other));
    }

    #[test]
    fn invalid_config_rejected() {
        let config = ExperimentConfig::reference(0, 42);
        assert_eq!(run_experiment(&config), Err(ConfigError::NoTrials));
    }

    #[test]
    fn referee_cases() {
        let config = ExperimentConfig::reference(100, 3);
        let out = run_with_strategies(&config, MalusPoisson::default(), MalusPoisson::default()).unwrap();
        let ok = referee_verify(100, &out.disclosed_a, &out.disclosed_b, &out.log);
        assert_eq!(
            ok,
            RefereeReport {
                trials_checked: 100,
                mismatches: 0,
                verdict: Verdict::Pass
            }
        );

        let mut tampered = out.disclosed_b.clone();
        tampered[7] = match tampered[7] {
            SettingLabel::One => SettingLabel::Two,
            SettingLabel::Two => SettingLabel::One,
        };
        let bad = referee_verify(100, &out.disclosed_a, &tampered, &out.log);
        assert_eq!(bad.mismatches, 1);
        assert_eq!(bad.verdict, Verdict::Fail);

        let short = referee_verify(100, &out.disclosed_a[..40], &out.disclosed_b, &out.log);
        assert_eq!((short.trials_checked, short.verdict), (40, Verdict::Fail));

        assert_eq!(referee_verify(1, &[], &[], &[]).verdict, Verdict::Fail);
        assert_eq!(referee_verify(0, &[], &[], &[]).verdict, Verdict::Pass);
    }
}
