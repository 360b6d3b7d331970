//! Configuration and trial-log value types shared by every role.

use core::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use core::fmt;

use crate::angle::Angle;

/// Measurement side. `Left` is station X (fed by randomizer A), `Right` is
/// station Y (fed by randomizer B).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

/// Which of the two orthogonal pulse pairs the source emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SourceMode {
    /// Axis 0 to the left, axis π/2 to the right.
    VH,
    /// Axis π/2 to the left, axis 0 to the right.
    HV,
}

impl SourceMode {
    pub fn axis(self, side: Side) -> PulseAxis {
        match (self, side) {
            (SourceMode::VH, Side::Left) | (SourceMode::HV, Side::Right) => PulseAxis::Zero,
            (SourceMode::VH, Side::Right) | (SourceMode::HV, Side::Left) => PulseAxis::HalfPi,
        }
    }

    /// Recovers the mode from the axis seen on the left.
    pub fn from_left_axis(axis: PulseAxis) -> Self {
        match axis {
            PulseAxis::Zero => SourceMode::VH,
            PulseAxis::HalfPi => SourceMode::HV,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceMode::VH => "VH",
            SourceMode::HV => "HV",
        }
    }
}

/// Polarization axis of a source pulse. Cells are indexed by this value,
/// never by a vertical/horizontal name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PulseAxis {
    Zero,
    HalfPi,
}

impl PulseAxis {
    pub const ALL: [PulseAxis; 2] = [PulseAxis::Zero, PulseAxis::HalfPi];

    pub fn angle(self) -> Angle {
        match self {
            PulseAxis::Zero => Angle::ZERO,
            PulseAxis::HalfPi => Angle::QUARTER_TURN,
        }
    }

    pub fn orthogonal(self) -> PulseAxis {
        match self {
            PulseAxis::Zero => PulseAxis::HalfPi,
            PulseAxis::HalfPi => PulseAxis::Zero,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Measurement-setting label chosen by a randomizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SettingLabel {
    One,
    Two,
}

impl SettingLabel {
    pub const ALL: [SettingLabel; 2] = [SettingLabel::One, SettingLabel::Two];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(SettingLabel::One),
            2 => Some(SettingLabel::Two),
            _ => None,
        }
    }
}

impl fmt::Display for SettingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// How a uniform draw `u` is compared to the Malus intensity `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DetectorRule {
    /// Detect iff `u < p`: intensity 0 never fires, intensity 1 always does.
    #[default]
    StrictLess,
    /// Detect iff `u <= p`.
    LessOrEqual,
}

impl DetectorRule {
    pub fn fires(self, u: f64, intensity: f64) -> bool {
        match self {
            DetectorRule::StrictLess => u < intensity,
            DetectorRule::LessOrEqual => u <= intensity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorRule::StrictLess => "strict_less",
            DetectorRule::LessOrEqual => "less_or_equal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "strict_less" => Some(DetectorRule::StrictLess),
            "less_or_equal" => Some(DetectorRule::LessOrEqual),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("{side:?} angle for label {label} is not finite")]
    NonFiniteAngle { side: Side, label: SettingLabel },
    #[error("{0:?} angles for labels 1 and 2 coincide")]
    DuplicateAngles(Side),
}

/// Everything that determines a simulated run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Station X angles for labels 1 and 2.
    pub left_angles: [Angle; 2],
    /// Station Y angles for labels 1 and 2.
    pub right_angles: [Angle; 2],
    pub trials: u64,
    pub master_seed: u64,
    pub detector_rule: DetectorRule,
}

impl ExperimentConfig {
    /// θ_l ∈ {0, π/4}, θ_r ∈ {π/8, −π/8}: the setting table for which the
    /// singlet-state contrast is 2√2.
    pub const REFERENCE_LEFT: [Angle; 2] = [Angle::ZERO, Angle::from_radians(FRAC_PI_4)];
    pub const REFERENCE_RIGHT: [Angle; 2] = [Angle::from_radians(FRAC_PI_8), Angle::from_radians(-FRAC_PI_8)];

    pub fn reference(trials: u64, master_seed: u64) -> Self {
        ExperimentConfig {
            left_angles: Self::REFERENCE_LEFT,
            right_angles: Self::REFERENCE_RIGHT,
            trials,
            master_seed,
            detector_rule: DetectorRule::StrictLess,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::NoTrials);
        }
        for (side, angles) in [(Side::Left, &self.left_angles), (Side::Right, &self.right_angles)] {
            for label in SettingLabel::ALL {
                if !angles[label.index()].is_finite() {
                    return Err(ConfigError::NonFiniteAngle { side, label });
                }
            }
            if angles[0].canonical() == angles[1].canonical() {
                return Err(ConfigError::DuplicateAngles(side));
            }
        }
        Ok(())
    }

    pub fn angles(&self, side: Side) -> [Angle; 2] {
        match side {
            Side::Left => self.left_angles,
            Side::Right => self.right_angles,
        }
    }

    pub fn angle(&self, side: Side, label: SettingLabel) -> Angle {
        self.angles(side)[label.index()]
    }
}

/// One protocol round as assembled by the collector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TrialRecord {
    pub index: u64,
    pub mode: SourceMode,
    pub a_label: SettingLabel,
    pub b_label: SettingLabel,
    pub x_detected: bool,
    pub y_detected: bool,
}

impl TrialRecord {
    pub fn label(&self, side: Side) -> SettingLabel {
        match side {
            Side::Left => self.a_label,
            Side::Right => self.b_label,
        }
    }

    pub fn detected(&self, side: Side) -> bool {
        match side {
            Side::Left => self.x_detected,
            Side::Right => self.y_detected,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_axes() {
        assert_eq!(SourceMode::VH.axis(Side::Left).angle(), Angle::ZERO);
        assert_eq!(SourceMode::VH.axis(Side::Right).angle(), Angle::QUARTER_TURN);
        assert_eq!(SourceMode::HV.axis(Side::Left).angle(), Angle::QUARTER_TURN);
        assert_eq!(SourceMode::HV.axis(Side::Right).angle(), Angle::ZERO);
        for mode in [SourceMode::VH, SourceMode::HV] {
            assert_eq!(mode.axis(Side::Left).orthogonal(), mode.axis(Side::Right));
            assert_eq!(SourceMode::from_left_axis(mode.axis(Side::Left)), mode);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::reference(10, 1);
        assert_eq!(c.validate(), Ok(()));
        c.trials = 0;
        assert_eq!(c.validate(), Err(ConfigError::NoTrials));
        c.trials = 1;
        c.right_angles = [
            Angle::from_radians(0.5),
            Angle::from_radians(0.5 + core::f64::consts::TAU),
        ];
        assert_eq!(c.validate(), Err(ConfigError::DuplicateAngles(Side::Right)));
        c.right_angles = [Angle::from_radians(f64::NAN), Angle::ZERO];
        assert!(matches!(c.validate(), Err(ConfigError::NonFiniteAngle { .. })));
    }

    #[test]
    fn detector_rules_at_edges() {
        assert!(!DetectorRule::StrictLess.fires(0.0, 0.0));
        assert!(DetectorRule::LessOrEqual.fires(0.0, 0.0));
        assert!(DetectorRule::StrictLess.fires(1.0 - f64::EPSILON, 1.0));
        for rule in [DetectorRule::StrictLess, DetectorRule::LessOrEqual] {
            assert_eq!(DetectorRule::parse(rule.as_str()), Some(rule));
        }
    }

    #[test]
    fn label_numbers() {
        assert_eq!(SettingLabel::from_number(1), Some(SettingLabel::One));
        assert_eq!(SettingLabel::from_number(2), Some(SettingLabel::Two));
        assert_eq!(SettingLabel::from_number(3), None);
        assert_eq!(SettingLabel::Two.number(), 2);
    }
}
