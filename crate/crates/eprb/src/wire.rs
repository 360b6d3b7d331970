//! Flat newline-delimited JSON encoding shared by trial-log files, disclosure
//! files and the network protocol.
//!
//! Every line is decoded in two steps: JSON into a raw struct with plain
//! integers and strings (failure is a *malformed* line), then raw fields into
//! domain types (failure is a *domain* error naming the field).

use eprb_core::model::{PulseAxis, SettingLabel, SourceMode, TrialRecord};
use eprb_core::protocol::{RefereeReport, Verdict};
use serde::{Deserialize, Serialize};

use crate::topology::NetRole;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("malformed line: {0}")]
    Malformed(String),
    #[error("field `{field}` has invalid value {value}")]
    Domain { field: &'static str, value: String },
}

fn domain(field: &'static str, value: impl ToString) -> WireError {
    WireError::Domain {
        field,
        value: value.to_string(),
    }
}

pub(crate) fn label_from(field: &'static str, v: u64) -> Result<SettingLabel, WireError> {
    u8::try_from(v)
        .ok()
        .and_then(SettingLabel::from_number)
        .ok_or_else(|| domain(field, v))
}

pub(crate) fn bit_from(field: &'static str, v: u64) -> Result<bool, WireError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(domain(field, v)),
    }
}

pub(crate) fn mode_from(field: &'static str, v: &str) -> Result<SourceMode, WireError> {
    match v {
        "VH" => Ok(SourceMode::VH),
        "HV" => Ok(SourceMode::HV),
        _ => Err(domain(field, format!("{v:?}"))),
    }
}

pub fn axis_str(axis: PulseAxis) -> &'static str {
    match axis {
        PulseAxis::Zero => "0",
        PulseAxis::HalfPi => "pi/2",
    }
}

fn axis_from(v: &str) -> Result<PulseAxis, WireError> {
    match v {
        "0" => Ok(PulseAxis::Zero),
        "pi/2" => Ok(PulseAxis::HalfPi),
        _ => Err(domain("axis", format!("{v:?}"))),
    }
}

/// Trial record fields in canonical order: trial, mode, a, b, x, y.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub trial: u64,
    pub mode: String,
    pub a: u64,
    pub b: u64,
    pub x: u64,
    pub y: u64,
}

impl From<&TrialRecord> for RawRecord {
    fn from(r: &TrialRecord) -> Self {
        RawRecord {
            trial: r.index,
            mode: r.mode.as_str().to_owned(),
            a: r.a_label.number().into(),
            b: r.b_label.number().into(),
            x: r.x_detected.into(),
            y: r.y_detected.into(),
        }
    }
}

impl RawRecord {
    pub fn into_record(self) -> Result<TrialRecord, WireError> {
        Ok(TrialRecord {
            index: self.trial,
            mode: mode_from("mode", &self.mode)?,
            a_label: label_from("a", self.a)?,
            b_label: label_from("b", self.b)?,
            x_detected: bit_from("x", self.x)?,
            y_detected: bit_from("y", self.y)?,
        })
    }
}

pub fn encode_record(rec: &TrialRecord) -> String {
    serde_json::to_string(&RawRecord::from(rec)).expect("plain struct serializes")
}

pub fn decode_record(line: &str) -> Result<TrialRecord, WireError> {
    serde_json::from_str::<RawRecord>(line)
        .map_err(|e| WireError::Malformed(e.to_string()))?
        .into_record()
}

/// Whose labels a disclosure carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Randomizer {
    A,
    B,
}

impl Randomizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Randomizer::A => "A",
            Randomizer::B => "B",
        }
    }
}

/// One line on a connection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireMessage {
    Hello {
        role: NetRole,
    },
    SourcePulse {
        trial: u64,
        axis: PulseAxis,
    },
    Setting {
        trial: u64,
        label: SettingLabel,
    },
    Outcome {
        trial: u64,
        label: SettingLabel,
        axis: PulseAxis,
        detected: bool,
    },
    LabelDisclosure {
        trial: u64,
        side: Randomizer,
        label: SettingLabel,
    },
    /// Collector → referee: one assembled trial record.
    Record(TrialRecord),
    Report(RefereeReport),
    End,
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Hello { .. } => "HELLO",
            WireMessage::SourcePulse { .. } => "SOURCE_PULSE",
            WireMessage::Setting { .. } => "SETTING",
            WireMessage::Outcome { .. } => "OUTCOME",
            WireMessage::LabelDisclosure { .. } => "LABEL_DISCLOSURE",
            WireMessage::Record(_) => "RECORD",
            WireMessage::Report(_) => "REPORT",
            WireMessage::End => "END",
        }
    }

    pub fn trial(&self) -> Option<u64> {
        match self {
            WireMessage::SourcePulse { trial, .. }
            | WireMessage::Setting { trial, .. }
            | WireMessage::Outcome { trial, .. }
            | WireMessage::LabelDisclosure { trial, .. } => Some(*trial),
            WireMessage::Record(r) => Some(r.index),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
enum RawMessage {
    Hello {
        role: String,
    },
    SourcePulse {
        trial: u64,
        axis: String,
    },
    Setting {
        trial: u64,
        label: u64,
    },
    Outcome {
        trial: u64,
        label: u64,
        axis: String,
        detected: u64,
    },
    LabelDisclosure {
        trial: u64,
        side: String,
        label: u64,
    },
    Record {
        trial: u64,
        mode: String,
        a: u64,
        b: u64,
        x: u64,
        y: u64,
    },
    Report {
        trials_checked: u64,
        mismatches: u64,
        verdict: String,
    },
    End,
}

/// Encodes without the trailing newline.
pub fn encode(msg: &WireMessage) -> String {
    let raw = match msg {
        WireMessage::Hello { role } => RawMessage::Hello {
            role: role.as_str().to_owned(),
        },
        WireMessage::SourcePulse { trial, axis } => RawMessage::SourcePulse {
            trial: *trial,
            axis: axis_str(*axis).to_owned(),
        },
        WireMessage::Setting { trial, label } => RawMessage::Setting {
            trial: *trial,
            label: label.number().into(),
        },
        WireMessage::Outcome {
            trial,
            label,
            axis,
            detected,
        } => RawMessage::Outcome {
            trial: *trial,
            label: label.number().into(),
            axis: axis_str(*axis).to_owned(),
            detected: (*detected).into(),
        },
        WireMessage::LabelDisclosure { trial, side, label } => RawMessage::LabelDisclosure {
            trial: *trial,
            side: side.as_str().to_owned(),
            label: label.number().into(),
        },
        WireMessage::Record(r) => {
            let RawRecord {
                trial,
                mode,
                a,
                b,
                x,
                y,
            } = RawRecord::from(r);
            RawMessage::Record {
                trial,
                mode,
                a,
                b,
                x,
                y,
            }
        }
        WireMessage::Report(r) => RawMessage::Report {
            trials_checked: r.trials_checked,
            mismatches: r.mismatches,
            verdict: r.verdict.as_str().to_owned(),
        },
        WireMessage::End => RawMessage::End,
    };
    serde_json::to_string(&raw).expect("plain enum serializes")
}

pub fn decode(line: &str) -> Result<WireMessage, WireError> {
    let raw: RawMessage = serde_json::from_str(line).map_err(|e| WireError::Malformed(e.to_string()))?;
    Ok(match raw {
        RawMessage::Hello { role } => WireMessage::Hello {
            role: NetRole::parse(&role).ok_or_else(|| domain("role", format!("{role:?}")))?,
        },
        RawMessage::SourcePulse { trial, axis } => WireMessage::SourcePulse {
            trial,
            axis: axis_from(&axis)?,
        },
        RawMessage::Setting { trial, label } => WireMessage::Setting {
            trial,
            label: label_from("label", label)?,
        },
        RawMessage::Outcome {
            trial,
            label,
            axis,
            detected,
        } => WireMessage::Outcome {
            trial,
            label: label_from("label", label)?,
            axis: axis_from(&axis)?,
            detected: bit_from("detected", detected)?,
        },
        RawMessage::LabelDisclosure { trial, side, label } => WireMessage::LabelDisclosure {
            trial,
            side: match side.as_str() {
                "A" => Randomizer::A,
                "B" => Randomizer::B,
                _ => return Err(domain("side", format!("{side:?}"))),
            },
            label: label_from("label", label)?,
        },
        RawMessage::Record {
            trial,
            mode,
            a,
            b,
            x,
            y,
        } => WireMessage::Record(
            RawRecord {
                trial,
                mode,
                a,
                b,
                x,
                y,
            }
            .into_record()?,
        ),
        RawMessage::Report {
            trials_checked,
            mismatches,
            verdict,
        } => WireMessage::Report(RefereeReport {
            trials_checked,
            mismatches,
            verdict: match verdict.as_str() {
                "PASS" => Verdict::Pass,
                "FAIL" => Verdict::Fail,
                _ => return Err(domain("verdict", format!("{verdict:?}"))),
            },
        }),
        RawMessage::End => WireMessage::End,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_line_is_canonical() {
        let rec = TrialRecord {
            index: 3,
            mode: SourceMode::HV,
            a_label: SettingLabel::One,
            b_label: SettingLabel::Two,
            x_detected: true,
            y_detected: false,
        };
        let line = encode_record(&rec);
        assert_eq!(line, r#"{"trial":3,"mode":"HV","a":1,"b":2,"x":1,"y":0}"#);
        assert_eq!(decode_record(&line), Ok(rec));
    }

    #[test]
    fn message_lines() {
        let m = WireMessage::SourcePulse {
            trial: 0,
            axis: PulseAxis::HalfPi,
        };
        assert_eq!(encode(&m), r#"{"type":"SOURCE_PULSE","trial":0,"axis":"pi/2"}"#);
        assert_eq!(encode(&WireMessage::End), r#"{"type":"END"}"#);
        assert_eq!(
            encode(&WireMessage::Hello { role: NetRole::X }),
            r#"{"type":"HELLO","role":"X"}"#
        );
        let r = WireMessage::Record(decode_record(r#"{"trial":1,"mode":"VH","a":2,"b":2,"x":0,"y":1}"#).unwrap());
        assert_eq!(
            encode(&r),
            r#"{"type":"RECORD","trial":1,"mode":"VH","a":2,"b":2,"x":0,"y":1}"#
        );
    }

    #[test]
    fn domain_and_malformed_errors() {
        assert_eq!(
            decode_record(r#"{"trial":0,"mode":"VH","a":1,"b":1,"x":2,"y":0}"#),
            Err(WireError::Domain {
                field: "x",
                value: "2".into()
            })
        );
        assert!(matches!(
            decode_record(r#"{"trial":0,"mode":"VH""#),
            Err(WireError::Malformed(_))
        ));
        assert!(matches!(
            decode(r#"{"type":"SETTING","trial":0,"label":1,"extra":1}"#),
            Err(WireError::Malformed(_))
        ));
        assert!(matches!(decode(r#"{"type":"PING"}"#), Err(WireError::Malformed(_))));
        assert_eq!(
            decode(r#"{"type":"SETTING","trial":0,"label":3}"#),
            Err(WireError::Domain {
                field: "label",
                value: "3".into()
            })
        );
    }
}
