//! Trial-log files, curve CSVs and disclosure files.
//!
//! A trial log is newline-delimited JSON. Line 1 is the header; line `n + 2`
//! holds trial `n`:
//!
//! ```text
//! {"format":"eprb-trial-log","version":"1","digest":"<sha256>","config":{...}}
//! {"trial":0,"mode":"VH","a":1,"b":2,"x":1,"y":0}
//! ```
//!
//! The digest is the SHA-256 of the canonical config JSON, which binds a log
//! to the angle table it was generated with.

use std::io::{self, BufRead, Write};

use eprb_core::analysis::CurvePoint;
use eprb_core::model::{DetectorRule, ExperimentConfig, SettingLabel, TrialRecord};
use eprb_core::{Angle, SettingPair};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::wire::{self, Randomizer, WireError, WireMessage};

pub const LOG_FORMAT: &str = "eprb-trial-log";
pub const LOG_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{context}: {source}")]
    Io {
        context: &'static str,
        #[source]
        source: io::Error,
    },
    #[error("empty file: header line missing")]
    MissingHeader,
    #[error("line 1: not a trial log header ({0})")]
    BadHeader(String),
    #[error("line 1: unsupported format version {0:?}")]
    UnknownVersion(String),
    #[error("line 1: header config invalid: {0}")]
    InvalidConfig(#[from] eprb_core::ConfigError),
    #[error("header digest {stated} does not match config digest {computed}")]
    DigestMismatch { stated: String, computed: String },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: field `{field}` has invalid value {value}")]
    Domain {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: trial index {got} does not follow {previous}")]
    NonMonotone { line: usize, previous: u64, got: u64 },
    #[error("line {line}: trial index {got} skips ahead of expected {expected}")]
    IndexGap { line: usize, expected: u64, got: u64 },
    #[error("line {line}: truncated (no terminating newline)")]
    Truncated { line: usize },
}

impl LogError {
    fn at(line: usize, e: WireError) -> Self {
        match e {
            WireError::Malformed(message) => LogError::Malformed { line, message },
            WireError::Domain { field, value } => LogError::Domain { line, field, value },
        }
    }
}

fn io_err(context: &'static str) -> impl FnOnce(io::Error) -> LogError {
    move |source| LogError::Io { context, source }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
struct ConfigRepr {
    left_angles: [f64; 2],
    right_angles: [f64; 2],
    trials: u64,
    master_seed: u64,
    detector_rule: String,
}

impl From<&ExperimentConfig> for ConfigRepr {
    fn from(c: &ExperimentConfig) -> Self {
        ConfigRepr {
            left_angles: c.left_angles.map(Angle::radians),
            right_angles: c.right_angles.map(Angle::radians),
            trials: c.trials,
            master_seed: c.master_seed,
            detector_rule: c.detector_rule.as_str().to_owned(),
        }
    }
}

impl ConfigRepr {
    fn into_config(self) -> Result<ExperimentConfig, LogError> {
        let detector_rule = DetectorRule::parse(&self.detector_rule)
            .ok_or_else(|| LogError::BadHeader(format!("unknown detector_rule {:?}", self.detector_rule)))?;
        let config = ExperimentConfig {
            left_angles: self.left_angles.map(Angle::from_radians),
            right_angles: self.right_angles.map(Angle::from_radians),
            trials: self.trials,
            master_seed: self.master_seed,
            detector_rule,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: String,
    digest: String,
    config: ConfigRepr,
}

/// Canonical JSON of a config; angles use the shortest round-trip form.
pub fn config_json(config: &ExperimentConfig) -> String {
    serde_json::to_string(&ConfigRepr::from(config)).expect("plain struct serializes")
}

pub fn config_digest(config: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(config_json(config).as_bytes()))
}

pub fn write_log<W: Write>(log: &[TrialRecord], config: &ExperimentConfig, mut out: W) -> Result<(), LogError> {
    let header = Header {
        format: LOG_FORMAT.to_owned(),
        version: LOG_VERSION.to_owned(),
        digest: config_digest(config),
        config: ConfigRepr::from(config),
    };
    let header = serde_json::to_string(&header).expect("plain struct serializes");
    let write = io_err("writing trial log");
    (|| {
        writeln!(out, "{header}")?;
        for rec in log {
            writeln!(out, "{}", wire::encode_record(rec))?;
        }
        out.flush()
    })()
    .map_err(write)
}

/// Reads one line; `Ok(None)` at EOF, `Truncated` if the last line has no
/// newline.
fn next_line<R: BufRead>(input: &mut R, buf: &mut String, line: usize) -> Result<Option<()>, LogError> {
    buf.clear();
    let n = input.read_line(buf).map_err(io_err("reading trial log"))?;
    if n == 0 {
        return Ok(None);
    }
    if !buf.ends_with('\n') {
        return Err(LogError::Truncated { line });
    }
    buf.pop();
    if buf.ends_with('\r') {
        buf.pop();
    }
    Ok(Some(()))
}

fn parse_header(line: &str) -> Result<ExperimentConfig, LogError> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| LogError::BadHeader(e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(LOG_FORMAT) {
        return Err(LogError::BadHeader("missing or wrong `format`".into()));
    }
    match value.get("version").and_then(|v| v.as_str()) {
        Some(LOG_VERSION) => {}
        Some(other) => return Err(LogError::UnknownVersion(other.to_owned())),
        None => {
            return Err(LogError::UnknownVersion(
                value.get("version").map(|v| v.to_string()).unwrap_or_default(),
            ))
        }
    }
    let header: Header = serde_json::from_value(value).map_err(|e| LogError::BadHeader(e.to_string()))?;
    let stated = header.digest.clone();
    let config = header.config.into_config()?;
    let computed = config_digest(&config);
    if stated != computed {
        return Err(LogError::DigestMismatch { stated, computed });
    }
    Ok(config)
}

pub fn read_log<R: BufRead>(mut input: R) -> Result<(ExperimentConfig, Vec<TrialRecord>), LogError> {
    let mut buf = String::new();
    if next_line(&mut input, &mut buf, 1)?.is_none() {
        return Err(LogError::MissingHeader);
    }
    let config = parse_header(&buf)?;
    let mut log: Vec<TrialRecord> = Vec::new();
    let mut line = 2;
    while next_line(&mut input, &mut buf, line)?.is_some() {
        let rec = wire::decode_record(&buf).map_err(|e| LogError::at(line, e))?;
        let expected = log.len() as u64;
        if rec.index != expected {
            return Err(match log.last() {
                Some(prev) if rec.index <= prev.index => LogError::NonMonotone {
                    line,
                    previous: prev.index,
                    got: rec.index,
                },
                _ => LogError::IndexGap {
                    line,
                    expected,
                    got: rec.index,
                },
            });
        }
        log.push(rec);
        line += 1;
    }
    Ok((config, log))
}

pub const CURVE_HEADER: &str = "trial_index,S,kappa_11,kappa_12,kappa_21,kappa_22";

/// Fixed-point decimals used for every real in a curve file.
pub const CURVE_DECIMALS: usize = 12;

pub fn write_curve<W: Write>(points: &[CurvePoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for p in points {
        write!(out, "{},{:.*}", p.trials, CURVE_DECIMALS, p.contrast)?;
        for pair in SettingPair::ALL {
            write!(out, ",{:.*}", CURVE_DECIMALS, p.kappa.get(pair))?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// Writes a randomizer's disclosed labels as `LABEL_DISCLOSURE` lines
/// followed by `END`.
pub fn write_disclosure<W: Write>(side: Randomizer, labels: &[SettingLabel], mut out: W) -> io::Result<()> {
    for (trial, &label) in labels.iter().enumerate() {
        let msg = WireMessage::LabelDisclosure {
            trial: trial as u64,
            side,
            label,
        };
        writeln!(out, "{}", wire::encode(&msg))?;
    }
    writeln!(out, "{}", wire::encode(&WireMessage::End))?;
    out.flush()
}

#[derive(Debug, thiserror::Error)]
pub enum DisclosureError {
    #[error("reading disclosure: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Wire { line: usize, source: WireError },
    #[error("line {line}: expected LABEL_DISCLOSURE for trial {expected} from {side}")]
    Unexpected {
        line: usize,
        expected: u64,
        side: &'static str,
    },
    #[error("disclosure ends without END")]
    MissingEnd,
}

/// Reads a disclosure file. Every line must be from `side`, in trial order.
pub fn read_disclosure<R: BufRead>(side: Randomizer, input: R) -> Result<Vec<SettingLabel>, DisclosureError> {
    let mut labels = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let msg = wire::decode(&line?).map_err(|source| DisclosureError::Wire { line: line_no, source })?;
        match msg {
            WireMessage::End => return Ok(labels),
            WireMessage::LabelDisclosure { trial, side: s, label } if s == side && trial == labels.len() as u64 => {
                labels.push(label)
            }
            _ => {
                return Err(DisclosureError::Unexpected {
                    line: line_no,
                    expected: labels.len() as u64,
                    side: side.as_str(),
                })
            }
        }
    }
    Err(DisclosureError::MissingEnd)
}
