//! Count tables and the two rival correlation estimators.
//!
//! * Dichotomic (`Gill`): each station outcome is read as ±1 (detected ↦ +1)
//!   and `κ_ab = (N⁼ − N≠) / N` per setting pair.
//! * Malus (`Malus`): each side's detection ratios per (label, pulse axis)
//!   cell give `|cos θ|` and `|sin θ|` as square roots, signs come from the
//!   local nominal angle, and `κ* = cos²Δ − sin²Δ` is assembled after the
//!   fact from the two sides' factors.
//!
//! The CHSH contrast in both cases is `S = κ₁₂ + κ₁₁ + κ₂₁ − κ₂₂`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::num::NonZeroU64;

use crate::angle::Angle;
use crate::model::{ExperimentConfig, PulseAxis, SettingLabel, Side, TrialRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SettingPair {
    /// Left (A/X) label.
    pub a: SettingLabel,
    /// Right (B/Y) label.
    pub b: SettingLabel,
}

impl SettingPair {
    pub const fn new(a: SettingLabel, b: SettingLabel) -> Self {
        SettingPair { a, b }
    }

    /// In the order 11, 12, 21, 22.
    pub const ALL: [SettingPair; 4] = [
        SettingPair::new(SettingLabel::One, SettingLabel::One),
        SettingPair::new(SettingLabel::One, SettingLabel::Two),
        SettingPair::new(SettingLabel::Two, SettingLabel::One),
        SettingPair::new(SettingLabel::Two, SettingLabel::Two),
    ];

    pub fn index(self) -> usize {
        self.a.index() * 2 + self.b.index()
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("correlation for pair {0} is undefined: no trials")]
    UndefinedCorrelation(SettingPair),
    #[error("no exposures in the {side:?} cell (label {label}, axis {axis:?})")]
    InsufficientData {
        side: Side,
        label: SettingLabel,
        axis: PulseAxis,
    },
    #[error("correlation for pair {0} is missing")]
    MissingPair(SettingPair),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairTally {
    pub n_equal: u64,
    pub n_unequal: u64,
}

impl PairTally {
    pub fn n_total(&self) -> u64 {
        self.n_equal + self.n_unequal
    }
}

/// `N⁼`, `N≠` per setting pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairCounts {
    tallies: [PairTally; 4],
}

impl PairCounts {
    pub fn record(&mut self, rec: &TrialRecord) {
        let t = &mut self.tallies[SettingPair::new(rec.a_label, rec.b_label).index()];
        if rec.x_detected == rec.y_detected {
            t.n_equal += 1;
        } else {
            t.n_unequal += 1;
        }
    }

    pub fn get(&self, pair: SettingPair) -> PairTally {
        self.tallies[pair.index()]
    }

    pub fn total(&self) -> u64 {
        self.tallies.iter().map(PairTally::n_total).sum()
    }
}

pub fn tally_pairs(log: &[TrialRecord]) -> PairCounts {
    let mut counts = PairCounts::default();
    log.iter().for_each(|rec| counts.record(rec));
    counts
}

pub fn kappa_gill(counts: &PairCounts, pair: SettingPair) -> Result<f64, AnalysisError> {
    let t = counts.get(pair);
    if t.n_total() == 0 {
        return Err(AnalysisError::UndefinedCorrelation(pair));
    }
    Ok((t.n_equal as f64 - t.n_unequal as f64) / t.n_total() as f64)
}

/// Contrast from a possibly incomplete set of correlations.
pub fn chsh(kappa: &BTreeMap<SettingPair, f64>) -> Result<f64, AnalysisError> {
    let mut k = [0.0; 4];
    for pair in SettingPair::ALL {
        k[pair.index()] = *kappa.get(&pair).ok_or(AnalysisError::MissingPair(pair))?;
    }
    Ok(KappaTable(k).contrast())
}

/// A complete set of four correlations, indexed by [`SettingPair`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KappaTable(pub [f64; 4]);

impl KappaTable {
    pub fn get(&self, pair: SettingPair) -> f64 {
        self.0[pair.index()]
    }

    pub fn try_from_fn(mut f: impl FnMut(SettingPair) -> Result<f64, AnalysisError>) -> Result<Self, AnalysisError> {
        let mut k = [0.0; 4];
        for pair in SettingPair::ALL {
            k[pair.index()] = f(pair)?;
        }
        Ok(KappaTable(k))
    }

    pub fn contrast(&self) -> f64 {
        let [k11, k12, k21, k22] = self.0;
        k12 + k11 + k21 - k22
    }

    pub fn to_map(&self) -> BTreeMap<SettingPair, f64> {
        SettingPair::ALL.iter().map(|&p| (p, self.get(p))).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DetectionCell {
    pub detections: u64,
    pub exposures: u64,
}

impl DetectionCell {
    pub fn ratio(&self) -> Option<f64> {
        (self.exposures > 0).then(|| self.detections as f64 / self.exposures as f64)
    }
}

/// Per-station tallies `N_sm` keyed by (setting label, pulse axis).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SideCounts {
    side: Side,
    cells: [[DetectionCell; 2]; 2],
}

impl SideCounts {
    pub fn new(side: Side) -> Self {
        SideCounts {
            side,
            cells: Default::default(),
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn cell(&self, label: SettingLabel, axis: PulseAxis) -> DetectionCell {
        self.cells[label.index()][axis.index()]
    }

    pub fn record(&mut self, rec: &TrialRecord) {
        let cell = &mut self.cells[rec.label(self.side).index()][rec.mode.axis(self.side).index()];
        cell.exposures += 1;
        cell.detections += rec.detected(self.side) as u64;
    }

    pub fn total_exposures(&self) -> u64 {
        self.cells.iter().flatten().map(|c| c.exposures).sum()
    }
}

pub fn tally_sides(log: &[TrialRecord]) -> (SideCounts, SideCounts) {
    let mut left = SideCounts::new(Side::Left);
    let mut right = SideCounts::new(Side::Right);
    for rec in log {
        left.record(rec);
        right.record(rec);
    }
    (left, right)
}

/// Locally estimated `cos θ` and `sin θ` for one station setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorEstimate {
    pub cos_est: f64,
    pub sin_est: f64,
    pub exposures_used: u64,
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Builds factors from detection ratios: the axis-0 ratio tends to `cos²θ`
/// and the axis-π/2 ratio to `sin²θ`. Signs come from `nominal`.
pub fn factors_from_ratios(cos_ratio: f64, sin_ratio: f64, nominal: Angle, exposures_used: u64) -> FactorEstimate {
    FactorEstimate {
        cos_est: sign(nominal.cos()) * libm::sqrt(cos_ratio),
        sin_est: sign(nominal.sin()) * libm::sqrt(sin_ratio),
        exposures_used,
    }
}

pub fn estimate_factors(
    counts: &SideCounts,
    label: SettingLabel,
    nominal: Angle,
) -> Result<FactorEstimate, AnalysisError> {
    let ratio = |axis| {
        counts.cell(label, axis).ratio().ok_or(AnalysisError::InsufficientData {
            side: counts.side,
            label,
            axis,
        })
    };
    let cos_ratio = ratio(PulseAxis::Zero)?;
    let sin_ratio = ratio(PulseAxis::HalfPi)?;
    let used = counts.cell(label, PulseAxis::Zero).exposures + counts.cell(label, PulseAxis::HalfPi).exposures;
    Ok(factors_from_ratios(cos_ratio, sin_ratio, nominal, used))
}

/// `κ* = cos²Δ − sin²Δ` with `Δ = θ_r − θ_l` expanded through the angle
/// difference identities. The only place left and right data meet.
pub fn kappa_malus(left: &FactorEstimate, right: &FactorEstimate) -> f64 {
    let cos_delta = right.cos_est * left.cos_est + right.sin_est * left.sin_est;
    let sin_delta = right.sin_est * left.cos_est - right.cos_est * left.sin_est;
    cos_delta * cos_delta - sin_delta * sin_delta
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnalysisMode {
    Gill,
    Malus,
}

impl AnalysisMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AnalysisMode::Gill => "gill",
            AnalysisMode::Malus => "malus",
        }
    }
}

/// Incrementally maintained count tables for one log prefix.
#[derive(Clone, Copy, Debug)]
struct Tallies {
    pairs: PairCounts,
    left: SideCounts,
    right: SideCounts,
}

impl Tallies {
    fn new() -> Self {
        Tallies {
            pairs: PairCounts::default(),
            left: SideCounts::new(Side::Left),
            right: SideCounts::new(Side::Right),
        }
    }

    fn record(&mut self, rec: &TrialRecord) {
        self.pairs.record(rec);
        self.left.record(rec);
        self.right.record(rec);
    }

    fn per_pair(&self, config: &ExperimentConfig, mode: AnalysisMode) -> [Result<f64, AnalysisError>; 4] {
        match mode {
            AnalysisMode::Gill => SettingPair::ALL.map(|pair| kappa_gill(&self.pairs, pair)),
            AnalysisMode::Malus => {
                let factors = |counts: &SideCounts, side| {
                    SettingLabel::ALL.map(|label| estimate_factors(counts, label, config.angle(side, label)))
                };
                let left = factors(&self.left, Side::Left);
                let right = factors(&self.right, Side::Right);
                SettingPair::ALL.map(|pair| {
                    let l = left[pair.a.index()]?;
                    let r = right[pair.b.index()]?;
                    Ok(kappa_malus(&l, &r))
                })
            }
        }
    }

    fn kappas(&self, config: &ExperimentConfig, mode: AnalysisMode) -> Result<KappaTable, AnalysisError> {
        let per_pair = self.per_pair(config, mode);
        KappaTable::try_from_fn(|pair| per_pair[pair.index()])
    }
}

/// Each pair's correlation over the whole log, or why it is undefined.
pub fn correlations_per_pair(
    log: &[TrialRecord],
    config: &ExperimentConfig,
    mode: AnalysisMode,
) -> [Result<f64, AnalysisError>; 4] {
    let mut t = Tallies::new();
    log.iter().for_each(|rec| t.record(rec));
    t.per_pair(config, mode)
}

/// All four correlations over the whole log.
pub fn correlations(
    log: &[TrialRecord],
    config: &ExperimentConfig,
    mode: AnalysisMode,
) -> Result<KappaTable, AnalysisError> {
    let mut t = Tallies::new();
    log.iter().for_each(|rec| t.record(rec));
    t.kappas(config, mode)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    /// Prefix length.
    pub trials: u64,
    pub kappa: KappaTable,
    pub contrast: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub mode: AnalysisMode,
    /// Statistics over the full log, or the reason they are undefined.
    pub summary: Result<CurvePoint, AnalysisError>,
    /// One point per prefix whose length is a multiple of the stride; prefixes
    /// with an undefined correlation are left out.
    pub running_curve: Vec<CurvePoint>,
}

pub fn running_report(
    log: &[TrialRecord],
    config: &ExperimentConfig,
    mode: AnalysisMode,
    stride: NonZeroU64,
) -> CorrelationReport {
    let point = |t: &Tallies, trials: u64| {
        t.kappas(config, mode).map(|kappa| CurvePoint {
            trials,
            kappa,
            contrast: kappa.contrast(),
        })
    };
    let mut tallies = Tallies::new();
    let mut running_curve = Vec::new();
    for (n, rec) in log.iter().enumerate() {
        tallies.record(rec);
        let trials = n as u64 + 1;
        if trials.is_multiple_of(stride.get()) {
            if let Ok(p) = point(&tallies, trials) {
                running_curve.push(p);
            }
        }
    }
    CorrelationReport {
        mode,
        summary: point(&tallies, log.len() as u64),
        running_curve,
    }
}
