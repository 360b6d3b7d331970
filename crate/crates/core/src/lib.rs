//! Core of a locality-enforced EPR-B (Bell test) simulator.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! * [`angle`]: polarizer/pulse angles and the Malus transmission factor.
//! * [`model`]: configuration and trial-log value types.
//! * [`stream`]: role-keyed deterministic random streams.
//! * [`protocol`]: source, randomizers, stations, collector and referee as
//!   isolated state machines with one-way message flow.
//! * [`analysis`]: the dichotomic CHSH estimator and the Malus-law intensity
//!   estimator, plus running-convergence curves.
//! * [`tautology`]: the ±1 sequence laboratory (CHSH bound on aligned
//!   quadruples, and the rearrangement of four separate runs).
//!
//! File formats, sockets and the command line live in the `eprb` crate.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod angle;
pub mod model;
pub mod protocol;
pub mod stream;
pub mod tautology;

pub use analysis::{AnalysisError, AnalysisMode, CorrelationReport, KappaTable, SettingPair};
pub use angle::{malus_intensity, Angle};
pub use model::{ConfigError, DetectorRule, ExperimentConfig, PulseAxis, SettingLabel, Side, SourceMode, TrialRecord};
pub use protocol::{run_experiment, RefereeReport, Verdict};
pub use stream::{derive_stream, RandomStream, Role};
