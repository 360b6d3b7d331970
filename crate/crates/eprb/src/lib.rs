//! File formats, network roles and command line for the `eprb-core`
//! simulator.

pub mod cli;
pub mod io;
pub mod net;
pub mod topology;
pub mod wire;
