//! Scenario files, oracles, worst-case generators and Monte Carlo checks
//! for `minimax-core`, plus the machinery behind the `minimax` binary.

pub mod config;
pub mod error;
pub mod oracle;
pub mod report;
pub mod run;
pub mod scenario;
pub mod worst;

pub use error::{HResult, HarnessError};
