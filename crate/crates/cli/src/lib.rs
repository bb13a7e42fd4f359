//! Scenario-driven front end for the affinely-rigid body library.

pub mod error;
pub mod output;
pub mod run;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use scenario::{parse_scenario, Scenario};
