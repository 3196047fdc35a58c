//! Scenario files, batch runs and certificate checking for the
//! `cantor-tits` command.

pub mod run;
pub mod scenario;

pub use run::{run_scenario, verify_file, write_outputs, RunOutcome, Status};
pub use scenario::{parse_scenario, Kind, Profile, Scenario};
