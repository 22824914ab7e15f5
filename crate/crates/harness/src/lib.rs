//! Scenario runner and invariant suites for `hoferlab-core`.

pub mod catalog;
pub mod checks;
pub mod error;
pub mod output;
pub mod run;
pub mod scenario;
pub mod suites;

pub use error::{HarnessError, Result};
pub use output::{Format, PlotData, Record, Status, SCHEMA_VERSION};
pub use run::{run_scenario, Overrides, Report};
pub use scenario::Scenario;
