//! Experiment harness: configuration, drivers and CSV output.

pub mod config;
pub mod drivers;
pub mod output;

pub use config::{Experiment, Overrides, RunConfig};
pub use drivers::run;
pub use output::{Check, Report};
