//! Command-line front end for `sweep-core`: scenario files, deterministic
//! outputs with run manifests, and the acceptance suite.

pub mod acceptance;
pub mod error;
pub mod overrides;
pub mod runner;
pub mod scenario;

pub use error::{CliError, CliResult};
