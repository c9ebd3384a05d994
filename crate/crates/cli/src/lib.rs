//! Config-driven scenario runner for the imaging library: TOML scenarios
//! in, grids, profiles, ellipse tables, reports and a manifest out.

// NaN-rejecting `!(x > 0.0)` checks and index loops over 3-vectors are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod formats;
pub mod manifest;
pub mod run;

pub use config::{expand_extended, ConfigError, ScenarioConfig};
pub use manifest::RunManifest;
pub use run::{compute, run, RunError};
