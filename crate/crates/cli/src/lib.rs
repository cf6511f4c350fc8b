//! Configuration-driven frontend for the `gkw` binary.

pub mod config;
pub mod error;
pub mod expr;
pub mod plot;
pub mod presets;
pub mod run;
