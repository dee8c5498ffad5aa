//! Experiment harness for the nonlocal Schwarz solvers: configuration,
//! experiment drivers and file formats.

pub mod config;
pub mod experiments;
pub mod io;
