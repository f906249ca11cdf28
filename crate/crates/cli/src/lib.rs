//! Command-line front end for the `fbnorm` library.

pub mod cli;
pub mod commands;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod report;
