//! Command-line surface of the proxlith simulator: recipe files, height-map
//! and image formats, result tables and run manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod hmap;
pub mod manifest;
pub mod number;
pub mod pgm;
pub mod table;

pub use commands::execute;
pub use error::{CliError, CliResult};
