//! Example catalog and the command-line front end over the flow, Poincaré,
//! centralizer and perturbation diagnostics.

pub mod catalog;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod profile;
pub mod report;
pub mod verify;

pub use catalog::{catalog_get, CatalogEntry};
pub use cli::main_with;
pub use error::CliError;
