//! Command-line tool and HTTP service over the provenance search engine.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod service;

pub use error::CliError;
