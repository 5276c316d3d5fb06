//! Command-line entry points and the HTTP tagging service.

pub mod api;
pub mod cli;
pub mod config;
