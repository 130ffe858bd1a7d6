//! Case persistence, event log, command-line interface and HTTP service
//! around the fit engine in `orbitfit-core`.

pub mod case;
pub mod cli;
pub mod config;
mod error;
pub mod events;
pub mod json;
pub mod manifest;
pub mod sample;
pub mod service;

pub use case::Case;
pub use error::{Result, SessionError};
