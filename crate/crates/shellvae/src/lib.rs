//! File formats, run persistence and the command-line front end for
//! `shellvae-core`.

mod binio;
pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod idx;
pub mod manifest;
pub mod region;
pub mod report;

pub use error::{Error, Result};
