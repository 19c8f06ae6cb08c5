//! File formats, CSV ingestion, experiment orchestration and the
//! command-line driver for [`locfair_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod schema;

pub use error::{Error, Result};
pub use locfair_core as core;
