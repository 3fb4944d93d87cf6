//! File formats, parallel execution and the command line front end for
//! [`sonarwreck_core`].

pub mod anomaly_export;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod deff;
pub mod evaluate;
pub mod io;
pub mod render;
pub mod terrain;

pub use sonarwreck_core as core;
