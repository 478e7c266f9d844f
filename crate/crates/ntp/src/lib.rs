//! File formats, experiment pipelines and the `ntp` command-line tool on top
//! of [`ntp_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod countries;
pub mod data;
pub mod experiment;
pub mod report;
