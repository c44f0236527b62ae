//! Experiment orchestration: configuration files, the replication
//! engine, report serialization, the weight-variability grid study,
//! and plot rendering.

pub mod config;
pub mod cvstudy;
pub mod report;
pub mod run;
pub mod svg;
