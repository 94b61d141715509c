//! Experiment harness for `lowrank-core`: synthetic test matrices, matrix
//! file formats, a grid runner with CSV/JSON reports, and the `lowrank`
//! command-line tool.

pub mod cli;
pub mod experiment;
pub mod io;
pub mod report;
pub mod studies;
pub mod synthetic;
pub mod timing;
