//! Experiment driver for the `textadain` kernels: sweeps with CSV reports,
//! feature-map visualization, kernel benchmarks and the `lab` command line.

pub mod bench;
pub mod cli;
pub mod featmap;
pub mod sweep;
