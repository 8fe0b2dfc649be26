//! Benchmark harness for online meta-adaptive control: experiment configs,
//! paired multi-seed runs, invariant check suites and file formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod checkpoint;
pub mod checks;
pub mod config;
pub mod export;
pub mod setup;

pub use benchmark::{run_benchmark, run_benchmark_with_workers, write_outputs, BenchmarkReport, CheckVerdict};
pub use config::{ConfigError, ExperimentConfig};
