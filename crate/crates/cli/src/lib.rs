//! Command line front end for `dmpp-core`: file formats, scenario files,
//! rollouts with metrics, and latency benchmarks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod generators;
pub mod io;
pub mod metrics;
pub mod output;
pub mod runner;
pub mod scenario;
