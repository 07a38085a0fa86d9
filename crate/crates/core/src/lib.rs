//! Benchmarking toolkit for spatiotemporal moving-object stores.
//!
//! The crate is organised along the benchmark pipeline:
//!
//! * [`model`]: geometry, time, trajectory and result types shared by everything else.
//! * [`datagen`]: deterministic scenario generators (cycling, aviation, AIS) with whole-trip scaling.
//! * [`queryspec`]: query template registry, dialect rendering, and parameter generation.
//! * [`refstore`]: in-process reference store with a full-scan oracle and indexed engines.
//! * [`harness`]: workload plans, adapters, and sequential / closed-loop parallel execution.
//! * [`report`]: latency percentiles, ECDFs, run comparisons, and exports.

pub mod datagen;
pub mod harness;
pub mod model;
pub mod queryspec;
pub mod refstore;
pub mod report;
