//! Scalability benchmarking for stream-processing workloads.
//!
//! The crate answers one question: how many processing instances does a
//! streaming dataflow need as its workload grows? It ships four reference
//! dataflows over an in-process partitioned log, deterministic workload
//! generators, an experiment harness that sweeps the workload x instances
//! grid while sampling consumer lag, and the trend analysis that turns
//! those samples into a demand curve.
//!
//! The numeric kernels ([`stats::SummaryStats`], [`analysis::ols`]) are
//! generic over the scalar type; [`Stats`] and [`Trend`] are the f64
//! aliases the rest of the crate uses.

pub mod analysis;
pub mod broker;
pub mod engine;
pub mod harness;
pub mod stats;
pub mod usecases;
pub mod workload;

/// Streaming aggregate over f64 measurements, as carried by sink records.
pub type Stats = stats::SummaryStats<f64>;

/// Least-squares trend over an f64 sample series, as used for lag slopes.
pub type Trend = analysis::TrendFit<f64>;
