//! Offline analysis: from persisted lag/latency series and counts to
//! sufficiency verdicts, and from a grid of verdicts to the demand curve
//! (minimum instances per workload) that makes up the scalability graph.
//!
//! Everything here is a pure function of the persisted files, so analysis
//! can be re-run at any time without re-executing experiments.

pub mod graph;
pub mod ols;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::engine::Sample;
use crate::harness::SubexperimentResult;
use crate::usecases::ExpectedOutput;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {need} post-warm-up samples at distinct times, have {have}")]
    InsufficientSamples { have: usize, need: usize },
    #[error("method not applicable: {0}")]
    MethodNotApplicable(String),
    #[error("missing grid cell: workload {workload}, {instances} instances")]
    IncompleteGrid { workload: f64, instances: u32 },
    #[error("failed to write analysis output: {0}")]
    PersistFailed(#[from] std::io::Error),
}

/// How a cell is judged sufficient: queued-message growth, sink-output
/// completeness, or event-time latency growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SufficiencyMethod {
    LagTrend,
    OutputCount,
    LatencyTrend,
}

impl SufficiencyMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lag_trend" => Some(Self::LagTrend),
            "output_count" => Some(Self::OutputCount),
            "latency_trend" => Some(Self::LatencyTrend),
            _ => None,
        }
    }
}

impl fmt::Display for SufficiencyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::LagTrend => "lag_trend",
            Self::OutputCount => "output_count",
            Self::LatencyTrend => "latency_trend",
        };
        f.write_str(s)
    }
}

/// Least-squares trend over a sampled series, time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendFit<T = f64> {
    /// Growth per second: messages for lag series, ms for latency series.
    pub slope: T,
    /// Fitted value at t = 0.
    pub intercept: T,
    pub samples: usize,
    /// Residual sum of squares of the fit.
    pub rss: T,
}

/// OLS trend of the samples at `t_ms >= warmup_ms`, x in seconds.
pub fn trend_slope(series: &[Sample], warmup_ms: u64) -> Result<TrendFit, AnalysisError> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|s| s.t_ms >= warmup_ms)
        .map(|s| (s.t_ms as f64 / 1000.0, s.value as f64))
        .collect();
    let line = ols::fit(&points).ok_or(AnalysisError::InsufficientSamples {
        have: points.len(),
        need: 2,
    })?;
    Ok(TrendFit {
        slope: line.slope,
        intercept: line.intercept,
        samples: line.len,
        rss: line.rss,
    })
}

/// What a verdict was based on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evidence {
    /// Fitted growth per second (messages or ms, per the method).
    Slope(f64),
    /// Sink records expected vs observed.
    OutputCounts { expected: u64, observed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub sufficient: bool,
    pub method: SufficiencyMethod,
    pub evidence: Evidence,
}

/// Sufficient iff the lag grows no faster than `threshold` messages per
/// second. The boundary counts as sufficient: only growth strictly above
/// the threshold signals queuing.
pub fn verdict_lag_trend(fit: &TrendFit, threshold: f64) -> Verdict {
    Verdict {
        sufficient: fit.slope <= threshold,
        method: SufficiencyMethod::LagTrend,
        evidence: Evidence::Slope(fit.slope),
    }
}

/// Sufficient iff at least `expected * (1 - tolerance)` outputs arrived.
/// With intermediate forwarding the expectation is unbounded and this
/// method cannot apply; use a trend method instead.
pub fn verdict_output_count(
    expected: ExpectedOutput,
    observed: u64,
    tolerance: f64,
) -> Result<Verdict, AnalysisError> {
    match expected {
        ExpectedOutput::Unbounded => Err(AnalysisError::MethodNotApplicable(
            "expected output count is unbounded under intermediate forwarding; \
             use lag_trend or latency_trend"
                .into(),
        )),
        ExpectedOutput::Count(expected) => Ok(Verdict {
            sufficient: observed as f64 >= expected as f64 * (1.0 - tolerance),
            method: SufficiencyMethod::OutputCount,
            evidence: Evidence::OutputCounts { expected, observed },
        }),
    }
}

/// Sufficient iff event-time latency grows at most `threshold` ms per
/// second after warm-up.
pub fn verdict_latency_trend(
    series: &[Sample],
    warmup_ms: u64,
    threshold: f64,
) -> Result<Verdict, AnalysisError> {
    let fit = trend_slope(series, warmup_ms)?;
    Ok(Verdict {
        sufficient: fit.slope <= threshold,
        method: SufficiencyMethod::LatencyTrend,
        evidence: Evidence::Slope(fit.slope),
    })
}

/// Instances required for one workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demand {
    Instances(u32),
    /// No tested instance count was sufficient.
    Unsatisfiable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandPoint {
    pub workload: f64,
    pub demand: Demand,
}

/// The scalability result: demand per workload, ascending by workload,
/// plus any monotonicity warnings. A warning means some instance count was
/// sufficient while a larger one was not; the demand is still the minimum
/// sufficient count, never a repaired value.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandCurve {
    pub points: Vec<DemandPoint>,
    pub warnings: Vec<String>,
}

/// Analysis parameters for judging one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictSpec {
    pub method: SufficiencyMethod,
    /// Slope threshold for the trend methods (msg/s or ms/s).
    pub threshold: f64,
    pub warmup_ms: u64,
    /// Relative shortfall accepted by the output-count method.
    pub output_tolerance: f64,
}

pub fn cell_verdict(
    result: &SubexperimentResult,
    spec: &VerdictSpec,
) -> Result<Verdict, AnalysisError> {
    match spec.method {
        SufficiencyMethod::LagTrend => Ok(verdict_lag_trend(
            &trend_slope(&result.lag, spec.warmup_ms)?,
            spec.threshold,
        )),
        SufficiencyMethod::OutputCount => verdict_output_count(
            result.expected_output,
            result.output_count,
            spec.output_tolerance,
        ),
        SufficiencyMethod::LatencyTrend => {
            verdict_latency_trend(&result.latency, spec.warmup_ms, spec.threshold)
        }
    }
}

/// Reduces a full grid of results to the demand curve: per workload, the
/// minimum tested instance count judged sufficient. The result does not
/// depend on the order of `results`; the grid must be complete over the
/// cross product of observed workloads and instance counts.
pub fn demand_curve(
    results: &[SubexperimentResult],
    spec: &VerdictSpec,
) -> Result<DemandCurve, AnalysisError> {
    let mut cells: BTreeMap<(u64, u32), &SubexperimentResult> = BTreeMap::new();
    let mut workloads: Vec<f64> = Vec::new();
    let mut instance_counts: Vec<u32> = Vec::new();
    for result in results {
        cells
            .entry((result.workload.to_bits(), result.instances))
            .or_insert(result);
        workloads.push(result.workload);
        instance_counts.push(result.instances);
    }
    workloads.sort_by(f64::total_cmp);
    workloads.dedup();
    instance_counts.sort_unstable();
    instance_counts.dedup();
    let mut points = Vec::with_capacity(workloads.len());
    let mut warnings = Vec::new();
    for &workload in &workloads {
        let mut demand = Demand::Unsatisfiable;
        let mut last_sufficient: Option<u32> = None;
        for &instances in &instance_counts {
            let result = cells.get(&(workload.to_bits(), instances)).ok_or(
                AnalysisError::IncompleteGrid {
                    workload,
                    instances,
                },
            )?;
            let verdict = cell_verdict(result, spec)?;
            if verdict.sufficient {
                if demand == Demand::Unsatisfiable {
                    demand = Demand::Instances(instances);
                }
                last_sufficient = Some(instances);
            } else if let Some(smaller) = last_sufficient {
                warnings.push(format!(
                    "workload {workload}: {smaller} instances sufficient but {instances} insufficient"
                ));
            }
        }
        points.push(DemandPoint { workload, demand });
    }
    Ok(DemandCurve { points, warnings })
}
