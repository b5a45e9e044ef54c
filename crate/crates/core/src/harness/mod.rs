//! Experiment execution: runs the full workload-by-instances grid described
//! by an [`ExperimentConfig`] and persists one result per cell.
//!
//! Subexperiments run back to back against one broker that is reset in
//! between, so no state leaks from cell to cell and any prefix of the grid
//! is reproducible in isolation. Results are written as each cell finishes;
//! a failure later in the grid keeps everything already measured.

pub mod config;
pub mod persist;

use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::broker::{Broker, BrokerError, TopicSpec};
use crate::engine::sim::SimDeployment;
use crate::engine::wall::{self, WallParams};
use crate::engine::{
    ClockMode, EngineError, InstanceRuntime, RunReport, Sample, Source, Stage, Topology,
};
use crate::usecases::{self, UseCaseError};
use crate::workload::{self, Generator, WorkloadError, WorkloadPoint};

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use persist::{load_experiment, LoadError, SubexperimentResult};

/// Consumer group all deployed instances share.
const GROUP: &str = "bench";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    UseCase(#[from] UseCaseError),
    #[error("subexperiment failed at workload {workload}, {instances} instances: {reason}")]
    SubexperimentFailed {
        workload: f64,
        instances: u32,
        reason: String,
    },
    #[error("failed to persist results: {0}")]
    Persist(#[from] std::io::Error),
}

impl HarnessError {
    /// True for errors in the experiment description itself, as opposed to
    /// failures while executing a (valid) subexperiment.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_) | HarnessError::Workload(_) | HarnessError::UseCase(_)
        )
    }
}

/// Runs the whole grid, writing the manifest first and one result per cell
/// as it completes, and returns the results in grid order (ascending
/// workloads, ascending instance counts within each workload).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<SubexperimentResult>, HarnessError> {
    if !workload::applicable(cfg.dimension, cfg.use_case) {
        return Err(WorkloadError::DimensionNotApplicable {
            dimension: cfg.dimension,
            id: cfg.use_case,
            reason: String::new(),
        }
        .into());
    }
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    persist::write_manifest(out_dir, cfg)?;
    let broker = Arc::new(Broker::new());
    let mut results = Vec::with_capacity(cfg.workloads.len() * cfg.instance_counts.len());
    for &workload in &cfg.workloads {
        for &instances in &cfg.instance_counts {
            broker.reset();
            let result = run_subexperiment(&broker, cfg, workload, instances)?;
            persist::write_result(out_dir, cfg, &result)?;
            results.push(result);
        }
    }
    Ok(results)
}

/// Runs one grid cell against `broker`, which must either be fresh or
/// reset. The broker is left holding the cell's topics so callers can
/// inspect sink contents afterwards.
pub fn run_subexperiment(
    broker: &Arc<Broker>,
    cfg: &ExperimentConfig,
    workload: f64,
    instances: u32,
) -> Result<SubexperimentResult, HarnessError> {
    let point = WorkloadPoint::new(cfg.dimension, workload);
    let (generator, effective) =
        workload::make_generator(cfg.use_case, point, &cfg.base, cfg.seed)?;
    let mut topology = usecases::build_topology(cfg.use_case, &effective)?;
    topology.emit_on_close_only = cfg.emit_on_close_only;

    let failed = |e: EngineError| HarnessError::SubexperimentFailed {
        workload,
        instances,
        reason: e.to_string(),
    };

    for topic in topology.all_topics() {
        ensure_topic(broker, topic, cfg.partitions).map_err(|e| failed(e.into()))?;
    }
    if let (Some(topic), Some(spec)) = (topology.broadcast_topic(), effective.hierarchy) {
        for event in workload::build_hierarchy_events(&spec) {
            broker.produce(topic, event).map_err(|e| failed(e.into()))?;
        }
    }

    let runtime = InstanceRuntime {
        clock: cfg.clock,
        capacity_rps: cfg.capacity_per_instance,
        record_cost_ns: cfg.record_cost_ns,
        commit_interval_ms: cfg.commit_interval_ms,
        commit_cost_records: cfg.commit_cost_records,
        partition_overhead_rps: cfg.partition_overhead_rps,
    };
    let (lag, latency, report, started_unix_ms) = match cfg.clock {
        ClockMode::Simulated => {
            let (lag, latency, report) =
                run_sim_cell(broker, cfg, &topology, generator, instances, runtime)
                    .map_err(failed)?;
            (lag, latency, report, None)
        }
        ClockMode::Wall => {
            let started = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0);
            let out = wall::run_cell(
                Arc::clone(broker),
                &topology,
                instances,
                runtime,
                generator,
                WallParams {
                    duration_ms: cfg.duration_ms,
                    sampling_interval_ms: cfg.sampling_interval_ms,
                    group: GROUP.to_string(),
                    expected_partitions: cfg.partitions,
                },
            )
            .map_err(failed)?;
            (
                out.lag_series,
                out.latency_series,
                out.report,
                Some(started),
            )
        }
    };

    let input_count = broker
        .produced_total(&topology.source)
        .map_err(|e| failed(e.into()))?;
    let output_count = match topology.sink_topic() {
        Some(topic) => broker.produced_total(topic).map_err(|e| failed(e.into()))?,
        None => report.records_emitted,
    };
    let expected_output = usecases::expected_output_count(
        cfg.use_case,
        &effective,
        cfg.duration_ms,
        cfg.emit_on_close_only,
    )?;
    Ok(SubexperimentResult {
        workload,
        instances,
        seed: cfg.seed,
        lag,
        latency,
        input_count,
        output_count,
        expected_output,
        started_unix_ms,
    })
}

fn ensure_topic(broker: &Broker, name: &str, partitions: u32) -> Result<(), BrokerError> {
    match broker.create_topic(TopicSpec::new(name, partitions)) {
        Err(BrokerError::DuplicateTopic(_)) => Ok(()),
        other => other,
    }
}

/// Drives a simulated deployment through the run: emits source records as
/// simulated time passes, steps the clock (on the commit grid while work is
/// pending, in one jump when idle), samples lag and latency on the sampling
/// grid, and tears the deployment down at `duration_ms`.
fn run_sim_cell(
    broker: &Arc<Broker>,
    cfg: &ExperimentConfig,
    topology: &Topology,
    mut generator: Generator,
    instances: u32,
    runtime: InstanceRuntime,
) -> Result<(Vec<Sample>, Vec<Sample>, RunReport), EngineError> {
    let mut deployment = SimDeployment::deploy(
        Arc::clone(broker),
        topology,
        instances,
        runtime,
        GROUP,
        cfg.partitions,
    )?;
    // Committed prefixes of the high-volume inbound topics are reclaimed at
    // every sample so long overloaded runs stay within memory; sink and
    // hierarchy topics are kept intact for inspection.
    let reclaim: Vec<String> = std::iter::once(topology.source.clone())
        .chain(topology.stages.iter().filter_map(|s| match s {
            Stage::RekeyTimeAttribute { via_topic, .. } => Some(via_topic.clone()),
            _ => None,
        }))
        .collect();
    let ci = cfg.commit_interval_ms;
    let source_topic = topology.source.clone();

    let advance_emitting = |deployment: &mut SimDeployment,
                            generator: &mut Generator,
                            to: u64|
     -> Result<(), EngineError> {
        while deployment.now() < to {
            let now = deployment.now();
            let target = if deployment.busy()? {
                (now / ci + 1) * ci
            } else {
                match generator.peek_next_time() {
                    Some(t) if t < to => (t + 1).max(now + 1),
                    _ => to,
                }
            }
            .min(to);
            let mut failure = None;
            generator.emit_until(target, &mut |msg| {
                if failure.is_none() {
                    if let Err(e) = broker.produce(&source_topic, msg) {
                        failure = Some(e);
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e.into());
            }
            deployment.advance_to(target)?;
        }
        Ok(())
    };

    let mut lag = Vec::new();
    let mut latency = Vec::new();
    for k in 1..=cfg.duration_ms / cfg.sampling_interval_ms {
        let at = k * cfg.sampling_interval_ms;
        advance_emitting(&mut deployment, &mut generator, at)?;
        lag.push(Sample {
            t_ms: at,
            value: deployment.total_lag()?,
        });
        latency.push(Sample {
            t_ms: at,
            value: deployment.latency_ms(),
        });
        for topic in &reclaim {
            broker.truncate_committed(topic)?;
        }
    }
    advance_emitting(&mut deployment, &mut generator, cfg.duration_ms)?;
    let report = deployment.stop()?;
    Ok((lag, latency, report))
}
