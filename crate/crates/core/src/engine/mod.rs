//! Miniature stream-processing engine.
//!
//! A [`Topology`] is a linear stage list read off a use-case description:
//! one primary source, optional rekey/join/route stages, at most one
//! windowed aggregate, and a sink. Deployments run `n` identical instances
//! against a shared [`Broker`](crate::broker::Broker); each instance owns
//! the partitions assigned to it and keeps its own window state, watermark
//! and consumer sessions.
//!
//! Two clock drivers share the per-record logic in [`instance`]:
//!
//! - [`sim`] advances a discrete simulated clock; an instance processes at
//!   most `capacity * dt` records per step and time jumps cost nothing,
//! - [`wall`] runs every instance as a real thread and emulates per-record
//!   cost with busy-work.
//!
//! Commit ticks drive everything stateful: offsets are committed, current
//! window results are forwarded downstream (dirty entries only), closed
//! windows are emitted when `emit_on_close_only` is set, and expired window
//! state is garbage-collected one commit interval after a window closes.

pub mod instance;
pub mod sim;
pub mod wall;
pub mod window;

use thiserror::Error;

use crate::broker::{BrokerError, Message};
use crate::stats::StatsError;
use crate::usecases::TimeAttribute;
pub use window::{assign_hopping, assign_tumbling, WindowKind, WindowSpec};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("topology is invalid: {0}")]
    InvalidTopology(String),
    #[error("topic {topic:?} has {actual} partitions, expected {expected}")]
    SpecMismatch {
        topic: String,
        expected: u32,
        actual: u32,
    },
    #[error("a deployment needs at least one instance")]
    NoInstances,
    #[error("a worker thread panicked")]
    WorkerPanicked,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Broker(#[from] BrokerError),
}

/// One stage of a linear dataflow. Stages that repartition or loop do so
/// through a named broker topic.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    /// Stateless per-record format conversion; keeps key and time.
    MapFormatConvert,
    /// Sets the key to `"<key>:<attribute value>"` and repartitions the
    /// stream through `via_topic` (same partition count as the source).
    RekeyTimeAttribute {
        attribute: TimeAttribute,
        via_topic: String,
    },
    /// Broadcast table join: every instance materializes the latest
    /// hierarchy event from `topic` regardless of partition assignment.
    JoinHierarchy {
        topic: String,
    },
    /// Routes each record to its parent group in the joined hierarchy;
    /// aggregates downstream keep one slot per child.
    RouteToParentGroup,
    TumblingAggregate {
        window: WindowSpec,
    },
    HoppingAggregate {
        window: WindowSpec,
    },
    /// Writes results to a broker topic.
    SinkTopic {
        topic: String,
    },
    /// Counts and discards results (stands in for an external database).
    NullSink,
    /// Re-consumes a sink topic as an additional source, enabling
    /// hierarchical aggregation level by level.
    Feedback {
        topic: String,
    },
}

/// Linear dataflow: a primary source topic plus an ordered stage list.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub source: String,
    pub stages: Vec<Stage>,
    /// When set, windows are emitted exactly once, after the watermark
    /// passes the window end; otherwise every commit tick forwards the
    /// current (partial) result of each window updated since the last tick.
    pub emit_on_close_only: bool,
}

impl Topology {
    /// Topics consumed through the instance's consumer group: the primary
    /// source plus any repartition and feedback topics. Lag is measured
    /// across all of them. Broadcast join topics are excluded; they are
    /// read outside the group.
    pub fn consumed_topics(&self) -> Vec<&str> {
        let mut topics = vec![self.source.as_str()];
        for stage in &self.stages {
            match stage {
                Stage::RekeyTimeAttribute { via_topic, .. } => topics.push(via_topic),
                Stage::Feedback { topic } => topics.push(topic),
                _ => {}
            }
        }
        topics
    }

    pub fn broadcast_topic(&self) -> Option<&str> {
        self.stages.iter().find_map(|s| match s {
            Stage::JoinHierarchy { topic } => Some(topic.as_str()),
            _ => None,
        })
    }

    pub fn sink_topic(&self) -> Option<&str> {
        self.stages.iter().find_map(|s| match s {
            Stage::SinkTopic { topic } => Some(topic.as_str()),
            _ => None,
        })
    }

    /// Every topic the topology touches, in creation order.
    pub fn all_topics(&self) -> Vec<&str> {
        let mut topics = vec![self.source.as_str()];
        for stage in &self.stages {
            match stage {
                Stage::RekeyTimeAttribute { via_topic, .. } => topics.push(via_topic),
                Stage::JoinHierarchy { topic } => topics.push(topic),
                Stage::SinkTopic { topic } => topics.push(topic),
                _ => {}
            }
        }
        topics.dedup();
        topics
    }

    pub fn window(&self) -> Option<WindowSpec> {
        self.stages.iter().find_map(|s| match s {
            Stage::TumblingAggregate { window } | Stage::HoppingAggregate { window } => {
                Some(*window)
            }
            _ => None,
        })
    }

    pub fn has_stateless_op(&self) -> bool {
        self.stages.iter().any(|s| {
            matches!(
                s,
                Stage::MapFormatConvert
                    | Stage::RekeyTimeAttribute { .. }
                    | Stage::RouteToParentGroup
            )
        })
    }

    pub fn has_tumbling_window(&self) -> bool {
        self.stages
            .iter()
            .any(|s| matches!(s, Stage::TumblingAggregate { .. }))
    }

    pub fn has_sliding_window(&self) -> bool {
        self.stages
            .iter()
            .any(|s| matches!(s, Stage::HoppingAggregate { .. }))
    }

    pub fn has_join(&self) -> bool {
        self.stages
            .iter()
            .any(|s| matches!(s, Stage::JoinHierarchy { .. }))
    }

    pub fn has_feedback(&self) -> bool {
        self.stages
            .iter()
            .any(|s| matches!(s, Stage::Feedback { .. }))
    }
}

/// How a deployment's clock advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Simulated,
    Wall,
}

/// Per-instance execution template: clock mode, processing cost model and
/// commit cadence. Identical for every instance of a deployment.
#[derive(Debug, Clone, Copy)]
pub struct InstanceRuntime {
    pub clock: ClockMode,
    /// Records per second one instance can process (simulated clock).
    pub capacity_rps: f64,
    /// Busy-work per record in nanoseconds (wall clock).
    pub record_cost_ns: u64,
    pub commit_interval_ms: u64,
    /// Capacity charge, in record equivalents, for each commit tick that
    /// performs work (simulated clock). Models per-commit overhead: shorter
    /// commit intervals spend more capacity on committing.
    pub commit_cost_records: f64,
    /// Capacity charge, in records per second, per assigned partition
    /// (simulated clock). Models per-partition bookkeeping overhead.
    pub partition_overhead_rps: f64,
}

impl InstanceRuntime {
    pub fn simulated(capacity_rps: f64, commit_interval_ms: u64) -> Self {
        Self {
            clock: ClockMode::Simulated,
            capacity_rps,
            record_cost_ns: 0,
            commit_interval_ms,
            commit_cost_records: 0.0,
            partition_overhead_rps: 0.0,
        }
    }
}

/// Outcome of a stopped deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Records consumed from the primary source, summed over instances.
    pub records_consumed: u64,
    /// Results emitted to the sink (topic or null), summed over instances.
    pub records_emitted: u64,
    pub consumed_per_instance: Vec<u64>,
}

/// One point of a sampled series (total lag or event-time latency).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub t_ms: u64,
    pub value: u64,
}

/// Anything that can feed records into a run: the simulated drivers pull
/// from it between steps, the wall driver paces it in real time.
pub trait Source {
    /// Event time of the next record, if any remain.
    fn peek_next_time(&self) -> Option<u64>;
    /// Emits every remaining record with `event_time < until`, in order.
    fn emit_until(&mut self, until: u64, out: &mut dyn FnMut(Message));
}

/// An empty source for runs that only replay pre-produced records.
pub struct NoSource;

impl Source for NoSource {
    fn peek_next_time(&self) -> Option<u64> {
        None
    }
    fn emit_until(&mut self, _until: u64, _out: &mut dyn FnMut(Message)) {}
}
