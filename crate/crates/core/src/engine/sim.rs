//! Simulated-clock driver.
//!
//! Time is a `u64` millisecond cursor advanced in explicit steps. Within a
//! step of length `dt`, each instance earns `capacity * dt` records of
//! processing budget (minus modeled overheads) and consumes at most that
//! many records; unused budget carries over, capped at two commit intervals
//! worth so idle periods cannot bank unbounded burst capacity. Commit ticks
//! fire when a step lands on a multiple of the commit interval; callers
//! keep steps on that grid while any instance has pending work.
//!
//! Runs are bit-deterministic: same broker contents, same deployment, same
//! step sequence give identical state, emissions and commits.

use std::sync::Arc;

use crate::broker::Broker;

use super::instance::{build_instances, InstanceCore};
use super::{EngineError, InstanceRuntime, RunReport, Topology};

pub struct SimDeployment {
    broker: Arc<Broker>,
    group: String,
    runtime: InstanceRuntime,
    consumed_topics: Vec<String>,
    instances: Vec<InstanceCore>,
    budgets: Vec<f64>,
    now: u64,
}

impl SimDeployment {
    /// Deploys `n` instances of `topology` against already-created topics.
    /// Every referenced topic must have `expected_partitions` partitions.
    pub fn deploy(
        broker: Arc<Broker>,
        topology: &Topology,
        n: u32,
        runtime: InstanceRuntime,
        group: &str,
        expected_partitions: u32,
    ) -> Result<Self, EngineError> {
        let instances = build_instances(
            &broker,
            topology,
            n,
            runtime.commit_interval_ms,
            group,
            expected_partitions,
        )?;
        let consumed_topics = topology
            .consumed_topics()
            .into_iter()
            .map(str::to_string)
            .collect();
        let budgets = vec![0.0; instances.len()];
        Ok(Self {
            broker,
            group: group.to_string(),
            runtime,
            consumed_topics,
            instances,
            budgets,
            now: 0,
        })
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// True when a further step could do work: unread records on any
    /// assigned partition, or state waiting for the next commit tick.
    pub fn busy(&self) -> Result<bool, EngineError> {
        for inst in &self.instances {
            if inst.has_pending_commit_work() || inst.has_backlog(&self.broker)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Advances the clock to `t`, processing within the step's budget and
    /// firing a commit tick if `t` lies on the commit-interval grid.
    pub fn advance_to(&mut self, t: u64) -> Result<(), EngineError> {
        if t <= self.now {
            return Ok(());
        }
        let dt_s = (t - self.now) as f64 / 1000.0;
        let ci = self.runtime.commit_interval_ms;
        let budget_cap = (2.0 * self.runtime.capacity_rps * ci as f64 / 1000.0).max(2.0);
        for (i, inst) in self.instances.iter_mut().enumerate() {
            inst.sync_broadcast(&self.broker)?;
            let net_rate = (self.runtime.capacity_rps
                - self.runtime.partition_overhead_rps * inst.assigned_partition_count() as f64)
                .max(0.0);
            self.budgets[i] = (self.budgets[i] + net_rate * dt_s).min(budget_cap);
            let take = self.budgets[i].max(0.0).floor() as u64;
            let processed = inst.poll_and_process(&self.broker, take)?;
            self.budgets[i] -= processed as f64;
        }
        if t.is_multiple_of(ci) {
            for (i, inst) in self.instances.iter_mut().enumerate() {
                if inst.has_pending_commit_work() {
                    let performed = inst.on_commit(&self.broker)?;
                    if performed {
                        self.budgets[i] -= self.runtime.commit_cost_records;
                    }
                }
            }
        }
        self.now = t;
        Ok(())
    }

    /// Group lag summed over every consumed topic (primary plus internal),
    /// so internally queued records count toward the backlog.
    pub fn total_lag(&self) -> Result<u64, EngineError> {
        let mut lag = 0;
        for topic in &self.consumed_topics {
            lag += self.broker.total_lag(&self.group, topic)?;
        }
        Ok(lag)
    }

    /// Worst event-time latency across instances: `now` minus the oldest
    /// instance watermark. Instances that have not processed anything yet
    /// are skipped.
    pub fn latency_ms(&self) -> u64 {
        self.instances
            .iter()
            .filter(|i| i.watermark > 0 || i.consumed_primary > 0)
            .map(|i| self.now.saturating_sub(i.watermark))
            .max()
            .unwrap_or(0)
    }

    /// Halts the deployment: drains internal topics (never the primary
    /// source), emits remaining window state level by level, and flushes
    /// final commits.
    pub fn stop(mut self) -> Result<RunReport, EngineError> {
        loop {
            let mut progress = 0;
            for inst in &mut self.instances {
                progress += inst.drain_internal(&self.broker)?;
            }
            for inst in &mut self.instances {
                progress += inst.flush_pass(&self.broker)?;
            }
            if progress == 0 {
                break;
            }
        }
        for inst in &mut self.instances {
            inst.final_commit(&self.broker)?;
        }
        let consumed_per_instance: Vec<u64> =
            self.instances.iter().map(|i| i.consumed_primary).collect();
        Ok(RunReport {
            records_consumed: consumed_per_instance.iter().sum(),
            records_emitted: self.instances.iter().map(|i| i.emitted).sum(),
            consumed_per_instance,
        })
    }
}
