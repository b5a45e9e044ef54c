//! Per-instance runtime state: consumer sessions, window state, watermark.
//!
//! An instance is clock-agnostic; the drivers in [`super::sim`] and
//! [`super::wall`] decide *when* records are polled and commit ticks fire,
//! this module decides *what* happens then. Invariants:
//!
//! - the watermark is the maximum event time the instance has processed,
//! - a window `[w, w + size)` keyed by group `g` closes once the watermark
//!   reaches `w + size + (height(g) - 1) * commit_interval`; plain keyed
//!   windows behave like height-1 groups and close at `w + size`,
//! - with `emit_on_close_only` a window is emitted exactly once, at the
//!   first commit tick after it closes; otherwise every commit tick
//!   forwards the current value of each window updated since the last tick,
//! - window state is garbage-collected one commit interval after close,
//! - hierarchical aggregates keep one slot per child: leaf measurements
//!   accumulate into their sensor's slot, child-group results replace their
//!   group's slot, so re-delivered intermediate results never double-count.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::broker::{Broker, InstanceId, Message, Payload, PolledRecord};
use crate::stats::SummaryStats;
use crate::usecases::{time_attribute_value, Hierarchy, TimeAttribute};

use super::{EngineError, Stage, Topology, WindowSpec};

/// Where a polled record came from, which determines the stage it enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// The topology's primary source topic.
    Primary,
    /// An internal repartition topic (downstream of a rekey).
    Repartition,
    /// A sink topic re-consumed through a feedback edge.
    Feedback,
}

#[derive(Debug, Clone)]
pub struct SourceSlot {
    pub topic: String,
    pub kind: SourceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AggKind {
    Tumbling,
    Hopping,
}

#[derive(Debug, Clone, PartialEq)]
enum SinkKind {
    Topic(String),
    Null,
}

/// Topology digested into the fields the record path needs.
#[derive(Debug, Clone)]
struct CompiledPipeline {
    rekey: Option<(TimeAttribute, String)>,
    hierarchical: bool,
    window: Option<(AggKind, WindowSpec)>,
    sink: SinkKind,
}

impl CompiledPipeline {
    fn compile(topology: &Topology) -> Result<Self, EngineError> {
        let mut rekey = None;
        let mut join = None;
        let mut route = false;
        let mut window = None;
        let mut sink = None;
        let mut feedback = None;
        for stage in &topology.stages {
            match stage {
                Stage::MapFormatConvert => {}
                Stage::RekeyTimeAttribute {
                    attribute,
                    via_topic,
                } => rekey = Some((*attribute, via_topic.clone())),
                Stage::JoinHierarchy { topic } => join = Some(topic.clone()),
                Stage::RouteToParentGroup => route = true,
                Stage::TumblingAggregate { window: w } => {
                    window = Some((AggKind::Tumbling, *w));
                }
                Stage::HoppingAggregate { window: w } => {
                    window = Some((AggKind::Hopping, *w));
                }
                Stage::SinkTopic { topic } => sink = Some(SinkKind::Topic(topic.clone())),
                Stage::NullSink => sink = Some(SinkKind::Null),
                Stage::Feedback { topic } => feedback = Some(topic.clone()),
            }
        }
        let sink = sink.ok_or_else(|| EngineError::InvalidTopology("missing sink".into()))?;
        if route != join.is_some() {
            return Err(EngineError::InvalidTopology(
                "hierarchy join and parent-group routing must appear together".into(),
            ));
        }
        if route && window.is_none() {
            return Err(EngineError::InvalidTopology(
                "parent-group routing needs a windowed aggregate".into(),
            ));
        }
        if rekey.is_some() && window.is_none() {
            return Err(EngineError::InvalidTopology(
                "rekey needs a downstream windowed aggregate".into(),
            ));
        }
        if let Some(fb) = &feedback {
            match &sink {
                SinkKind::Topic(t) if t == fb => {}
                _ => {
                    return Err(EngineError::InvalidTopology(
                        "feedback must re-consume the sink topic".into(),
                    ))
                }
            }
        }
        Ok(Self {
            rekey,
            hierarchical: route,
            window,
            sink,
        })
    }
}

#[derive(Debug, Clone)]
enum AggState {
    Direct(SummaryStats),
    /// One slot per child (leaf sensor or child group), merged on read.
    PerChild(BTreeMap<Arc<str>, SummaryStats>),
}

impl AggState {
    fn snapshot(&self) -> SummaryStats {
        match self {
            AggState::Direct(s) => *s,
            AggState::PerChild(slots) => slots
                .values()
                .fold(SummaryStats::new(), |acc, s| acc.merge(s)),
        }
    }
}

#[derive(Debug, Clone)]
struct WindowState {
    agg: AggState,
    dirty: bool,
    /// Watermark at which this window closes (`end + height delay`).
    close_at: u64,
    /// Extra close delay (hierarchy levels); used to flush level by level.
    delay: u64,
}

type StateKey = (Arc<str>, u64);

/// All mutable state of one deployed instance.
pub struct InstanceCore {
    pub id: InstanceId,
    group: String,
    pipeline: CompiledPipeline,
    emit_on_close_only: bool,
    commit_interval_ms: u64,
    sources: Vec<SourceSlot>,
    /// Partitions assigned to this instance, per source (same index).
    assignment: Vec<Vec<u32>>,
    /// Next offset to commit per (source index, partition).
    positions: BTreeMap<(usize, u32), u64>,
    committed: BTreeMap<(usize, u32), u64>,
    offsets_advanced: bool,
    hierarchy: Option<Arc<Hierarchy>>,
    broadcast_topic: Option<String>,
    broadcast_positions: Vec<u64>,
    state: HashMap<StateKey, WindowState>,
    dirty_keys: Vec<StateKey>,
    pub watermark: u64,
    next_close_at: u64,
    next_gc_at: u64,
    pub consumed_primary: u64,
    pub emitted: u64,
}

impl InstanceCore {
    pub fn new(
        id: InstanceId,
        group: &str,
        topology: &Topology,
        commit_interval_ms: u64,
        sources: Vec<SourceSlot>,
        assignment: Vec<Vec<u32>>,
        broadcast_partitions: u32,
    ) -> Result<Self, EngineError> {
        assert_eq!(sources.len(), assignment.len());
        Ok(Self {
            id,
            group: group.to_string(),
            pipeline: CompiledPipeline::compile(topology)?,
            emit_on_close_only: topology.emit_on_close_only,
            commit_interval_ms,
            sources,
            assignment,
            positions: BTreeMap::new(),
            committed: BTreeMap::new(),
            offsets_advanced: false,
            hierarchy: None,
            broadcast_topic: topology.broadcast_topic().map(str::to_string),
            broadcast_positions: vec![0; broadcast_partitions as usize],
            state: HashMap::new(),
            dirty_keys: Vec::new(),
            watermark: 0,
            next_close_at: u64::MAX,
            next_gc_at: u64::MAX,
            consumed_primary: 0,
            emitted: 0,
        })
    }

    pub fn sources(&self) -> &[SourceSlot] {
        &self.sources
    }

    /// Total partitions assigned to this instance across group sources;
    /// input to the per-partition overhead cost model.
    pub fn assigned_partition_count(&self) -> u64 {
        self.assignment.iter().map(|a| a.len() as u64).sum()
    }

    /// True if the next commit tick has anything to do.
    pub fn has_pending_commit_work(&self) -> bool {
        self.offsets_advanced
            || !self.dirty_keys.is_empty()
            || (self.emit_on_close_only && self.watermark >= self.next_close_at)
    }

    /// Reads any new broadcast control events and materializes them.
    /// Control consumption is not metered: it models a table changelog,
    /// not data-plane records.
    pub fn sync_broadcast(&mut self, broker: &Broker) -> Result<(), EngineError> {
        let Some(topic) = self.broadcast_topic.clone() else {
            return Ok(());
        };
        for p in 0..self.broadcast_positions.len() {
            loop {
                let batch = broker.fetch_from(&topic, p as u32, self.broadcast_positions[p], 64)?;
                if batch.is_empty() {
                    break;
                }
                self.broadcast_positions[p] += batch.len() as u64;
                for msg in batch {
                    if let Payload::HierarchyEvent(spec) = &msg.payload {
                        self.hierarchy = Some(Arc::new(Hierarchy::build(spec)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Polls up to `max` records across this instance's sources (internal
    /// topics first so downstream queues drain ahead of new input) and runs
    /// them through the pipeline. Returns the number of records processed.
    pub fn poll_and_process(&mut self, broker: &Broker, max: u64) -> Result<u64, EngineError> {
        if max == 0 {
            return Ok(0);
        }
        let mut remaining = max;
        let order: Vec<usize> = {
            let mut internal: Vec<usize> = (0..self.sources.len())
                .filter(|i| self.sources[*i].kind != SourceKind::Primary)
                .collect();
            let primary: Vec<usize> = (0..self.sources.len())
                .filter(|i| self.sources[*i].kind == SourceKind::Primary)
                .collect();
            internal.extend(primary);
            internal
        };
        let mut processed = 0;
        for idx in order {
            while remaining > 0 {
                let batch_max = remaining.min(4096) as usize;
                let topic = self.sources[idx].topic.clone();
                let records = broker.poll(&self.group, &topic, self.id, batch_max)?;
                if records.is_empty() {
                    break;
                }
                remaining -= records.len() as u64;
                processed += records.len() as u64;
                self.apply_batch(idx, &records, broker)?;
            }
        }
        Ok(processed)
    }

    /// Processes every available record on internal (non-primary) sources,
    /// ignoring capacity. Used at teardown so repartition and feedback
    /// queues settle; primary-source consumption is never extended.
    pub fn drain_internal(&mut self, broker: &Broker) -> Result<u64, EngineError> {
        let mut drained = 0;
        for idx in 0..self.sources.len() {
            if self.sources[idx].kind == SourceKind::Primary {
                continue;
            }
            loop {
                let topic = self.sources[idx].topic.clone();
                let records = broker.poll(&self.group, &topic, self.id, 4096)?;
                if records.is_empty() {
                    break;
                }
                drained += records.len() as u64;
                self.apply_batch(idx, &records, broker)?;
            }
        }
        Ok(drained)
    }

    fn apply_batch(
        &mut self,
        source_idx: usize,
        records: &[PolledRecord],
        broker: &Broker,
    ) -> Result<(), EngineError> {
        let kind = self.sources[source_idx].kind;
        for r in records {
            self.positions
                .insert((source_idx, r.partition), r.offset + 1);
            self.offsets_advanced = true;
            self.process_record(kind, &r.message, broker)?;
        }
        Ok(())
    }

    fn process_record(
        &mut self,
        kind: SourceKind,
        msg: &Message,
        broker: &Broker,
    ) -> Result<(), EngineError> {
        match kind {
            SourceKind::Primary => {
                self.consumed_primary += 1;
                self.watermark = self.watermark.max(msg.event_time);
                if let Some((attribute, via_topic)) = &self.pipeline.rekey {
                    let attr = time_attribute_value(*attribute, msg.event_time);
                    let new_key: Arc<str> = format!("{}:{}", msg.key, attr).into();
                    broker.produce(
                        via_topic,
                        Message {
                            key: new_key,
                            event_time: msg.event_time,
                            payload: msg.payload.clone(),
                        },
                    )?;
                    return Ok(());
                }
                if self.pipeline.hierarchical {
                    return self.process_hierarchical(msg);
                }
                match self.pipeline.window {
                    None => self.emit_passthrough(msg, broker),
                    Some(_) => self.accumulate_windows(msg.key.clone(), msg),
                }
            }
            SourceKind::Repartition => {
                self.watermark = self.watermark.max(msg.event_time);
                self.accumulate_windows(msg.key.clone(), msg)
            }
            SourceKind::Feedback => {
                let Payload::Stats(stats) = &msg.payload else {
                    return Ok(());
                };
                let Some(hierarchy) = self.hierarchy.clone() else {
                    return Ok(());
                };
                let Some(parent) = hierarchy.parent_of(&msg.key) else {
                    // Root results loop back too; they have nowhere to go.
                    return Ok(());
                };
                let child = msg.key.clone();
                let window_start = msg.event_time;
                let delay = self.close_delay(parent);
                let entry = self.entry(parent.clone(), window_start, delay, true);
                if let AggState::PerChild(slots) = &mut entry.agg {
                    slots.insert(child, *stats);
                }
                self.mark_dirty(parent.clone(), window_start);
                Ok(())
            }
        }
    }

    fn process_hierarchical(&mut self, msg: &Message) -> Result<(), EngineError> {
        let Payload::Measurement(value) = msg.payload else {
            return Ok(());
        };
        let Some(hierarchy) = self.hierarchy.clone() else {
            return Ok(());
        };
        // Records from sensors outside the hierarchy have no parent group.
        let Some(parent) = hierarchy.parent_of(&msg.key) else {
            return Ok(());
        };
        let parent = parent.clone();
        let delay = self.close_delay(&parent);
        let (kind, window) = self.pipeline.window.expect("validated at compile");
        let child = msg.key.clone();
        let t = msg.event_time;
        let starts = match kind {
            AggKind::Tumbling => vec![super::assign_tumbling(t, window.size_ms)],
            AggKind::Hopping => super::assign_hopping(t, window.size_ms, window.advance_ms),
        };
        for w in starts {
            let entry = self.entry(parent.clone(), w, delay, true);
            if let AggState::PerChild(slots) = &mut entry.agg {
                slots.entry(child.clone()).or_default().accumulate(value)?;
            }
            self.mark_dirty(parent.clone(), w);
        }
        Ok(())
    }

    /// Extra watermark delay before a group's windows close: child results
    /// need one commit interval per hierarchy level to propagate up.
    fn close_delay(&self, group: &str) -> u64 {
        match &self.hierarchy {
            Some(h) => {
                let height = h.height_of(group).unwrap_or(1);
                u64::from(height.saturating_sub(1)) * self.commit_interval_ms
            }
            None => 0,
        }
    }

    fn accumulate_windows(&mut self, key: Arc<str>, msg: &Message) -> Result<(), EngineError> {
        let Payload::Measurement(value) = msg.payload else {
            return Ok(());
        };
        let (kind, window) = self.pipeline.window.expect("caller checked");
        let t = msg.event_time;
        match kind {
            AggKind::Tumbling => {
                let w = super::assign_tumbling(t, window.size_ms);
                self.accumulate_one(key, w, value)?;
            }
            AggKind::Hopping => {
                for w in super::assign_hopping(t, window.size_ms, window.advance_ms) {
                    self.accumulate_one(key.clone(), w, value)?;
                }
            }
        }
        Ok(())
    }

    fn accumulate_one(&mut self, key: Arc<str>, w: u64, value: f64) -> Result<(), EngineError> {
        let entry = self.entry(key.clone(), w, 0, false);
        if let AggState::Direct(stats) = &mut entry.agg {
            stats.accumulate(value)?;
        }
        self.mark_dirty(key, w);
        Ok(())
    }

    fn entry(&mut self, key: Arc<str>, w: u64, delay: u64, per_child: bool) -> &mut WindowState {
        let size = self.pipeline.window.expect("windowed path").1.size_ms;
        let close_at = w + size + delay;
        let gc_at = close_at + self.commit_interval_ms;
        let state = self.state.entry((key, w)).or_insert_with(|| WindowState {
            agg: if per_child {
                AggState::PerChild(BTreeMap::new())
            } else {
                AggState::Direct(SummaryStats::new())
            },
            dirty: false,
            close_at,
            delay,
        });
        if state.close_at < self.next_close_at {
            self.next_close_at = state.close_at;
        }
        if gc_at < self.next_gc_at {
            self.next_gc_at = gc_at;
        }
        state
    }

    fn mark_dirty(&mut self, key: Arc<str>, w: u64) {
        let entry = self
            .state
            .get_mut(&(key.clone(), w))
            .expect("just inserted");
        if !entry.dirty {
            entry.dirty = true;
            self.dirty_keys.push((key, w));
        }
    }

    fn emit_passthrough(&mut self, msg: &Message, broker: &Broker) -> Result<(), EngineError> {
        self.emitted += 1;
        if let SinkKind::Topic(topic) = &self.pipeline.sink {
            broker.produce(topic, msg.clone())?;
        }
        Ok(())
    }

    fn emit_result(
        &mut self,
        key: Arc<str>,
        window_start: u64,
        stats: SummaryStats,
        broker: &Broker,
    ) -> Result<(), EngineError> {
        self.emitted += 1;
        if let SinkKind::Topic(topic) = &self.pipeline.sink {
            broker.produce(
                topic,
                Message {
                    key,
                    event_time: window_start,
                    payload: Payload::Stats(stats),
                },
            )?;
        }
        Ok(())
    }

    /// Commit tick: emit per the configured mode, GC expired state, commit
    /// advanced offsets. Returns true when the tick performed any work.
    pub fn on_commit(&mut self, broker: &Broker) -> Result<bool, EngineError> {
        let mut performed = false;
        if self.pipeline.window.is_some() {
            if self.emit_on_close_only {
                if self.watermark >= self.next_close_at {
                    performed |= self.emit_closed(broker)? > 0;
                }
                self.dirty_keys.clear();
            } else {
                performed |= self.forward_dirty(broker)? > 0;
                if self.watermark >= self.next_gc_at {
                    self.gc();
                }
            }
        }
        performed |= self.commit_offsets(broker)?;
        Ok(performed)
    }

    /// Emits and removes every window closed at the current watermark.
    fn emit_closed(&mut self, broker: &Broker) -> Result<u64, EngineError> {
        let mut due: Vec<StateKey> = self
            .state
            .iter()
            .filter(|(_, st)| st.close_at <= self.watermark)
            .map(|(k, _)| k.clone())
            .collect();
        due.sort_unstable();
        let count = due.len() as u64;
        for key in due {
            let st = self.state.remove(&key).expect("collected above");
            self.emit_result(key.0, key.1, st.agg.snapshot(), broker)?;
        }
        self.recompute_close_gc();
        Ok(count)
    }

    /// Forwards the current value of every window updated since the last
    /// commit tick (intermediate results).
    pub fn forward_dirty(&mut self, broker: &Broker) -> Result<u64, EngineError> {
        if self.dirty_keys.is_empty() {
            return Ok(0);
        }
        let mut keys = std::mem::take(&mut self.dirty_keys);
        keys.sort_unstable();
        let mut emitted = 0;
        for key in keys {
            let Some(st) = self.state.get_mut(&key) else {
                continue;
            };
            if !st.dirty {
                continue;
            }
            st.dirty = false;
            let snapshot = st.agg.snapshot();
            self.emit_result(key.0, key.1, snapshot, broker)?;
            emitted += 1;
        }
        Ok(emitted)
    }

    fn gc(&mut self) {
        let watermark = self.watermark;
        let ci = self.commit_interval_ms;
        self.state.retain(|_, st| st.close_at + ci > watermark);
        self.recompute_close_gc();
    }

    fn recompute_close_gc(&mut self) {
        self.next_close_at = self
            .state
            .values()
            .map(|st| st.close_at)
            .min()
            .unwrap_or(u64::MAX);
        self.next_gc_at = self.next_close_at.saturating_add(self.commit_interval_ms);
    }

    fn commit_offsets(&mut self, broker: &Broker) -> Result<bool, EngineError> {
        if !self.offsets_advanced {
            return Ok(false);
        }
        let mut any = false;
        for ((source_idx, partition), pos) in self.positions.clone() {
            let committed = self
                .committed
                .get(&(source_idx, partition))
                .copied()
                .unwrap_or(0);
            if pos > committed {
                let topic = &self.sources[source_idx].topic;
                broker.commit(&self.group, topic, partition, pos)?;
                self.committed.insert((source_idx, partition), pos);
                any = true;
            }
        }
        self.offsets_advanced = false;
        Ok(any)
    }

    /// One teardown pass: with close-only emission, emits the lowest
    /// remaining hierarchy tier (so parents wait for their children's
    /// feedback, drained between passes); otherwise forwards dirty state.
    /// Returns the number of results emitted.
    pub fn flush_pass(&mut self, broker: &Broker) -> Result<u64, EngineError> {
        if self.pipeline.window.is_none() {
            return Ok(0);
        }
        if !self.emit_on_close_only {
            return self.forward_dirty(broker);
        }
        let Some(min_delay) = self.state.values().map(|st| st.delay).min() else {
            return Ok(0);
        };
        let mut due: Vec<StateKey> = self
            .state
            .iter()
            .filter(|(_, st)| st.delay == min_delay)
            .map(|(k, _)| k.clone())
            .collect();
        due.sort_unstable();
        let count = due.len() as u64;
        for key in due {
            let st = self.state.remove(&key).expect("collected above");
            self.emit_result(key.0, key.1, st.agg.snapshot(), broker)?;
        }
        self.recompute_close_gc();
        Ok(count)
    }

    /// Final offset flush at teardown.
    pub fn final_commit(&mut self, broker: &Broker) -> Result<(), EngineError> {
        self.offsets_advanced = true;
        self.commit_offsets(broker)?;
        Ok(())
    }

    /// True if any assigned partition (or the broadcast topic) holds
    /// records this instance has not read yet.
    pub fn has_backlog(&self, broker: &Broker) -> Result<bool, EngineError> {
        for (idx, slot) in self.sources.iter().enumerate() {
            let ends = broker.end_offsets(&slot.topic)?;
            for &p in &self.assignment[idx] {
                let pos = self.positions.get(&(idx, p)).copied().unwrap_or(0);
                if ends[p as usize] > pos {
                    return Ok(true);
                }
            }
        }
        if let Some(topic) = &self.broadcast_topic {
            let ends = broker.end_offsets(topic)?;
            for (p, pos) in self.broadcast_positions.iter().enumerate() {
                if ends[p] > *pos {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

/// The source topics a deployment consumes through its group, tagged with
/// the stage they feed.
pub fn consumed_source_slots(topology: &Topology) -> Vec<SourceSlot> {
    let mut slots = vec![SourceSlot {
        topic: topology.source.clone(),
        kind: SourceKind::Primary,
    }];
    for stage in &topology.stages {
        match stage {
            Stage::RekeyTimeAttribute { via_topic, .. } => slots.push(SourceSlot {
                topic: via_topic.clone(),
                kind: SourceKind::Repartition,
            }),
            Stage::Feedback { topic } => slots.push(SourceSlot {
                topic: topic.clone(),
                kind: SourceKind::Feedback,
            }),
            _ => {}
        }
    }
    slots
}

/// Builds the instance set for a deployment: validates the topology against
/// the broker's topics, subscribes the group and splits the partition
/// assignment per instance. Instance ids are `0..n`.
pub fn build_instances(
    broker: &Broker,
    topology: &Topology,
    n: u32,
    commit_interval_ms: u64,
    group: &str,
    expected_partitions: u32,
) -> Result<Vec<InstanceCore>, EngineError> {
    if n == 0 {
        return Err(EngineError::NoInstances);
    }
    for topic in topology.all_topics() {
        let actual = broker.topic_partitions(topic)?;
        if actual != expected_partitions {
            return Err(EngineError::SpecMismatch {
                topic: topic.to_string(),
                expected: expected_partitions,
                actual,
            });
        }
    }
    let ids: Vec<InstanceId> = (0..n).collect();
    let slots = consumed_source_slots(topology);
    let mut per_instance_assignment: Vec<Vec<Vec<u32>>> = vec![Vec::new(); n as usize];
    for slot in &slots {
        let map = broker.assign_partitions(group, &slot.topic, &ids)?;
        for id in &ids {
            per_instance_assignment[*id as usize].push(map[id].clone());
        }
    }
    let broadcast_partitions = match topology.broadcast_topic() {
        Some(topic) => broker.topic_partitions(topic)?,
        None => 0,
    };
    let mut instances = Vec::with_capacity(n as usize);
    for id in ids {
        instances.push(InstanceCore::new(
            id,
            group,
            topology,
            commit_interval_ms,
            slots.clone(),
            per_instance_assignment[id as usize].clone(),
            broadcast_partitions,
        )?);
    }
    Ok(instances)
}
