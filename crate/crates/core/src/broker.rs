//! In-process partitioned message log with consumer groups.
//!
//! Semantics mirror a minimal log-based messaging system:
//!
//! - every topic is a fixed set of append-only partitions; offsets are
//!   assigned densely from 0 per partition and records are retained for the
//!   lifetime of the topic (until [`Broker::reset`]),
//! - records are routed to partitions by hashing the record key (FNV-1a,
//!   64-bit) modulo the partition count, so all records for one key land in
//!   one partition and are read in order,
//! - consumer groups own a committed offset per partition; the group's lag on
//!   a topic is the sum over partitions of `produced_end - committed`,
//! - uncommitted read positions live in the polling instance's consumer
//!   session (kept per group member), never in the log itself: a poll
//!   advances only the session, a commit advances the group offset.
//!
//! All methods take `&self` and lock internally, so one broker can be shared
//! by concurrent producer and consumer threads in wall-clock runs.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::stats::SummaryStats;
use crate::usecases::HierarchySpec;

/// Identifies one deployed stream-processor instance within a group.
pub type InstanceId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum BrokerError {
    #[error("topic {0:?} already exists")]
    DuplicateTopic(String),
    #[error("topic {0:?} does not exist")]
    UnknownTopic(String),
    #[error("instance {instance} holds no assignment for group {group:?} on topic {topic:?}")]
    NotAssigned {
        group: String,
        topic: String,
        instance: InstanceId,
    },
    #[error("cannot assign partitions to an empty instance list")]
    NoInstances,
    #[error("commit offset {offset} exceeds end offset {end} for {topic:?}[{partition}]")]
    OffsetOutOfRange {
        topic: String,
        partition: u32,
        offset: u64,
        end: u64,
    },
    #[error(
        "commit offset {offset} is below committed offset {committed} for {topic:?}[{partition}]"
    )]
    StaleCommit {
        topic: String,
        partition: u32,
        offset: u64,
        committed: u64,
    },
}

/// Record payload: raw measurements enter the system, windowed aggregates
/// and hierarchy control events flow between operators.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Measurement(f64),
    Stats(SummaryStats),
    HierarchyEvent(HierarchySpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub key: Arc<str>,
    /// Milliseconds since the epoch of the simulated (or wall) clock.
    pub event_time: u64,
    pub payload: Payload,
}

impl Message {
    pub fn measurement(key: impl Into<Arc<str>>, event_time: u64, value: f64) -> Self {
        Self {
            key: key.into(),
            event_time,
            payload: Payload::Measurement(value),
        }
    }

    pub fn measurement_value(&self) -> Option<f64> {
        match self.payload {
            Payload::Measurement(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicSpec {
    pub name: String,
    pub partitions: u32,
}

impl TopicSpec {
    pub fn new(name: impl Into<String>, partitions: u32) -> Self {
        assert!(partitions >= 1, "topics need at least one partition");
        Self {
            name: name.into(),
            partitions,
        }
    }
}

/// One record as returned by [`Broker::poll`].
#[derive(Debug, Clone)]
pub struct PolledRecord {
    pub partition: u32,
    pub offset: u64,
    pub message: Message,
}

/// FNV-1a 64-bit over the key's UTF-8 bytes. Seedless and stable across
/// runs and platforms; the constants are the standard FNV offset basis and
/// prime. Covered by a golden test so the mapping can never drift silently.
pub fn partition_for(key: &str, partitions: u32) -> u32 {
    assert!(partitions >= 1);
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in key.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (hash % u64::from(partitions)) as u32
}

/// Round-robin assignment: partition `p` goes to `instances_sorted[p % n]`.
/// Pure; the broker applies the same rule when a group subscribes.
pub fn assignment_for(
    partitions: u32,
    instances: &[InstanceId],
) -> Result<BTreeMap<InstanceId, Vec<u32>>, BrokerError> {
    if instances.is_empty() {
        return Err(BrokerError::NoInstances);
    }
    let mut sorted: Vec<InstanceId> = instances.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut map: BTreeMap<InstanceId, Vec<u32>> = sorted.iter().map(|i| (*i, Vec::new())).collect();
    for p in 0..partitions {
        let owner = sorted[(p as usize) % sorted.len()];
        map.get_mut(&owner).unwrap().push(p);
    }
    Ok(map)
}

#[derive(Debug, Default)]
struct PartitionLog {
    /// Offset of `records[0]`; greater than zero once a truncation has
    /// dropped a fully-committed prefix.
    base: u64,
    records: Vec<Message>,
    /// Committed offset per consumer group; absent means 0.
    committed: BTreeMap<String, u64>,
}

impl PartitionLog {
    fn end(&self) -> u64 {
        self.base + self.records.len() as u64
    }
}

#[derive(Debug)]
struct Topic {
    spec: TopicSpec,
    parts: Vec<PartitionLog>,
}

impl Topic {
    fn fresh(spec: TopicSpec) -> Self {
        let parts = (0..spec.partitions)
            .map(|_| PartitionLog::default())
            .collect();
        Self { spec, parts }
    }
}

/// Consumer sessions of one group on one topic: the assignment plus each
/// member's uncommitted read position per assigned partition.
#[derive(Debug, Default)]
struct GroupSessions {
    members: BTreeMap<InstanceId, Vec<u32>>,
    positions: BTreeMap<(InstanceId, u32), u64>,
}

#[derive(Debug, Default)]
struct State {
    topics: BTreeMap<String, Topic>,
    sessions: BTreeMap<(String, String), GroupSessions>,
}

#[derive(Debug, Default)]
pub struct Broker {
    state: Mutex<State>,
}

impl Broker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_topic(&self, spec: TopicSpec) -> Result<(), BrokerError> {
        let mut st = self.state.lock().unwrap();
        if st.topics.contains_key(&spec.name) {
            return Err(BrokerError::DuplicateTopic(spec.name));
        }
        st.topics.insert(spec.name.clone(), Topic::fresh(spec));
        Ok(())
    }

    /// Appends a record to the partition derived from its key. Returns the
    /// (partition, offset) the record was stored at.
    pub fn produce(&self, topic: &str, message: Message) -> Result<(u32, u64), BrokerError> {
        let mut st = self.state.lock().unwrap();
        let t = st
            .topics
            .get_mut(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        let partition = partition_for(&message.key, t.spec.partitions);
        let log = &mut t.parts[partition as usize];
        let offset = log.end();
        log.records.push(message);
        Ok((partition, offset))
    }

    /// Subscribes a group to a topic with a fixed member list, replacing any
    /// previous assignment. Read positions start at the group's committed
    /// offsets. Returns the computed partition assignment.
    pub fn assign_partitions(
        &self,
        group: &str,
        topic: &str,
        instances: &[InstanceId],
    ) -> Result<BTreeMap<InstanceId, Vec<u32>>, BrokerError> {
        let mut st = self.state.lock().unwrap();
        let t = st
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        let map = assignment_for(t.spec.partitions, instances)?;
        let mut sessions = GroupSessions {
            members: map.clone(),
            positions: BTreeMap::new(),
        };
        for (instance, parts) in &map {
            for p in parts {
                let log = &t.parts[*p as usize];
                let committed = log.committed.get(group).copied().unwrap_or(0);
                // A group joining after truncation starts at the earliest
                // retained record.
                sessions
                    .positions
                    .insert((*instance, *p), committed.max(log.base));
            }
        }
        st.sessions
            .insert((group.to_string(), topic.to_string()), sessions);
        Ok(map)
    }

    /// Returns up to `max` records from the instance's assigned partitions,
    /// in per-partition offset order (partitions visited in ascending
    /// order), starting after the instance's session position.
    pub fn poll(
        &self,
        group: &str,
        topic: &str,
        instance: InstanceId,
        max: usize,
    ) -> Result<Vec<PolledRecord>, BrokerError> {
        let mut st = self.state.lock().unwrap();
        let st = &mut *st;
        let t = st
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        let sessions = st
            .sessions
            .get_mut(&(group.to_string(), topic.to_string()))
            .filter(|s| s.members.contains_key(&instance))
            .ok_or_else(|| BrokerError::NotAssigned {
                group: group.to_string(),
                topic: topic.to_string(),
                instance,
            })?;
        let parts = sessions.members.get(&instance).unwrap().clone();
        let mut out = Vec::new();
        for p in parts {
            if out.len() >= max {
                break;
            }
            let log = &t.parts[p as usize];
            let pos = sessions.positions.entry((instance, p)).or_insert(log.base);
            let end = log.end();
            while *pos < end && out.len() < max {
                out.push(PolledRecord {
                    partition: p,
                    offset: *pos,
                    message: log.records[(*pos - log.base) as usize].clone(),
                });
                *pos += 1;
            }
        }
        Ok(out)
    }

    /// Advances the group's committed offset. Offsets are monotone: lower
    /// values are rejected, values beyond the partition end are rejected.
    pub fn commit(
        &self,
        group: &str,
        topic: &str,
        partition: u32,
        offset: u64,
    ) -> Result<(), BrokerError> {
        let mut st = self.state.lock().unwrap();
        let t = st
            .topics
            .get_mut(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        let log = &mut t.parts[partition as usize];
        let end = log.end();
        if offset > end {
            return Err(BrokerError::OffsetOutOfRange {
                topic: topic.to_string(),
                partition,
                offset,
                end,
            });
        }
        let committed = log.committed.entry(group.to_string()).or_insert(0);
        if offset < *committed {
            return Err(BrokerError::StaleCommit {
                topic: topic.to_string(),
                partition,
                offset,
                committed: *committed,
            });
        }
        *committed = offset;
        Ok(())
    }

    /// Total record lag of a group on a topic: the sum over partitions of
    /// everything produced but not yet committed.
    pub fn total_lag(&self, group: &str, topic: &str) -> Result<u64, BrokerError> {
        let st = self.state.lock().unwrap();
        let t = st
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        Ok(t.parts
            .iter()
            .map(|log| log.end() - log.committed.get(group).copied().unwrap_or(0))
            .sum())
    }

    /// Drops every record that all subscribed groups have committed past.
    /// Topics without any subscribed group keep everything, as do topics
    /// where some group has yet to commit. Returns the number of records
    /// dropped. Offsets are never reused: the log keeps a base offset.
    pub fn truncate_committed(&self, topic: &str) -> Result<u64, BrokerError> {
        let mut st = self.state.lock().unwrap();
        let st = &mut *st;
        let t = st
            .topics
            .get_mut(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        let groups: Vec<&str> = st
            .sessions
            .keys()
            .filter(|(_, session_topic)| session_topic == topic)
            .map(|(group, _)| group.as_str())
            .collect();
        if groups.is_empty() {
            return Ok(0);
        }
        let mut dropped = 0;
        for log in &mut t.parts {
            let floor = groups
                .iter()
                .map(|g| log.committed.get(*g).copied().unwrap_or(0))
                .min()
                .unwrap();
            if floor > log.base {
                let k = (floor - log.base) as usize;
                log.records.drain(..k);
                log.base = floor;
                dropped += k as u64;
            }
        }
        Ok(dropped)
    }

    /// Deletes and recreates every topic per its spec and drops all group
    /// sessions and committed offsets. A fresh broker resets to itself.
    pub fn reset(&self) {
        let mut st = self.state.lock().unwrap();
        let specs: Vec<TopicSpec> = st.topics.values().map(|t| t.spec.clone()).collect();
        st.topics.clear();
        st.sessions.clear();
        for spec in specs {
            let name = spec.name.clone();
            st.topics.insert(name, Topic::fresh(spec));
        }
    }

    /// Sum of end offsets across partitions (= records ever produced).
    pub fn produced_total(&self, topic: &str) -> Result<u64, BrokerError> {
        let st = self.state.lock().unwrap();
        let t = st
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        Ok(t.parts.iter().map(|log| log.end()).sum())
    }

    /// End offset per partition.
    pub fn end_offsets(&self, topic: &str) -> Result<Vec<u64>, BrokerError> {
        let st = self.state.lock().unwrap();
        let t = st
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        Ok(t.parts.iter().map(|log| log.end()).collect())
    }

    /// Reads records of one partition from `offset`, independent of any
    /// group. Broadcast consumers (which keep their own positions and never
    /// commit) read through this. Records below the retention base are
    /// skipped.
    pub fn fetch_from(
        &self,
        topic: &str,
        partition: u32,
        offset: u64,
        max: usize,
    ) -> Result<Vec<Message>, BrokerError> {
        let st = self.state.lock().unwrap();
        let t = st
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        let log = &t.parts[partition as usize];
        let from = (offset.max(log.base).min(log.end()) - log.base) as usize;
        let to = log.records.len().min(from + max);
        Ok(log.records[from..to].to_vec())
    }

    /// All retained records of a topic in (partition, offset) order. Test
    /// and teardown helper; not part of the consumer path.
    pub fn read_all(&self, topic: &str) -> Result<Vec<Message>, BrokerError> {
        let st = self.state.lock().unwrap();
        let t = st
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        Ok(t.parts
            .iter()
            .flat_map(|log| log.records.iter().cloned())
            .collect())
    }

    pub fn topic_partitions(&self, topic: &str) -> Result<u32, BrokerError> {
        let st = self.state.lock().unwrap();
        st.topics
            .get(topic)
            .map(|t| t.spec.partitions)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))
    }
}
