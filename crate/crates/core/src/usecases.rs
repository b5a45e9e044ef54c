//! The four benchmark dataflows and their derived quantities.
//!
//! Each use case is a topology template over the shared topic names below:
//!
//! - UC1: source -> format-convert map -> null sink (database stand-in),
//! - UC2: source -> tumbling aggregate per sensor -> sink,
//! - UC3: source -> rekey to (sensor, time attribute) -> hopping aggregate
//!   -> sink, repartitioned through an internal topic,
//! - UC4: source + hierarchy control stream -> broadcast join -> route to
//!   parent group -> windowed aggregate -> sink, with the sink fed back as
//!   an additional source so aggregates climb the hierarchy level by level.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{Stage, Topology, WindowKind, WindowSpec};

pub const INPUT_TOPIC: &str = "input";
pub const OUTPUT_TOPIC: &str = "output";
pub const REKEY_TOPIC: &str = "input-rekeyed";
pub const HIERARCHY_TOPIC: &str = "hierarchy";

#[derive(Debug, Error, PartialEq)]
pub enum UseCaseError {
    #[error("invalid use-case config: {0}")]
    InvalidConfig(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UseCaseId {
    Uc1,
    Uc2,
    Uc3,
    Uc4,
}

impl UseCaseId {
    pub const ALL: [UseCaseId; 4] = [
        UseCaseId::Uc1,
        UseCaseId::Uc2,
        UseCaseId::Uc3,
        UseCaseId::Uc4,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uc1" => Some(Self::Uc1),
            "uc2" => Some(Self::Uc2),
            "uc3" => Some(Self::Uc3),
            "uc4" => Some(Self::Uc4),
            _ => None,
        }
    }
}

impl fmt::Display for UseCaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Uc1 => "uc1",
            Self::Uc2 => "uc2",
            Self::Uc3 => "uc3",
            Self::Uc4 => "uc4",
        };
        f.write_str(s)
    }
}

/// Calendar attribute extracted from an event timestamp; rekeying on one
/// multiplies the key space by its cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeAttribute {
    HourOfDay,
    DayOfWeek,
    DayOfYear,
}

impl TimeAttribute {
    pub fn cardinality(self) -> u64 {
        match self {
            Self::HourOfDay => 24,
            Self::DayOfWeek => 7,
            Self::DayOfYear => 365,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hour_of_day" => Some(Self::HourOfDay),
            "day_of_week" => Some(Self::DayOfWeek),
            "day_of_year" => Some(Self::DayOfYear),
            _ => None,
        }
    }
}

impl fmt::Display for TimeAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::HourOfDay => "hour_of_day",
            Self::DayOfWeek => "day_of_week",
            Self::DayOfYear => "day_of_year",
        };
        f.write_str(s)
    }
}

/// Attribute value for an epoch-millisecond timestamp. Hour of day and day
/// of week are plain modular arithmetic (the epoch day has week index 0);
/// day of year is the 0-based ordinal of the UTC calendar date, so leap
/// days shift everything after February correctly.
pub fn time_attribute_value(attribute: TimeAttribute, event_time_ms: u64) -> u64 {
    match attribute {
        TimeAttribute::HourOfDay => (event_time_ms / 3_600_000) % 24,
        TimeAttribute::DayOfWeek => (event_time_ms / 86_400_000) % 7,
        TimeAttribute::DayOfYear => {
            use chrono::Datelike;
            let dt = chrono::DateTime::from_timestamp_millis(event_time_ms as i64)
                .expect("u64 milliseconds are in range");
            u64::from(dt.ordinal0())
        }
    }
}

/// Shape of a complete sensor hierarchy: every group has `fanout` children,
/// nested `depth` levels deep; the bottom level consists of leaf sensors,
/// so there are `fanout^depth` leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HierarchySpec {
    pub fanout: u32,
    pub depth: u32,
}

impl HierarchySpec {
    pub fn new(fanout: u32, depth: u32) -> Self {
        assert!(
            fanout >= 1 && depth >= 1,
            "hierarchy needs fanout >= 1 and depth >= 1"
        );
        Self { fanout, depth }
    }

    pub fn leaf_count(&self) -> u64 {
        u64::from(self.fanout).pow(self.depth)
    }

    /// Number of aggregation groups (internal nodes): fanout 4, depth 2
    /// gives 4 child groups plus the root, 5 in total.
    pub fn group_count(&self) -> u64 {
        (0..self.depth).map(|l| u64::from(self.fanout).pow(l)).sum()
    }
}

/// Materialized hierarchy: deterministic node names, parent edges and group
/// heights. The root is `"g"`, children append `.<index>`; nodes at the
/// deepest level are the leaf sensors.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub spec: HierarchySpec,
    leaves: Vec<Arc<str>>,
    groups: Vec<Arc<str>>,
    parent: BTreeMap<Arc<str>, Arc<str>>,
    height: BTreeMap<Arc<str>, u32>,
}

impl Hierarchy {
    pub fn build(spec: &HierarchySpec) -> Self {
        let mut parent = BTreeMap::new();
        let mut height = BTreeMap::new();
        let mut groups = Vec::new();
        let root: Arc<str> = "g".into();
        let mut level: Vec<Arc<str>> = vec![root];
        for depth_done in 0..spec.depth {
            for node in &level {
                groups.push(node.clone());
                height.insert(node.clone(), spec.depth - depth_done);
            }
            let mut next = Vec::with_capacity(level.len() * spec.fanout as usize);
            for node in &level {
                for c in 0..spec.fanout {
                    let child: Arc<str> = format!("{node}.{c}").into();
                    parent.insert(child.clone(), node.clone());
                    next.push(child);
                }
            }
            level = next;
        }
        Self {
            spec: *spec,
            leaves: level,
            groups,
            parent,
            height,
        }
    }

    pub fn leaves(&self) -> &[Arc<str>] {
        &self.leaves
    }

    pub fn groups(&self) -> &[Arc<str>] {
        &self.groups
    }

    pub fn parent_of(&self, node: &str) -> Option<&Arc<str>> {
        self.parent.get(node)
    }

    /// Levels between a group and the leaves: leaf parents have height 1,
    /// the root has height `depth`. Leaves themselves are not groups.
    pub fn height_of(&self, group: &str) -> Option<u32> {
        self.height.get(group).copied()
    }
}

/// Per-use-case configuration. `num_keys` and `rate_per_key_hz` describe
/// the input load every use case receives; the optional fields apply only
/// where the dataflow has the matching stage and must be absent elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct UseCaseConfig {
    pub num_keys: u64,
    pub rate_per_key_hz: f64,
    pub window: Option<WindowSpec>,
    pub time_attribute: Option<TimeAttribute>,
    pub window_kind: Option<WindowKind>,
    pub hierarchy: Option<HierarchySpec>,
}

impl Default for UseCaseConfig {
    fn default() -> Self {
        Self {
            num_keys: 100,
            rate_per_key_hz: 1.0,
            window: None,
            time_attribute: None,
            window_kind: None,
            hierarchy: None,
        }
    }
}

fn reject_fields(
    id: UseCaseId,
    cfg: &UseCaseConfig,
    window: bool,
    attribute: bool,
    kind: bool,
    hierarchy: bool,
) -> Result<(), UseCaseError> {
    let mut stray = Vec::new();
    if !window && cfg.window.is_some() {
        stray.push("window");
    }
    if !attribute && cfg.time_attribute.is_some() {
        stray.push("time_attribute");
    }
    if !kind && cfg.window_kind.is_some() {
        stray.push("window_kind");
    }
    if !hierarchy && cfg.hierarchy.is_some() {
        stray.push("hierarchy");
    }
    if stray.is_empty() {
        Ok(())
    } else {
        Err(UseCaseError::InvalidConfig(format!(
            "{id} does not use: {}",
            stray.join(", ")
        )))
    }
}

/// Instantiates the topology for a use case. Emission mode defaults to
/// intermediate forwarding; callers flip
/// [`Topology::emit_on_close_only`] for exactly-once-per-window output.
pub fn build_topology(id: UseCaseId, cfg: &UseCaseConfig) -> Result<Topology, UseCaseError> {
    if cfg.num_keys == 0 {
        return Err(UseCaseError::InvalidConfig("num_keys must be >= 1".into()));
    }
    if cfg.rate_per_key_hz <= 0.0 || !cfg.rate_per_key_hz.is_finite() {
        return Err(UseCaseError::InvalidConfig(
            "rate_per_key_hz must be positive and finite".into(),
        ));
    }
    let need_window = |cfg: &UseCaseConfig| {
        cfg.window
            .ok_or_else(|| UseCaseError::InvalidConfig(format!("{id} needs a window")))
    };
    let stages = match id {
        UseCaseId::Uc1 => {
            reject_fields(id, cfg, false, false, false, false)?;
            vec![Stage::MapFormatConvert, Stage::NullSink]
        }
        UseCaseId::Uc2 => {
            reject_fields(id, cfg, true, false, false, false)?;
            let window = need_window(cfg)?;
            if !window.is_tumbling() {
                return Err(UseCaseError::InvalidConfig(
                    "uc2 windows are tumbling: advance must equal size".into(),
                ));
            }
            vec![
                Stage::TumblingAggregate { window },
                Stage::SinkTopic {
                    topic: OUTPUT_TOPIC.into(),
                },
            ]
        }
        UseCaseId::Uc3 => {
            reject_fields(id, cfg, true, true, false, false)?;
            let window = need_window(cfg)?;
            let attribute = cfg
                .time_attribute
                .ok_or_else(|| UseCaseError::InvalidConfig("uc3 needs a time_attribute".into()))?;
            vec![
                Stage::RekeyTimeAttribute {
                    attribute,
                    via_topic: REKEY_TOPIC.into(),
                },
                Stage::HoppingAggregate { window },
                Stage::SinkTopic {
                    topic: OUTPUT_TOPIC.into(),
                },
            ]
        }
        UseCaseId::Uc4 => {
            reject_fields(id, cfg, true, false, true, true)?;
            let window = need_window(cfg)?;
            let kind = cfg
                .window_kind
                .ok_or_else(|| UseCaseError::InvalidConfig("uc4 needs a window_kind".into()))?;
            if cfg.hierarchy.is_none() {
                return Err(UseCaseError::InvalidConfig("uc4 needs a hierarchy".into()));
            }
            let aggregate = match kind {
                WindowKind::Tumbling => {
                    if !window.is_tumbling() {
                        return Err(UseCaseError::InvalidConfig(
                            "tumbling windows need advance == size".into(),
                        ));
                    }
                    Stage::TumblingAggregate { window }
                }
                WindowKind::Hopping => Stage::HoppingAggregate { window },
            };
            vec![
                Stage::JoinHierarchy {
                    topic: HIERARCHY_TOPIC.into(),
                },
                Stage::RouteToParentGroup,
                aggregate,
                Stage::SinkTopic {
                    topic: OUTPUT_TOPIC.into(),
                },
                Stage::Feedback {
                    topic: OUTPUT_TOPIC.into(),
                },
            ]
        }
    };
    Ok(Topology {
        source: INPUT_TOPIC.into(),
        stages,
        emit_on_close_only: false,
    })
}

/// Number of distinct output keys the sink will eventually observe.
pub fn output_key_cardinality(id: UseCaseId, cfg: &UseCaseConfig) -> Result<u64, UseCaseError> {
    match id {
        UseCaseId::Uc1 => Err(UseCaseError::NotApplicable(
            "uc1 writes raw records, not keyed aggregates".into(),
        )),
        UseCaseId::Uc2 => Ok(cfg.num_keys),
        UseCaseId::Uc3 => {
            let attribute = cfg
                .time_attribute
                .ok_or_else(|| UseCaseError::InvalidConfig("uc3 needs a time_attribute".into()))?;
            Ok(cfg.num_keys * attribute.cardinality())
        }
        UseCaseId::Uc4 => {
            let hierarchy = cfg
                .hierarchy
                .ok_or_else(|| UseCaseError::InvalidConfig("uc4 needs a hierarchy".into()))?;
            Ok(hierarchy.group_count())
        }
    }
}

/// Sink record count over a run, when it is determined by the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedOutput {
    Count(u64),
    /// Intermediate forwarding emits refinements at every commit tick; the
    /// total depends on runtime interleaving, not only on the config.
    Unbounded,
}

/// Expected sink record count for a run of `duration_ms`.
///
/// Only defined (`Count`) with close-only emission. Teardown flushes
/// still-open windows, so a window counts as soon as the run touches its
/// span; the formulas assume every output key receives at least one record
/// in every touched span.
pub fn expected_output_count(
    id: UseCaseId,
    cfg: &UseCaseConfig,
    duration_ms: u64,
    emit_on_close_only: bool,
) -> Result<ExpectedOutput, UseCaseError> {
    if !emit_on_close_only {
        return Ok(ExpectedOutput::Unbounded);
    }
    let count = match id {
        UseCaseId::Uc1 => {
            crate::workload::schedule_count(cfg.rate_per_key_hz * cfg.num_keys as f64, duration_ms)
        }
        UseCaseId::Uc2 => {
            let window = cfg
                .window
                .ok_or_else(|| UseCaseError::InvalidConfig("uc2 needs a window".into()))?;
            cfg.num_keys * duration_ms.div_ceil(window.size_ms)
        }
        UseCaseId::Uc3 => {
            let window = cfg
                .window
                .ok_or_else(|| UseCaseError::InvalidConfig("uc3 needs a window".into()))?;
            output_key_cardinality(id, cfg)? * duration_ms.div_ceil(window.advance_ms)
        }
        UseCaseId::Uc4 => {
            let window = cfg
                .window
                .ok_or_else(|| UseCaseError::InvalidConfig("uc4 needs a window".into()))?;
            let windows = match cfg.window_kind {
                Some(WindowKind::Hopping) => duration_ms.div_ceil(window.advance_ms),
                _ => duration_ms.div_ceil(window.size_ms),
            };
            output_key_cardinality(id, cfg)? * windows
        }
    };
    Ok(ExpectedOutput::Count(count))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOUR: u64 = 3_600_000;
    const DAY: u64 = 86_400_000;

    fn uc2_cfg() -> UseCaseConfig {
        UseCaseConfig {
            window: Some(WindowSpec::tumbling(60_000)),
            ..Default::default()
        }
    }

    fn uc3_cfg() -> UseCaseConfig {
        UseCaseConfig {
            num_keys: 20,
            window: Some(WindowSpec::new(3 * DAY, DAY)),
            time_attribute: Some(TimeAttribute::HourOfDay),
            ..Default::default()
        }
    }

    fn uc4_cfg() -> UseCaseConfig {
        UseCaseConfig {
            window: Some(WindowSpec::tumbling(60_000)),
            window_kind: Some(WindowKind::Tumbling),
            hierarchy: Some(HierarchySpec::new(4, 2)),
            ..Default::default()
        }
    }

    #[test]
    fn hour_of_day_wraps_across_days() {
        assert_eq!(time_attribute_value(TimeAttribute::HourOfDay, 0), 0);
        assert_eq!(time_attribute_value(TimeAttribute::HourOfDay, HOUR - 1), 0);
        assert_eq!(time_attribute_value(TimeAttribute::HourOfDay, 25 * HOUR), 1);
        assert_eq!(
            time_attribute_value(TimeAttribute::HourOfDay, 23 * HOUR + 59),
            23
        );
    }

    #[test]
    fn day_of_week_counts_from_epoch_day() {
        assert_eq!(time_attribute_value(TimeAttribute::DayOfWeek, 0), 0);
        assert_eq!(time_attribute_value(TimeAttribute::DayOfWeek, DAY - 1), 0);
        assert_eq!(time_attribute_value(TimeAttribute::DayOfWeek, 3 * DAY), 3);
        assert_eq!(time_attribute_value(TimeAttribute::DayOfWeek, 7 * DAY), 0);
    }

    #[test]
    fn day_of_year_accounts_for_leap_days() {
        // 1972 is a leap year. Day counts from 1970-01-01.
        let feb29_1972 = (365 + 365 + 31 + 28) * DAY;
        let mar01_1972 = feb29_1972 + DAY;
        let mar01_1971 = (365 + 31 + 28) * DAY;
        assert_eq!(time_attribute_value(TimeAttribute::DayOfYear, 0), 0);
        assert_eq!(
            time_attribute_value(TimeAttribute::DayOfYear, feb29_1972),
            59
        );
        assert_eq!(
            time_attribute_value(TimeAttribute::DayOfYear, mar01_1972),
            60
        );
        assert_eq!(
            time_attribute_value(TimeAttribute::DayOfYear, mar01_1971),
            59
        );
    }

    #[test]
    fn hierarchy_fanout4_depth2() {
        let h = Hierarchy::build(&HierarchySpec::new(4, 2));
        assert_eq!(h.leaves().len(), 16);
        assert_eq!(h.groups().len(), 5);
        assert_eq!(h.spec.group_count(), 5);
        assert_eq!(h.height_of("g"), Some(2));
        assert_eq!(h.height_of("g.0"), Some(1));
        assert_eq!(h.height_of("g.0.0"), None);
        assert_eq!(h.parent_of("g.2.3").map(|p| &**p), Some("g.2"));
        assert_eq!(h.parent_of("g.2").map(|p| &**p), Some("g"));
        assert_eq!(h.parent_of("g"), None);
        // All leaves are distinct and parented by a group.
        for leaf in h.leaves() {
            assert!(h.parent_of(leaf).is_some());
            assert!(h.height_of(leaf).is_none());
        }
    }

    #[test]
    fn hierarchy_fanout1_depth3_is_a_chain() {
        let h = Hierarchy::build(&HierarchySpec::new(1, 3));
        assert_eq!(h.leaves().len(), 1);
        assert_eq!(h.groups().len(), 3);
        assert_eq!(h.spec.group_count(), 3);
        assert_eq!(h.height_of("g"), Some(3));
        assert_eq!(h.height_of("g.0.0"), Some(1));
    }

    #[test]
    fn topology_characteristics_per_use_case() {
        let uc1 = build_topology(UseCaseId::Uc1, &UseCaseConfig::default()).unwrap();
        assert!(uc1.has_stateless_op());
        assert!(!uc1.has_tumbling_window() && !uc1.has_sliding_window());
        assert!(!uc1.has_join() && !uc1.has_feedback());
        assert!(uc1.sink_topic().is_none());

        let uc2 = build_topology(UseCaseId::Uc2, &uc2_cfg()).unwrap();
        assert!(uc2.has_tumbling_window());
        assert!(!uc2.has_sliding_window() && !uc2.has_join() && !uc2.has_feedback());

        let uc3 = build_topology(UseCaseId::Uc3, &uc3_cfg()).unwrap();
        assert!(uc3.has_sliding_window() && uc3.has_stateless_op());
        assert!(!uc3.has_tumbling_window() && !uc3.has_join() && !uc3.has_feedback());
        assert_eq!(uc3.consumed_topics(), vec![INPUT_TOPIC, REKEY_TOPIC]);

        let uc4 = build_topology(UseCaseId::Uc4, &uc4_cfg()).unwrap();
        assert!(uc4.has_join() && uc4.has_feedback() && uc4.has_tumbling_window());
        assert_eq!(uc4.broadcast_topic(), Some(HIERARCHY_TOPIC));
        assert_eq!(uc4.consumed_topics(), vec![INPUT_TOPIC, OUTPUT_TOPIC]);

        let hopping4 = build_topology(
            UseCaseId::Uc4,
            &UseCaseConfig {
                window: Some(WindowSpec::new(120_000, 60_000)),
                window_kind: Some(WindowKind::Hopping),
                ..uc4_cfg()
            },
        )
        .unwrap();
        assert!(hopping4.has_sliding_window() && !hopping4.has_tumbling_window());
    }

    #[test]
    fn stray_and_missing_fields_are_rejected() {
        let with_window = UseCaseConfig {
            window: Some(WindowSpec::tumbling(1000)),
            ..Default::default()
        };
        assert!(matches!(
            build_topology(UseCaseId::Uc1, &with_window),
            Err(UseCaseError::InvalidConfig(_))
        ));
        assert!(matches!(
            build_topology(UseCaseId::Uc2, &UseCaseConfig::default()),
            Err(UseCaseError::InvalidConfig(_))
        ));
        let sliding2 = UseCaseConfig {
            window: Some(WindowSpec::new(2000, 1000)),
            ..Default::default()
        };
        assert!(matches!(
            build_topology(UseCaseId::Uc2, &sliding2),
            Err(UseCaseError::InvalidConfig(_))
        ));
        assert!(matches!(
            build_topology(UseCaseId::Uc3, &uc2_cfg()),
            Err(UseCaseError::InvalidConfig(_))
        ));
        let no_hierarchy = UseCaseConfig {
            hierarchy: None,
            ..uc4_cfg()
        };
        assert!(matches!(
            build_topology(UseCaseId::Uc4, &no_hierarchy),
            Err(UseCaseError::InvalidConfig(_))
        ));
    }

    #[test]
    fn output_cardinality_20_sensors_hourly_is_480() {
        assert_eq!(
            output_key_cardinality(UseCaseId::Uc3, &uc3_cfg()).unwrap(),
            480
        );
        assert_eq!(
            output_key_cardinality(
                UseCaseId::Uc2,
                &UseCaseConfig {
                    num_keys: 77,
                    ..uc2_cfg()
                }
            )
            .unwrap(),
            77
        );
        assert_eq!(
            output_key_cardinality(UseCaseId::Uc4, &uc4_cfg()).unwrap(),
            5
        );
        assert!(matches!(
            output_key_cardinality(UseCaseId::Uc1, &UseCaseConfig::default()),
            Err(UseCaseError::NotApplicable(_))
        ));
    }

    #[test]
    fn expected_output_counts() {
        // 100 keys, 5 tumbling minutes of 1-minute windows.
        assert_eq!(
            expected_output_count(UseCaseId::Uc2, &uc2_cfg(), 300_000, true).unwrap(),
            ExpectedOutput::Count(500)
        );
        assert_eq!(
            expected_output_count(UseCaseId::Uc2, &uc2_cfg(), 300_000, false).unwrap(),
            ExpectedOutput::Unbounded
        );
        // UC1 passes every input through.
        let uc1 = UseCaseConfig {
            num_keys: 50,
            ..Default::default()
        };
        assert_eq!(
            expected_output_count(UseCaseId::Uc1, &uc1, 10_000, true).unwrap(),
            ExpectedOutput::Count(500)
        );
        // UC3 over 3 days with 1-day hops: 3 windows per output key.
        assert_eq!(
            expected_output_count(UseCaseId::Uc3, &uc3_cfg(), 3 * DAY, true).unwrap(),
            ExpectedOutput::Count(480 * 3)
        );
        // UC4: 5 groups, 5 windows.
        assert_eq!(
            expected_output_count(UseCaseId::Uc4, &uc4_cfg(), 300_000, true).unwrap(),
            ExpectedOutput::Count(25)
        );
    }
}
