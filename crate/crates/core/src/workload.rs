//! Deterministic constant-rate load generation.
//!
//! A benchmark varies exactly one workload dimension; the other parameters
//! come from the base use-case config. Emission is a pure schedule over a
//! global index `j`: record `j` carries key `j mod n` at event time
//! `floor(j * 1000 / aggregate_hz)`, which staggers key `i` by
//! `i * period / n` and keeps the aggregate rate constant at sub-second
//! granularity. Values are pseudo-random but quantized to multiples of
//! 2^-20, so f64 sums over any subset are exact and order-independent,
//! which the aggregation oracles rely on.

use std::sync::Arc;

use thiserror::Error;

use crate::broker::{Message, Payload};
use crate::engine::{Source, WindowKind, WindowSpec};
use crate::usecases::{Hierarchy, HierarchySpec, TimeAttribute, UseCaseConfig, UseCaseId};

/// Largest hierarchy the generator will materialize.
const MAX_LEAVES: u64 = 10_000_000;

/// Value granularity: 2^20 steps per unit keeps sums of up to ~8e7 samples
/// exactly representable in f64.
const VALUE_DENOM: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("dimension {dimension} does not apply to {id}{reason}")]
    DimensionNotApplicable {
        dimension: WorkloadDimension,
        id: UseCaseId,
        reason: String,
    },
    #[error("invalid workload point: {0}")]
    InvalidPoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkloadDimension {
    /// Messages per second and key.
    MessageFrequency,
    /// Number of distinct keys (sensors); for UC4 the sensors form a flat
    /// single-group hierarchy.
    NumKeys,
    /// Window size in ms; the size/advance ratio of the base window is
    /// preserved.
    WindowSize,
    /// Number of overlapping windows, i.e. the size/advance ratio.
    OverlappingWindows,
    /// Cardinality of the rekeying time attribute (7, 24 or 365).
    AttributeCardinality,
    /// Elements per hierarchy group.
    GroupFanout,
    /// Nesting depth of hierarchy groups.
    NestingDepth,
}

impl WorkloadDimension {
    pub const ALL: [WorkloadDimension; 7] = [
        WorkloadDimension::MessageFrequency,
        WorkloadDimension::NumKeys,
        WorkloadDimension::WindowSize,
        WorkloadDimension::OverlappingWindows,
        WorkloadDimension::AttributeCardinality,
        WorkloadDimension::GroupFanout,
        WorkloadDimension::NestingDepth,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "message_frequency" => Some(Self::MessageFrequency),
            "num_keys" => Some(Self::NumKeys),
            "window_size" => Some(Self::WindowSize),
            "overlapping_windows" => Some(Self::OverlappingWindows),
            "attribute_cardinality" => Some(Self::AttributeCardinality),
            "group_fanout" => Some(Self::GroupFanout),
            "nesting_depth" => Some(Self::NestingDepth),
            _ => None,
        }
    }
}

impl std::fmt::Display for WorkloadDimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::MessageFrequency => "message_frequency",
            Self::NumKeys => "num_keys",
            Self::WindowSize => "window_size",
            Self::OverlappingWindows => "overlapping_windows",
            Self::AttributeCardinality => "attribute_cardinality",
            Self::GroupFanout => "group_fanout",
            Self::NestingDepth => "nesting_depth",
        };
        f.write_str(s)
    }
}

/// Whether a dimension can drive a benchmark of the given use case.
/// Overlapping windows additionally require a hopping configuration for
/// UC4; `make_generator` enforces that part.
pub fn applicable(dimension: WorkloadDimension, id: UseCaseId) -> bool {
    use WorkloadDimension::*;
    match dimension {
        MessageFrequency | NumKeys => true,
        WindowSize => id != UseCaseId::Uc1,
        OverlappingWindows => matches!(id, UseCaseId::Uc3 | UseCaseId::Uc4),
        AttributeCardinality => id == UseCaseId::Uc3,
        GroupFanout | NestingDepth => id == UseCaseId::Uc4,
    }
}

/// One magnitude along one dimension. Units are dimension-specific:
/// Hz per key, key count, ms, window count, attribute value count, fanout
/// or depth. All but `message_frequency` take positive integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadPoint {
    pub dimension: WorkloadDimension,
    pub magnitude: f64,
}

impl WorkloadPoint {
    pub fn new(dimension: WorkloadDimension, magnitude: f64) -> Self {
        Self {
            dimension,
            magnitude,
        }
    }

    fn as_count(&self) -> Result<u64, WorkloadError> {
        if self.magnitude >= 1.0 && self.magnitude.fract() == 0.0 && self.magnitude < 2e18 {
            Ok(self.magnitude as u64)
        } else {
            Err(WorkloadError::InvalidPoint(format!(
                "{} takes a positive integer, got {}",
                self.dimension, self.magnitude
            )))
        }
    }
}

fn checked_hierarchy(fanout: u64, depth: u64) -> Result<HierarchySpec, WorkloadError> {
    let fanout32 = u32::try_from(fanout)
        .map_err(|_| WorkloadError::InvalidPoint(format!("fanout {fanout} is too large")))?;
    let depth32 = u32::try_from(depth)
        .map_err(|_| WorkloadError::InvalidPoint(format!("depth {depth} is too large")))?;
    let leaves = fanout.checked_pow(depth32);
    match leaves {
        Some(n) if n <= MAX_LEAVES => Ok(HierarchySpec::new(fanout32, depth32)),
        _ => Err(WorkloadError::InvalidPoint(format!(
            "hierarchy fanout {fanout} depth {depth} exceeds {MAX_LEAVES} leaves"
        ))),
    }
}

/// Builds the generator for one subexperiment and the use-case config it
/// implies. Dimensions that are config parameters (window size, overlap,
/// attribute cardinality, fanout, depth) adjust the returned config; the
/// caller builds the topology from it.
pub fn make_generator(
    id: UseCaseId,
    point: WorkloadPoint,
    base_cfg: &UseCaseConfig,
    seed: u64,
) -> Result<(Generator, UseCaseConfig), WorkloadError> {
    use WorkloadDimension::*;
    if !applicable(point.dimension, id) {
        return Err(WorkloadError::DimensionNotApplicable {
            dimension: point.dimension,
            id,
            reason: String::new(),
        });
    }
    let mut cfg = base_cfg.clone();
    let base_window = |cfg: &UseCaseConfig| {
        cfg.window.ok_or_else(|| {
            WorkloadError::InvalidPoint(format!(
                "{} needs a base window in the use-case config",
                point.dimension
            ))
        })
    };
    match point.dimension {
        MessageFrequency => {
            if point.magnitude <= 0.0 || !point.magnitude.is_finite() {
                return Err(WorkloadError::InvalidPoint(format!(
                    "message_frequency must be a positive rate, got {}",
                    point.magnitude
                )));
            }
            cfg.rate_per_key_hz = point.magnitude;
        }
        NumKeys => {
            let n = point.as_count()?;
            cfg.num_keys = n;
            if id == UseCaseId::Uc4 {
                // Scaling key count for the hierarchy case means a flat
                // hierarchy: one group of n sensors.
                cfg.hierarchy = Some(checked_hierarchy(n, 1)?);
            }
        }
        WindowSize => {
            let size = point.as_count()?;
            let base = base_window(&cfg)?;
            let overlap = (base.size_ms / base.advance_ms).max(1);
            cfg.window = Some(WindowSpec::new(size, (size / overlap).max(1)));
        }
        OverlappingWindows => {
            if id == UseCaseId::Uc4 && cfg.window_kind != Some(WindowKind::Hopping) {
                return Err(WorkloadError::DimensionNotApplicable {
                    dimension: point.dimension,
                    id,
                    reason: " with tumbling windows".into(),
                });
            }
            let k = point.as_count()?;
            let base = base_window(&cfg)?;
            cfg.window = Some(WindowSpec::new(base.size_ms, (base.size_ms / k).max(1)));
        }
        AttributeCardinality => {
            cfg.time_attribute = Some(match point.as_count()? {
                7 => TimeAttribute::DayOfWeek,
                24 => TimeAttribute::HourOfDay,
                365 => TimeAttribute::DayOfYear,
                other => {
                    return Err(WorkloadError::InvalidPoint(format!(
                        "no time attribute has {other} values; available: 7, 24, 365"
                    )))
                }
            });
        }
        GroupFanout => {
            let fanout = point.as_count()?;
            let base = cfg.hierarchy.ok_or_else(|| {
                WorkloadError::InvalidPoint("group_fanout needs a base hierarchy".into())
            })?;
            cfg.hierarchy = Some(checked_hierarchy(fanout, u64::from(base.depth))?);
        }
        NestingDepth => {
            let depth = point.as_count()?;
            let base = cfg.hierarchy.ok_or_else(|| {
                WorkloadError::InvalidPoint("nesting_depth needs a base hierarchy".into())
            })?;
            cfg.hierarchy = Some(checked_hierarchy(u64::from(base.fanout), depth)?);
        }
    }
    let keys: Vec<Arc<str>> = if id == UseCaseId::Uc4 {
        let spec = cfg.hierarchy.ok_or_else(|| {
            WorkloadError::InvalidPoint("uc4 needs a hierarchy in the use-case config".into())
        })?;
        let leaves = Hierarchy::build(&spec).leaves().to_vec();
        // Data is generated only for sensors present in the hierarchy.
        cfg.num_keys = leaves.len() as u64;
        leaves
    } else {
        (0..cfg.num_keys)
            .map(|i| Arc::from(format!("s{i}")))
            .collect()
    };
    if keys.is_empty() {
        return Err(WorkloadError::InvalidPoint("key universe is empty".into()));
    }
    let generator = Generator::new(seed, keys, cfg.rate_per_key_hz);
    Ok((generator, cfg))
}

/// The full-hierarchy control event, emitted once at time 0 on the
/// hierarchy stream.
pub fn build_hierarchy_events(spec: &HierarchySpec) -> Vec<Message> {
    vec![Message {
        key: "g".into(),
        event_time: 0,
        payload: Payload::HierarchyEvent(*spec),
    }]
}

/// std's SplitMix64; full 64-bit avalanche, identical on every platform.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Constant-rate emitter. State is just the next global index, so cloning
/// or replaying from a fresh instance with the same seed reproduces the
/// byte-identical sequence.
#[derive(Debug, Clone)]
pub struct Generator {
    seed: u64,
    keys: Vec<Arc<str>>,
    aggregate_hz: f64,
    next_index: u64,
}

impl Generator {
    pub fn new(seed: u64, keys: Vec<Arc<str>>, rate_per_key_hz: f64) -> Self {
        assert!(!keys.is_empty(), "generator needs at least one key");
        assert!(
            rate_per_key_hz > 0.0 && rate_per_key_hz.is_finite(),
            "rate must be positive"
        );
        let aggregate_hz = rate_per_key_hz * keys.len() as f64;
        Self {
            seed,
            keys,
            aggregate_hz,
            next_index: 0,
        }
    }

    pub fn aggregate_hz(&self) -> f64 {
        self.aggregate_hz
    }

    pub fn keys(&self) -> &[Arc<str>] {
        &self.keys
    }

    fn time_of(&self, index: u64) -> u64 {
        schedule_time(index, self.aggregate_hz)
    }

    fn value_of(&self, index: u64) -> f64 {
        let step =
            splitmix64(self.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)) % (100 * VALUE_DENOM);
        step as f64 / VALUE_DENOM as f64
    }

    fn message_at(&self, index: u64) -> Message {
        Message {
            key: self.keys[(index % self.keys.len() as u64) as usize].clone(),
            event_time: self.time_of(index),
            payload: Payload::Measurement(self.value_of(index)),
        }
    }

    /// Emits every scheduled record with `event_time < until`; returns how
    /// many were emitted.
    pub fn emit_until(&mut self, until: u64, out: &mut dyn FnMut(Message)) -> u64 {
        let start = self.next_index;
        while self.time_of(self.next_index) < until {
            out(self.message_at(self.next_index));
            self.next_index += 1;
        }
        self.next_index - start
    }
}

impl Source for Generator {
    fn peek_next_time(&self) -> Option<u64> {
        Some(self.time_of(self.next_index))
    }

    fn emit_until(&mut self, until: u64, out: &mut dyn FnMut(Message)) {
        Generator::emit_until(self, until, out);
    }
}

fn schedule_time(index: u64, aggregate_hz: f64) -> u64 {
    ((index as f64) * 1000.0 / aggregate_hz).floor() as u64
}

/// Number of schedule slots with event time in `[0, duration_ms)`, i.e.
/// how many records a generator at this aggregate rate emits over the run.
pub fn schedule_count(aggregate_hz: f64, duration_ms: u64) -> u64 {
    let mut n = (duration_ms as f64 * aggregate_hz / 1000.0).floor() as u64;
    // The estimate can be off by one either way at representation
    // boundaries; settle it against the actual schedule.
    while schedule_time(n, aggregate_hz) < duration_ms {
        n += 1;
    }
    while n > 0 && schedule_time(n - 1, aggregate_hz) >= duration_ms {
        n -= 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::WindowSpec;

    fn log_of(generator: &mut Generator, until: u64) -> Vec<(Arc<str>, u64, u64)> {
        let mut log = Vec::new();
        generator.emit_until(until, &mut |m| {
            let Payload::Measurement(v) = m.payload else {
                panic!("generator emits measurements")
            };
            log.push((m.key, m.event_time, v.to_bits()));
        });
        log
    }

    fn sensor_keys(n: u64) -> Vec<Arc<str>> {
        (0..n).map(|i| Arc::from(format!("s{i}"))).collect()
    }

    #[test]
    fn applicability_matrix() {
        use UseCaseId::*;
        use WorkloadDimension::*;
        let expected = [
            (MessageFrequency, [true, true, true, true]),
            (NumKeys, [true, true, true, true]),
            (WindowSize, [false, true, true, true]),
            (OverlappingWindows, [false, false, true, true]),
            (AttributeCardinality, [false, false, true, false]),
            (GroupFanout, [false, false, false, true]),
            (NestingDepth, [false, false, false, true]),
        ];
        assert_eq!(expected.len(), WorkloadDimension::ALL.len());
        for (dimension, row) in expected {
            for (id, want) in [Uc1, Uc2, Uc3, Uc4].into_iter().zip(row) {
                assert_eq!(applicable(dimension, id), want, "{dimension} x {id}");
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        let mut a = Generator::new(42, sensor_keys(10), 3.0);
        let mut b = Generator::new(42, sensor_keys(10), 3.0);
        let log_a = log_of(&mut a, 20_000);
        assert_eq!(log_a, log_of(&mut b, 20_000));
        // Incremental emission covers the same schedule.
        let mut c = Generator::new(42, sensor_keys(10), 3.0);
        let mut log_c = log_of(&mut c, 7_321);
        log_c.extend(log_of(&mut c, 20_000));
        assert_eq!(log_a, log_c);
        // A different seed changes values but not the schedule.
        let mut d = Generator::new(43, sensor_keys(10), 3.0);
        let log_d = log_of(&mut d, 20_000);
        assert_ne!(log_a, log_d);
        let times = |log: &[(Arc<str>, u64, u64)]| log.iter().map(|e| e.1).collect::<Vec<_>>();
        assert_eq!(times(&log_a), times(&log_d));
    }

    #[test]
    fn emission_counts_match_the_schedule() {
        // 10 keys at 1 Hz for 60 s.
        let mut g = Generator::new(1, sensor_keys(10), 1.0);
        assert_eq!(g.emit_until(60_000, &mut |_| {}), 600);
        assert_eq!(g.emit_until(60_000, &mut |_| {}), 0);
        assert_eq!(schedule_count(10.0, 60_000), 600);
        assert_eq!(schedule_count(50.0, 10_000), 500);
        // Fractional per-key rates still hit the exact aggregate count.
        assert_eq!(schedule_count(0.25 * 8.0, 100_000), 200);
    }

    #[test]
    fn schedule_count_matches_emission_for_awkward_rates() {
        for (i, hz) in [0.3, 1.0, 2.5, 3.0, 7.77, 12.0, 999.0, 1234.5]
            .into_iter()
            .enumerate()
        {
            let mut g = Generator::new(i as u64, sensor_keys(3), hz / 3.0);
            // Match aggregate rates exactly: construct with the same product.
            g.aggregate_hz = hz;
            let duration = 10_000 + 777 * i as u64;
            let emitted = g.emit_until(duration, &mut |m| assert!(m.event_time < duration));
            assert_eq!(emitted, schedule_count(hz, duration), "hz {hz}");
        }
    }

    #[test]
    fn aggregate_rate_is_constant_over_ten_second_windows() {
        let mut g = Generator::new(7, sensor_keys(128), 100.0);
        let mut counts = vec![0u64; 6];
        g.emit_until(60_000, &mut |m| {
            counts[(m.event_time / 10_000) as usize] += 1
        });
        for count in counts {
            let expected = 128_000.0;
            assert!(
                (count as f64 - expected).abs() / expected < 0.001,
                "10 s window held {count} records"
            );
        }
    }

    #[test]
    fn keys_are_staggered_across_the_period() {
        // 4 keys at 1 Hz: period 1000 ms, so key i first fires at i*250.
        let mut g = Generator::new(0, sensor_keys(4), 1.0);
        let log = log_of(&mut g, 2_000);
        assert_eq!(log.len(), 8);
        for (i, (key, time, _)) in log.iter().take(4).enumerate() {
            assert_eq!(&**key, format!("s{i}"));
            assert_eq!(*time, 250 * i as u64);
        }
        assert_eq!(log[4].1, 1_000);
    }

    #[test]
    fn values_are_dyadic_and_in_range() {
        let mut g = Generator::new(99, sensor_keys(5), 50.0);
        let mut seen_distinct = std::collections::HashSet::new();
        g.emit_until(20_000, &mut |m| {
            let v = m.measurement_value().unwrap();
            assert!((0.0..100.0).contains(&v));
            let scaled = v * VALUE_DENOM as f64;
            assert_eq!(scaled, scaled.trunc(), "value {v} is not a 2^-20 multiple");
            seen_distinct.insert(v.to_bits());
        });
        assert!(seen_distinct.len() > 900);
    }

    #[test]
    fn uc4_emits_only_hierarchy_leaves() {
        let base = UseCaseConfig {
            window: Some(WindowSpec::tumbling(60_000)),
            window_kind: Some(WindowKind::Tumbling),
            hierarchy: Some(HierarchySpec::new(4, 2)),
            ..Default::default()
        };
        let point = WorkloadPoint::new(WorkloadDimension::NestingDepth, 2.0);
        let (mut g, cfg) = make_generator(UseCaseId::Uc4, point, &base, 5).unwrap();
        assert_eq!(cfg.num_keys, 16);
        let hierarchy = Hierarchy::build(&cfg.hierarchy.unwrap());
        let leaves: std::collections::HashSet<_> =
            hierarchy.leaves().iter().map(|l| l.to_string()).collect();
        g.emit_until(30_000, &mut |m| {
            assert!(leaves.contains(&*m.key.to_string()))
        });
    }

    #[test]
    fn make_generator_adjusts_configs_per_dimension() {
        let uc3_base = UseCaseConfig {
            num_keys: 20,
            window: Some(WindowSpec::new(259_200_000, 86_400_000)),
            time_attribute: Some(TimeAttribute::HourOfDay),
            ..Default::default()
        };
        // message_frequency leaves everything but the rate alone.
        let (g, cfg) = make_generator(
            UseCaseId::Uc2,
            WorkloadPoint::new(WorkloadDimension::MessageFrequency, 2.5),
            &UseCaseConfig {
                window: Some(WindowSpec::tumbling(60_000)),
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(cfg.rate_per_key_hz, 2.5);
        assert_eq!(g.aggregate_hz(), 250.0);
        // num_keys: 1 msg/s per key means aggregate = magnitude.
        let (g, cfg) = make_generator(
            UseCaseId::Uc2,
            WorkloadPoint::new(WorkloadDimension::NumKeys, 1000.0),
            &UseCaseConfig {
                window: Some(WindowSpec::tumbling(60_000)),
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(cfg.num_keys, 1000);
        assert_eq!(g.aggregate_hz(), 1000.0);
        assert_eq!(g.keys().len(), 1000);
        // window_size preserves the size/advance ratio (3 here).
        let (_, cfg) = make_generator(
            UseCaseId::Uc3,
            WorkloadPoint::new(WorkloadDimension::WindowSize, 86_400_000.0),
            &uc3_base,
            0,
        )
        .unwrap();
        assert_eq!(cfg.window, Some(WindowSpec::new(86_400_000, 28_800_000)));
        // overlapping_windows resets the advance.
        let (_, cfg) = make_generator(
            UseCaseId::Uc3,
            WorkloadPoint::new(WorkloadDimension::OverlappingWindows, 4.0),
            &uc3_base,
            0,
        )
        .unwrap();
        assert_eq!(cfg.window, Some(WindowSpec::new(259_200_000, 64_800_000)));
        // attribute_cardinality maps counts onto attributes.
        for (count, attribute) in [
            (7.0, TimeAttribute::DayOfWeek),
            (24.0, TimeAttribute::HourOfDay),
            (365.0, TimeAttribute::DayOfYear),
        ] {
            let (_, cfg) = make_generator(
                UseCaseId::Uc3,
                WorkloadPoint::new(WorkloadDimension::AttributeCardinality, count),
                &uc3_base,
                0,
            )
            .unwrap();
            assert_eq!(cfg.time_attribute, Some(attribute));
        }
        // group_fanout / nesting_depth / num_keys rebuild the hierarchy.
        let uc4_base = UseCaseConfig {
            window: Some(WindowSpec::tumbling(60_000)),
            window_kind: Some(WindowKind::Tumbling),
            hierarchy: Some(HierarchySpec::new(4, 2)),
            ..Default::default()
        };
        let (_, cfg) = make_generator(
            UseCaseId::Uc4,
            WorkloadPoint::new(WorkloadDimension::GroupFanout, 3.0),
            &uc4_base,
            0,
        )
        .unwrap();
        assert_eq!(cfg.hierarchy, Some(HierarchySpec::new(3, 2)));
        assert_eq!(cfg.num_keys, 9);
        let (g, cfg) = make_generator(
            UseCaseId::Uc4,
            WorkloadPoint::new(WorkloadDimension::NumKeys, 12.0),
            &uc4_base,
            0,
        )
        .unwrap();
        assert_eq!(cfg.hierarchy, Some(HierarchySpec::new(12, 1)));
        assert_eq!(g.keys().len(), 12);
    }

    #[test]
    fn inapplicable_dimensions_are_rejected() {
        let err = make_generator(
            UseCaseId::Uc1,
            WorkloadPoint::new(WorkloadDimension::WindowSize, 60_000.0),
            &UseCaseConfig::default(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, WorkloadError::DimensionNotApplicable { .. }));
        // UC4 takes overlapping_windows only when configured as hopping.
        let tumbling4 = UseCaseConfig {
            window: Some(WindowSpec::tumbling(60_000)),
            window_kind: Some(WindowKind::Tumbling),
            hierarchy: Some(HierarchySpec::new(4, 2)),
            ..Default::default()
        };
        let err = make_generator(
            UseCaseId::Uc4,
            WorkloadPoint::new(WorkloadDimension::OverlappingWindows, 3.0),
            &tumbling4,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, WorkloadError::DimensionNotApplicable { .. }));
        let hopping4 = UseCaseConfig {
            window: Some(WindowSpec::new(120_000, 60_000)),
            window_kind: Some(WindowKind::Hopping),
            ..tumbling4
        };
        let (_, cfg) = make_generator(
            UseCaseId::Uc4,
            WorkloadPoint::new(WorkloadDimension::OverlappingWindows, 4.0),
            &hopping4,
            0,
        )
        .unwrap();
        assert_eq!(cfg.window, Some(WindowSpec::new(120_000, 30_000)));
    }

    #[test]
    fn bad_magnitudes_are_rejected() {
        for (dimension, magnitude) in [
            (WorkloadDimension::NumKeys, 2.5),
            (WorkloadDimension::NumKeys, 0.0),
            (WorkloadDimension::MessageFrequency, -1.0),
            (WorkloadDimension::MessageFrequency, f64::NAN),
        ] {
            let err = make_generator(
                UseCaseId::Uc1,
                WorkloadPoint::new(dimension, magnitude),
                &UseCaseConfig::default(),
                0,
            )
            .unwrap_err();
            assert!(
                matches!(err, WorkloadError::InvalidPoint(_)),
                "{dimension} {magnitude}"
            );
        }
        let err = make_generator(
            UseCaseId::Uc3,
            WorkloadPoint::new(WorkloadDimension::AttributeCardinality, 10.0),
            &UseCaseConfig {
                window: Some(WindowSpec::new(120_000, 60_000)),
                time_attribute: Some(TimeAttribute::HourOfDay),
                num_keys: 3,
                ..Default::default()
            },
            0,
        )
        .unwrap_err();
        assert!(matches!(err, WorkloadError::InvalidPoint(_)));
    }

    #[test]
    fn hierarchy_event_is_single_and_at_time_zero() {
        let events = build_hierarchy_events(&HierarchySpec::new(4, 2));
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].event_time, 0);
        assert!(matches!(
            events[0].payload,
            Payload::HierarchyEvent(spec) if spec == HierarchySpec::new(4, 2)
        ));
    }
}
