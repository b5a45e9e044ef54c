//! Experiment configuration: a flat key=value text format, its parser, and
//! the manifest renderer that writes the same format back out.
//!
//! Unknown and duplicate keys are errors; every key the parser accepts is
//! listed in [`ALL_KEYS`]. `#` starts a comment line. The manifest written
//! into a result directory contains every field, optional ones with an
//! empty value, and round-trips through [`parse_config`].

use std::collections::BTreeMap;

use thiserror::Error;

use crate::analysis::SufficiencyMethod;
use crate::engine::{ClockMode, WindowKind, WindowSpec};
use crate::usecases::{HierarchySpec, TimeAttribute, UseCaseConfig, UseCaseId};
use crate::workload::WorkloadDimension;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key: {0}")]
    UnknownKey(String),
    #[error("duplicate config key: {0}")]
    DuplicateKey(String),
    #[error("missing config key: {0}")]
    MissingKey(&'static str),
    #[error("bad value for {key}: {value:?} ({expected})")]
    BadValue {
        key: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Every key the config format accepts, in manifest order.
pub const ALL_KEYS: [&str; 28] = [
    "use_case",
    "dimension",
    "workloads",
    "instance_counts",
    "duration_ms",
    "warmup_ms",
    "sampling_interval_ms",
    "slope_threshold",
    "clock",
    "capacity_per_instance",
    "record_cost_ns",
    "commit_cost_records",
    "partition_overhead_rps",
    "commit_interval_ms",
    "partitions",
    "seed",
    "method",
    "emit_on_close_only",
    "output_tolerance",
    "latency_threshold",
    "num_keys",
    "rate_per_key_hz",
    "window_size_ms",
    "window_advance_ms",
    "time_attribute",
    "window_kind",
    "fanout",
    "depth",
];

/// Full description of one experiment: the grid, the lifecycle timing, the
/// cost model, the analysis defaults and the base use-case parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub use_case: UseCaseId,
    pub dimension: WorkloadDimension,
    /// Workload magnitudes, strictly ascending, in the dimension's unit.
    pub workloads: Vec<f64>,
    /// Instance counts to test per workload, strictly ascending.
    pub instance_counts: Vec<u32>,
    pub duration_ms: u64,
    pub warmup_ms: u64,
    pub sampling_interval_ms: u64,
    /// Lag growth (messages/second) up to which an instance count counts
    /// as sufficient.
    pub slope_threshold: f64,
    pub clock: ClockMode,
    /// Records per second one instance processes (simulated clock).
    pub capacity_per_instance: f64,
    /// Spin time per record in nanoseconds (wall clock).
    pub record_cost_ns: u64,
    /// Capacity charge, in records, per performed commit tick.
    pub commit_cost_records: f64,
    /// Throughput tax, records/s, per partition assigned to an instance.
    pub partition_overhead_rps: f64,
    pub commit_interval_ms: u64,
    pub partitions: u32,
    pub seed: u64,
    pub method: SufficiencyMethod,
    pub emit_on_close_only: bool,
    /// Accepted relative shortfall for the output-count method.
    pub output_tolerance: f64,
    /// Latency growth threshold (ms/s); required by the latency method.
    pub latency_threshold: Option<f64>,
    pub base: UseCaseConfig,
}

impl ExperimentConfig {
    /// Defaults: 5 min runs, 1 min warm-up, 5 s sampling, slope threshold
    /// 2,000 msg/s, 100 ms commits, 40 partitions.
    pub fn new(use_case: UseCaseId, dimension: WorkloadDimension) -> Self {
        Self {
            use_case,
            dimension,
            workloads: Vec::new(),
            instance_counts: Vec::new(),
            duration_ms: 300_000,
            warmup_ms: 60_000,
            sampling_interval_ms: 5_000,
            slope_threshold: 2_000.0,
            clock: ClockMode::Simulated,
            capacity_per_instance: 10_000.0,
            record_cost_ns: 0,
            commit_cost_records: 0.0,
            partition_overhead_rps: 0.0,
            commit_interval_ms: 100,
            partitions: 40,
            seed: 42,
            method: SufficiencyMethod::LagTrend,
            emit_on_close_only: false,
            output_tolerance: 0.01,
            latency_threshold: None,
            base: UseCaseConfig::default(),
        }
    }

    /// Structural validation; dimension applicability is checked by the
    /// runner, which owns that error type.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.workloads.is_empty() {
            return fail("workloads must not be empty".into());
        }
        if !self.workloads.windows(2).all(|w| w[0] < w[1]) {
            return fail("workloads must be strictly ascending".into());
        }
        if self.workloads.iter().any(|w| *w <= 0.0 || !w.is_finite()) {
            return fail("workloads must be positive and finite".into());
        }
        if self.instance_counts.is_empty() {
            return fail("instance_counts must not be empty".into());
        }
        if !self.instance_counts.windows(2).all(|w| w[0] < w[1]) {
            return fail("instance_counts must be strictly ascending".into());
        }
        if self.instance_counts[0] == 0 {
            return fail("instance counts must be >= 1".into());
        }
        if self.warmup_ms >= self.duration_ms {
            return fail(format!(
                "warmup_ms {} must be below duration_ms {}",
                self.warmup_ms, self.duration_ms
            ));
        }
        if self.sampling_interval_ms == 0 {
            return fail("sampling_interval_ms must be >= 1".into());
        }
        // At least 3 post-warm-up samples for the regression.
        let window = self.duration_ms - self.warmup_ms;
        if self.sampling_interval_ms > window / 3 {
            return fail(format!(
                "sampling_interval_ms {} leaves fewer than 3 samples after warm-up ({} ms window)",
                self.sampling_interval_ms, window
            ));
        }
        if self.commit_interval_ms == 0 {
            return fail("commit_interval_ms must be >= 1".into());
        }
        if self.partitions == 0 {
            return fail("partitions must be >= 1".into());
        }
        if self.capacity_per_instance <= 0.0 || !self.capacity_per_instance.is_finite() {
            return fail("capacity_per_instance must be positive".into());
        }
        if !self.slope_threshold.is_finite() {
            return fail("slope_threshold must be finite".into());
        }
        if self.commit_cost_records < 0.0 || self.partition_overhead_rps < 0.0 {
            return fail("cost model terms must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.output_tolerance) {
            return fail("output_tolerance must be in [0, 1)".into());
        }
        if self.method == SufficiencyMethod::LatencyTrend && self.latency_threshold.is_none() {
            return fail("the latency_trend method needs latency_threshold".into());
        }
        Ok(())
    }
}

fn split_lines(text: &str) -> Result<BTreeMap<&str, &str>, ConfigError> {
    let mut entries = BTreeMap::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Invalid(format!(
                "expected key=value, got {line:?}"
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if !ALL_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if entries.insert(key, value).is_some() {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
    }
    Ok(entries)
}

struct Reader<'a> {
    entries: BTreeMap<&'a str, &'a str>,
}

impl<'a> Reader<'a> {
    /// Non-empty value for `key`, if present.
    fn get(&self, key: &'static str) -> Option<&'a str> {
        self.entries.get(key).copied().filter(|v| !v.is_empty())
    }

    fn required(&self, key: &'static str) -> Result<&'a str, ConfigError> {
        self.get(key).ok_or(ConfigError::MissingKey(key))
    }

    fn parse<T: std::str::FromStr>(
        &self,
        key: &'static str,
        expected: &'static str,
    ) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|_| ConfigError::BadValue {
                    key,
                    value: v.to_string(),
                    expected,
                })
            })
            .transpose()
    }

    fn parse_or<T: std::str::FromStr>(
        &self,
        key: &'static str,
        expected: &'static str,
        default: T,
    ) -> Result<T, ConfigError> {
        Ok(self.parse(key, expected)?.unwrap_or(default))
    }

    fn parse_with<T>(
        &self,
        key: &'static str,
        expected: &'static str,
        f: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                f(v).ok_or(ConfigError::BadValue {
                    key,
                    value: v.to_string(),
                    expected,
                })
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(
        &self,
        key: &'static str,
        expected: &'static str,
    ) -> Result<Vec<T>, ConfigError> {
        let raw = self.required(key)?;
        raw.split(',')
            .map(|item| {
                item.trim().parse::<T>().map_err(|_| ConfigError::BadValue {
                    key,
                    value: raw.to_string(),
                    expected,
                })
            })
            .collect()
    }
}

fn parse_clock(s: &str) -> Option<ClockMode> {
    match s {
        "simulated" => Some(ClockMode::Simulated),
        "wall" => Some(ClockMode::Wall),
        _ => None,
    }
}

fn clock_str(clock: ClockMode) -> &'static str {
    match clock {
        ClockMode::Simulated => "simulated",
        ClockMode::Wall => "wall",
    }
}

fn parse_window_kind(s: &str) -> Option<WindowKind> {
    match s {
        "tumbling" => Some(WindowKind::Tumbling),
        "hopping" => Some(WindowKind::Hopping),
        _ => None,
    }
}

fn window_kind_str(kind: WindowKind) -> &'static str {
    match kind {
        WindowKind::Tumbling => "tumbling",
        WindowKind::Hopping => "hopping",
    }
}

/// Parses and validates a config (or manifest) text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let reader = Reader {
        entries: split_lines(text)?,
    };
    let use_case = reader
        .parse_with("use_case", "one of uc1..uc4", UseCaseId::parse)?
        .ok_or(ConfigError::MissingKey("use_case"))?;
    let dimension = reader
        .parse_with(
            "dimension",
            "a workload dimension name",
            WorkloadDimension::parse,
        )?
        .ok_or(ConfigError::MissingKey("dimension"))?;
    let mut cfg = ExperimentConfig::new(use_case, dimension);
    cfg.workloads = reader.list("workloads", "comma-separated positive numbers")?;
    cfg.instance_counts = reader.list("instance_counts", "comma-separated positive integers")?;
    cfg.duration_ms = reader.parse_or("duration_ms", "milliseconds", cfg.duration_ms)?;
    cfg.warmup_ms = reader.parse_or("warmup_ms", "milliseconds", cfg.warmup_ms)?;
    cfg.sampling_interval_ms = reader.parse_or(
        "sampling_interval_ms",
        "milliseconds",
        cfg.sampling_interval_ms,
    )?;
    cfg.slope_threshold = reader.parse_or(
        "slope_threshold",
        "messages per second",
        cfg.slope_threshold,
    )?;
    cfg.clock = reader
        .parse_with("clock", "simulated or wall", parse_clock)?
        .unwrap_or(cfg.clock);
    cfg.capacity_per_instance = reader.parse_or(
        "capacity_per_instance",
        "records per second",
        cfg.capacity_per_instance,
    )?;
    cfg.record_cost_ns = reader.parse_or("record_cost_ns", "nanoseconds", cfg.record_cost_ns)?;
    cfg.commit_cost_records =
        reader.parse_or("commit_cost_records", "records", cfg.commit_cost_records)?;
    cfg.partition_overhead_rps = reader.parse_or(
        "partition_overhead_rps",
        "records per second",
        cfg.partition_overhead_rps,
    )?;
    cfg.commit_interval_ms =
        reader.parse_or("commit_interval_ms", "milliseconds", cfg.commit_interval_ms)?;
    cfg.partitions = reader.parse_or("partitions", "a positive integer", cfg.partitions)?;
    cfg.seed = reader.parse_or("seed", "a 64-bit integer", cfg.seed)?;
    cfg.method = reader
        .parse_with(
            "method",
            "lag_trend, output_count or latency_trend",
            SufficiencyMethod::parse,
        )?
        .unwrap_or(cfg.method);
    cfg.emit_on_close_only = reader.parse_or(
        "emit_on_close_only",
        "true or false",
        cfg.emit_on_close_only,
    )?;
    cfg.output_tolerance = reader.parse_or(
        "output_tolerance",
        "a fraction in [0, 1)",
        cfg.output_tolerance,
    )?;
    cfg.latency_threshold = reader.parse("latency_threshold", "ms of latency per second")?;

    let mut base = UseCaseConfig::default();
    base.num_keys = reader.parse_or("num_keys", "a positive integer", base.num_keys)?;
    base.rate_per_key_hz = reader.parse_or(
        "rate_per_key_hz",
        "messages per second",
        base.rate_per_key_hz,
    )?;
    let size: Option<u64> = reader.parse("window_size_ms", "milliseconds")?;
    let advance: Option<u64> = reader.parse("window_advance_ms", "milliseconds")?;
    base.window = match (size, advance) {
        (Some(size), advance) => {
            let advance = advance.unwrap_or(size);
            if advance == 0 || advance > size {
                return Err(ConfigError::Invalid(format!(
                    "window advance {advance} must be in 1..={size}"
                )));
            }
            Some(WindowSpec::new(size, advance))
        }
        (None, Some(_)) => {
            return Err(ConfigError::Invalid(
                "window_advance_ms needs window_size_ms".into(),
            ))
        }
        (None, None) => None,
    };
    base.time_attribute = reader.parse_with(
        "time_attribute",
        "hour_of_day, day_of_week or day_of_year",
        TimeAttribute::parse,
    )?;
    base.window_kind =
        reader.parse_with("window_kind", "tumbling or hopping", parse_window_kind)?;
    let fanout: Option<u32> = reader.parse("fanout", "a positive integer")?;
    let depth: Option<u32> = reader.parse("depth", "a positive integer")?;
    base.hierarchy = match (fanout, depth) {
        (Some(fanout), Some(depth)) => {
            if fanout == 0 || depth == 0 {
                return Err(ConfigError::Invalid("fanout and depth must be >= 1".into()));
            }
            Some(HierarchySpec::new(fanout, depth))
        }
        (None, None) => None,
        _ => {
            return Err(ConfigError::Invalid(
                "fanout and depth must be given together".into(),
            ))
        }
    };
    cfg.base = base;
    cfg.validate()?;
    Ok(cfg)
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn opt<T: std::fmt::Display>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders a config as manifest text: every key, fixed order, one
/// key=value per line, empty value for unset optional fields. The output
/// re-parses to an equal config.
pub fn manifest_text(cfg: &ExperimentConfig) -> String {
    let window = cfg.base.window;
    let values: [(&str, String); 28] = [
        ("use_case", cfg.use_case.to_string()),
        ("dimension", cfg.dimension.to_string()),
        ("workloads", join(&cfg.workloads)),
        ("instance_counts", join(&cfg.instance_counts)),
        ("duration_ms", cfg.duration_ms.to_string()),
        ("warmup_ms", cfg.warmup_ms.to_string()),
        ("sampling_interval_ms", cfg.sampling_interval_ms.to_string()),
        ("slope_threshold", cfg.slope_threshold.to_string()),
        ("clock", clock_str(cfg.clock).to_string()),
        (
            "capacity_per_instance",
            cfg.capacity_per_instance.to_string(),
        ),
        ("record_cost_ns", cfg.record_cost_ns.to_string()),
        ("commit_cost_records", cfg.commit_cost_records.to_string()),
        (
            "partition_overhead_rps",
            cfg.partition_overhead_rps.to_string(),
        ),
        ("commit_interval_ms", cfg.commit_interval_ms.to_string()),
        ("partitions", cfg.partitions.to_string()),
        ("seed", cfg.seed.to_string()),
        ("method", cfg.method.to_string()),
        ("emit_on_close_only", cfg.emit_on_close_only.to_string()),
        ("output_tolerance", cfg.output_tolerance.to_string()),
        ("latency_threshold", opt(cfg.latency_threshold)),
        ("num_keys", cfg.base.num_keys.to_string()),
        ("rate_per_key_hz", cfg.base.rate_per_key_hz.to_string()),
        ("window_size_ms", opt(window.map(|w| w.size_ms))),
        ("window_advance_ms", opt(window.map(|w| w.advance_ms))),
        ("time_attribute", opt(cfg.base.time_attribute)),
        (
            "window_kind",
            opt(cfg.base.window_kind.map(window_kind_str)),
        ),
        ("fanout", opt(cfg.base.hierarchy.map(|h| h.fanout))),
        ("depth", opt(cfg.base.hierarchy.map(|h| h.depth))),
    ];
    let mut out = String::new();
    for (key, value) in values {
        out.push_str(key);
        out.push('=');
        out.push_str(&value);
        out.push('\n');
    }
    out
}
