//! Raw-result persistence. One subexperiment leaves three files named by a
//! common stem (`<uc>_<dimension>_w<workload>_i<instances>_seed<seed>`):
//!
//! - `<stem>_lag.csv`: header `timestamp_ms,total_lag`, LF-terminated
//!   decimal integer rows, no quoting;
//! - `<stem>_latency.csv`: same shape with header `timestamp_ms,latency_ms`;
//! - `<stem>_meta`: key=value lines with the cell's counts and seed.
//!
//! The experiment directory additionally holds a `manifest` with the full
//! config. Serialization is deterministic: re-persisting a result writes
//! identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::Sample;
use crate::usecases::ExpectedOutput;

use super::config::{manifest_text, parse_config, ConfigError, ExperimentConfig};

pub const MANIFEST_FILE: &str = "manifest";
pub const LAG_HEADER: &str = "timestamp_ms,total_lag";
pub const LATENCY_HEADER: &str = "timestamp_ms,latency_ms";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("malformed {path}: {reason}")]
    Malformed { path: String, reason: String },
}

/// Everything measured in one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SubexperimentResult {
    pub workload: f64,
    pub instances: u32,
    pub seed: u64,
    pub lag: Vec<Sample>,
    pub latency: Vec<Sample>,
    /// Records that actually entered the input topic (broker end offsets
    /// at teardown, not the generator's claim).
    pub input_count: u64,
    /// Records observed at the sink by teardown.
    pub output_count: u64,
    pub expected_output: ExpectedOutput,
    /// Wall-clock start, unix ms; absent in simulated mode so reruns are
    /// byte-identical.
    pub started_unix_ms: Option<u64>,
}

pub fn result_stem(cfg: &ExperimentConfig, workload: f64, instances: u32) -> String {
    format!(
        "{}_{}_w{}_i{}_seed{}",
        cfg.use_case, cfg.dimension, workload, instances, cfg.seed
    )
}

fn series_csv(header: &str, series: &[Sample]) -> String {
    let mut out = String::with_capacity(series.len() * 16 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for sample in series {
        out.push_str(&sample.t_ms.to_string());
        out.push(',');
        out.push_str(&sample.value.to_string());
        out.push('\n');
    }
    out
}

fn meta_text(result: &SubexperimentResult) -> String {
    let expected = match result.expected_output {
        ExpectedOutput::Count(n) => n.to_string(),
        ExpectedOutput::Unbounded => "unbounded".to_string(),
    };
    let started = result
        .started_unix_ms
        .map(|t| t.to_string())
        .unwrap_or_default();
    format!(
        "workload={}\ninstances={}\nseed={}\ninput_count={}\noutput_count={}\nexpected_output={}\nstarted_unix_ms={}\n",
        result.workload,
        result.instances,
        result.seed,
        result.input_count,
        result.output_count,
        expected,
        started,
    )
}

/// Writes the three per-cell files; returns the stem path (without suffix).
pub fn write_result(
    dir: &Path,
    cfg: &ExperimentConfig,
    result: &SubexperimentResult,
) -> std::io::Result<PathBuf> {
    let stem = dir.join(result_stem(cfg, result.workload, result.instances));
    let with = |suffix: &str| {
        let mut name = stem.file_name().unwrap().to_os_string();
        name.push(suffix);
        stem.with_file_name(name)
    };
    fs::write(with("_lag.csv"), series_csv(LAG_HEADER, &result.lag))?;
    fs::write(
        with("_latency.csv"),
        series_csv(LATENCY_HEADER, &result.latency),
    )?;
    fs::write(with("_meta"), meta_text(result))?;
    Ok(stem)
}

pub fn write_manifest(dir: &Path, cfg: &ExperimentConfig) -> std::io::Result<()> {
    fs::write(dir.join(MANIFEST_FILE), manifest_text(cfg))
}

fn malformed(path: &Path, reason: impl Into<String>) -> LoadError {
    LoadError::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn read_series(path: &Path, header: &str) -> Result<Vec<Sample>, LoadError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == header => {}
        other => {
            return Err(malformed(
                path,
                format!("expected header {header:?}, got {other:?}"),
            ))
        }
    }
    let mut series = Vec::new();
    for line in lines {
        let Some((t, v)) = line.split_once(',') else {
            return Err(malformed(
                path,
                format!("expected two columns, got {line:?}"),
            ));
        };
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| malformed(path, format!("expected decimal integer, got {s:?}")))
        };
        series.push(Sample {
            t_ms: parse(t)?,
            value: parse(v)?,
        });
    }
    Ok(series)
}

fn meta_value<'a>(path: &Path, text: &'a str, key: &str) -> Result<&'a str, LoadError> {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
        .ok_or_else(|| malformed(path, format!("missing {key}")))
}

/// Reads one cell back; `Ok(None)` when the cell was never persisted.
pub fn read_result(
    dir: &Path,
    cfg: &ExperimentConfig,
    workload: f64,
    instances: u32,
) -> Result<Option<SubexperimentResult>, LoadError> {
    let stem = dir.join(result_stem(cfg, workload, instances));
    let with = |suffix: &str| {
        let mut name = stem.file_name().unwrap().to_os_string();
        name.push(suffix);
        stem.with_file_name(name)
    };
    let meta_path = with("_meta");
    if !meta_path.exists() {
        return Ok(None);
    }
    let meta = fs::read_to_string(&meta_path)?;
    let field = |key: &str| meta_value(&meta_path, &meta, key);
    let parse_u64 = |key: &str| -> Result<u64, LoadError> {
        let raw = field(key)?;
        raw.parse()
            .map_err(|_| malformed(&meta_path, format!("bad integer for {key}: {raw:?}")))
    };
    let expected = match field("expected_output")? {
        "unbounded" => ExpectedOutput::Unbounded,
        n => ExpectedOutput::Count(
            n.parse()
                .map_err(|_| malformed(&meta_path, format!("bad expected_output: {n:?}")))?,
        ),
    };
    let started = match field("started_unix_ms")? {
        "" => None,
        n => Some(
            n.parse()
                .map_err(|_| malformed(&meta_path, format!("bad started_unix_ms: {n:?}")))?,
        ),
    };
    Ok(Some(SubexperimentResult {
        workload,
        instances,
        seed: parse_u64("seed")?,
        lag: read_series(&with("_lag.csv"), LAG_HEADER)?,
        latency: read_series(&with("_latency.csv"), LATENCY_HEADER)?,
        input_count: parse_u64("input_count")?,
        output_count: parse_u64("output_count")?,
        expected_output: expected,
        started_unix_ms: started,
    }))
}

/// Loads a whole experiment directory: the manifest plus every persisted
/// grid cell (missing cells are skipped, not errors; the analysis decides
/// whether the grid is complete).
pub fn load_experiment(
    dir: &Path,
) -> Result<(ExperimentConfig, Vec<SubexperimentResult>), LoadError> {
    let manifest = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let cfg = parse_config(&manifest)?;
    let mut results = Vec::new();
    for &workload in &cfg.workloads {
        for &instances in &cfg.instance_counts {
            if let Some(result) = read_result(dir, &cfg, workload, instances)? {
                results.push(result);
            }
        }
    }
    Ok((cfg, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::usecases::UseCaseId;
    use crate::workload::WorkloadDimension;

    fn demo_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(UseCaseId::Uc1, WorkloadDimension::NumKeys);
        cfg.workloads = vec![100.0, 200.0];
        cfg.instance_counts = vec![1, 2];
        cfg
    }

    fn demo_result() -> SubexperimentResult {
        SubexperimentResult {
            workload: 100.0,
            instances: 2,
            seed: 42,
            lag: vec![
                Sample {
                    t_ms: 5_000,
                    value: 120,
                },
                Sample {
                    t_ms: 10_000,
                    value: 0,
                },
            ],
            latency: vec![Sample {
                t_ms: 5_000,
                value: 37,
            }],
            input_count: 30_000,
            output_count: 30_000,
            expected_output: ExpectedOutput::Count(30_000),
            started_unix_ms: None,
        }
    }

    #[test]
    fn stem_encodes_cell_coordinates() {
        assert_eq!(
            result_stem(&demo_cfg(), 100.0, 2),
            "uc1_num_keys_w100_i2_seed42"
        );
        assert_eq!(
            result_stem(&demo_cfg(), 2.5, 10),
            "uc1_num_keys_w2.5_i10_seed42"
        );
    }

    #[test]
    fn lag_csv_bytes_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let stem = write_result(dir.path(), &demo_cfg(), &demo_result()).unwrap();
        let lag = fs::read(format!("{}_lag.csv", stem.display())).unwrap();
        assert_eq!(
            String::from_utf8(lag).unwrap(),
            "timestamp_ms,total_lag\n5000,120\n10000,0\n"
        );
        let latency = fs::read(format!("{}_latency.csv", stem.display())).unwrap();
        assert_eq!(
            String::from_utf8(latency).unwrap(),
            "timestamp_ms,latency_ms\n5000,37\n"
        );
    }

    #[test]
    fn results_round_trip_and_rewrite_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = demo_cfg();
        let result = demo_result();
        write_result(dir.path(), &cfg, &result).unwrap();
        let loaded = read_result(dir.path(), &cfg, 100.0, 2).unwrap().unwrap();
        assert_eq!(loaded, result);
        let before: Vec<u8> =
            fs::read(dir.path().join("uc1_num_keys_w100_i2_seed42_meta")).unwrap();
        write_result(dir.path(), &cfg, &result).unwrap();
        let after: Vec<u8> = fs::read(dir.path().join("uc1_num_keys_w100_i2_seed42_meta")).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn missing_cells_read_as_none() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_result(dir.path(), &demo_cfg(), 100.0, 1)
            .unwrap()
            .is_none());
    }

    #[test]
    fn corrupt_series_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = demo_cfg();
        write_result(dir.path(), &cfg, &demo_result()).unwrap();
        let lag = dir.path().join("uc1_num_keys_w100_i2_seed42_lag.csv");
        fs::write(&lag, "time,lag\n1,2\n").unwrap();
        assert!(matches!(
            read_result(dir.path(), &cfg, 100.0, 2),
            Err(LoadError::Malformed { .. })
        ));
        fs::write(&lag, "timestamp_ms,total_lag\n1,2.5\n").unwrap();
        assert!(matches!(
            read_result(dir.path(), &cfg, 100.0, 2),
            Err(LoadError::Malformed { .. })
        ));
    }

    #[test]
    fn experiment_directory_loads_manifest_and_cells() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = demo_cfg();
        write_manifest(dir.path(), &cfg).unwrap();
        let mut result = demo_result();
        write_result(dir.path(), &cfg, &result).unwrap();
        result.workload = 200.0;
        result.instances = 1;
        write_result(dir.path(), &cfg, &result).unwrap();
        let (loaded_cfg, results) = load_experiment(dir.path()).unwrap();
        assert_eq!(loaded_cfg, cfg);
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].workload, 100.0);
        assert_eq!(results[1].workload, 200.0);
    }
}
