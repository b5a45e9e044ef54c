//! Wall-clock driver: real threads, real time, emulated per-record cost.
//!
//! The producer thread paces the source against the run's epoch, instance
//! threads poll-process-commit in a loop and burn `record_cost_ns` of
//! busy-work per record, and the calling thread samples lag on the
//! sampling grid. Event times remain milliseconds since the run epoch, so
//! results are directly comparable with simulated runs (modulo scheduling
//! jitter).

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::broker::Broker;

use super::instance::{build_instances, InstanceCore};
use super::{EngineError, InstanceRuntime, RunReport, Sample, Source, Topology};

pub struct WallParams {
    pub duration_ms: u64,
    pub sampling_interval_ms: u64,
    pub group: String,
    pub expected_partitions: u32,
}

pub struct WallOutput {
    pub lag_series: Vec<Sample>,
    pub latency_series: Vec<Sample>,
    pub report: RunReport,
}

fn busy_work(ns: u64) {
    if ns == 0 {
        return;
    }
    let start = Instant::now();
    while (start.elapsed().as_nanos() as u64) < ns {
        std::hint::spin_loop();
    }
}

/// Runs one deployment for `params.duration_ms` of wall time, then tears it
/// down with the same drain-and-flush sequence as the simulated driver.
pub fn run_cell<S: Source + Send + 'static>(
    broker: Arc<Broker>,
    topology: &Topology,
    n: u32,
    runtime: InstanceRuntime,
    source: S,
    params: WallParams,
) -> Result<WallOutput, EngineError> {
    let cores = build_instances(
        &broker,
        topology,
        n,
        runtime.commit_interval_ms,
        &params.group,
        params.expected_partitions,
    )?;
    let shared: Vec<Arc<Mutex<InstanceCore>>> =
        cores.into_iter().map(|c| Arc::new(Mutex::new(c))).collect();
    let consumed_topics: Vec<String> = topology
        .consumed_topics()
        .into_iter()
        .map(str::to_string)
        .collect();
    let source_topic = topology.source.clone();

    let stop = Arc::new(AtomicBool::new(false));
    let epoch = Instant::now();
    let elapsed_ms = move || epoch.elapsed().as_millis() as u64;

    let producer = {
        let broker = Arc::clone(&broker);
        let stop = Arc::clone(&stop);
        let duration = params.duration_ms;
        let mut source = source;
        thread::spawn(move || -> Result<(), EngineError> {
            loop {
                if stop.load(Ordering::Relaxed) {
                    return Ok(());
                }
                let Some(next) = source.peek_next_time() else {
                    return Ok(());
                };
                if next >= duration {
                    return Ok(());
                }
                let now = epoch.elapsed().as_millis() as u64;
                if next > now {
                    thread::sleep(Duration::from_millis((next - now).min(2)));
                    continue;
                }
                let until = (now + 1).min(duration);
                let mut failure = None;
                source.emit_until(until, &mut |msg| {
                    if failure.is_none() {
                        if let Err(e) = broker.produce(&source_topic, msg) {
                            failure = Some(e);
                        }
                    }
                });
                if let Some(e) = failure {
                    return Err(e.into());
                }
            }
        })
    };

    let workers: Vec<_> = shared
        .iter()
        .map(|core| {
            let core = Arc::clone(core);
            let broker = Arc::clone(&broker);
            let stop = Arc::clone(&stop);
            let ci = runtime.commit_interval_ms.max(1);
            let cost_ns = runtime.record_cost_ns;
            thread::spawn(move || -> Result<(), EngineError> {
                let mut next_commit = ci;
                loop {
                    if stop.load(Ordering::Relaxed) {
                        return Ok(());
                    }
                    let processed = {
                        let mut inst = core.lock().unwrap();
                        inst.sync_broadcast(&broker)?;
                        let processed = inst.poll_and_process(&broker, 64)?;
                        let now = epoch.elapsed().as_millis() as u64;
                        if now >= next_commit {
                            inst.on_commit(&broker)?;
                            next_commit = (now / ci + 1) * ci;
                        }
                        processed
                    };
                    if processed > 0 {
                        busy_work(processed * cost_ns);
                    } else {
                        thread::sleep(Duration::from_micros(500));
                    }
                }
            })
        })
        .collect();

    let mut lag_series = Vec::new();
    let mut latency_series = Vec::new();
    let samples = params.duration_ms / params.sampling_interval_ms;
    for k in 1..=samples {
        let target = k * params.sampling_interval_ms;
        loop {
            let now = elapsed_ms();
            if now >= target {
                break;
            }
            thread::sleep(Duration::from_millis((target - now).min(5)));
        }
        let mut lag = 0;
        for topic in &consumed_topics {
            lag += broker.total_lag(&params.group, topic)?;
        }
        lag_series.push(Sample {
            t_ms: target,
            value: lag,
        });
        let now = elapsed_ms();
        let latency = shared
            .iter()
            .map(|core| core.lock().unwrap())
            .filter(|i| i.watermark > 0 || i.consumed_primary > 0)
            .map(|i| now.saturating_sub(i.watermark))
            .max()
            .unwrap_or(0);
        latency_series.push(Sample {
            t_ms: target,
            value: latency,
        });
    }
    while elapsed_ms() < params.duration_ms {
        thread::sleep(Duration::from_millis(1));
    }
    stop.store(true, Ordering::Relaxed);

    producer.join().map_err(|_| EngineError::WorkerPanicked)??;
    for worker in workers {
        worker.join().map_err(|_| EngineError::WorkerPanicked)??;
    }

    let mut instances: Vec<InstanceCore> = shared
        .into_iter()
        .map(|core| {
            Arc::try_unwrap(core)
                .map(|m| m.into_inner().unwrap())
                .map_err(|_| EngineError::WorkerPanicked)
        })
        .collect::<Result<_, _>>()?;
    loop {
        let mut progress = 0;
        for inst in &mut instances {
            progress += inst.drain_internal(&broker)?;
        }
        for inst in &mut instances {
            progress += inst.flush_pass(&broker)?;
        }
        if progress == 0 {
            break;
        }
    }
    for inst in &mut instances {
        inst.final_commit(&broker)?;
    }
    let consumed_per_instance: Vec<u64> = instances.iter().map(|i| i.consumed_primary).collect();
    Ok(WallOutput {
        lag_series,
        latency_series,
        report: RunReport {
            records_consumed: consumed_per_instance.iter().sum(),
            records_emitted: instances.iter().map(|i| i.emitted).sum(),
            consumed_per_instance,
        },
    })
}
