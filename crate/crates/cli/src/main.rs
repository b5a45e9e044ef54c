use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scalebench::analysis::{
    demand_curve, graph, AnalysisError, Demand, SufficiencyMethod, VerdictSpec,
};
use scalebench::harness::{load_experiment, parse_config, run_experiment, LoadError};

/// Rejected input: config, experiment directory, or flag values.
const EXIT_VALIDATION: u8 = 2;
/// A subexperiment failed or results could not be written.
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Scalability benchmarking for stream-processing workloads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured workload x instance-count grid and persist
    /// lag/latency samples plus a manifest.
    Run {
        /// Experiment configuration, flat key=value lines.
        #[arg(long)]
        config: PathBuf,
        /// Directory to create result files in.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the demand curve from a recorded experiment directory and
    /// write demand.csv plus a scalability plot.
    Analyze {
        /// Experiment directory written by `bench run`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Sufficiency threshold: msg/s for lag_trend, ms/s for
        /// latency_trend, relative shortfall for output_count.
        #[arg(long)]
        threshold: f64,
        /// One of lag_trend, output_count, latency_trend.
        #[arg(long)]
        method: String,
        /// Output path for the SVG plot.
        #[arg(long)]
        plot: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out } => run(&config, &out),
        Command::Analyze {
            input,
            threshold,
            method,
            plot,
        } => analyze(&input, threshold, &method, &plot),
    }
}

fn fail(code: u8, message: impl Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn run(config: &Path, out: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(config) {
        Ok(text) => text,
        Err(e) => {
            return fail(
                EXIT_VALIDATION,
                format_args!("cannot read {}: {e}", config.display()),
            )
        }
    };
    let cfg = match parse_config(&text) {
        Ok(cfg) => cfg,
        Err(e) => return fail(EXIT_VALIDATION, e),
    };
    match run_experiment(&cfg, out) {
        Ok(results) => {
            println!(
                "recorded {} subexperiments in {}",
                results.len(),
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) if e.is_validation() => fail(EXIT_VALIDATION, e),
        Err(e) => fail(EXIT_RUNTIME, e),
    }
}

fn analyze(input: &Path, threshold: f64, method: &str, plot: &Path) -> ExitCode {
    let Some(method) = SufficiencyMethod::parse(method) else {
        return fail(
            EXIT_VALIDATION,
            format_args!(
                "unknown method {method:?}; expected lag_trend, output_count or latency_trend"
            ),
        );
    };
    let (cfg, results) = match load_experiment(input) {
        Ok(loaded) => loaded,
        Err(LoadError::Io(e)) => {
            return fail(
                EXIT_VALIDATION,
                format_args!("cannot load {}: {e}", input.display()),
            )
        }
        Err(e) => return fail(EXIT_VALIDATION, e),
    };
    let spec = VerdictSpec {
        method,
        threshold,
        warmup_ms: cfg.warmup_ms,
        output_tolerance: if method == SufficiencyMethod::OutputCount {
            threshold
        } else {
            cfg.output_tolerance
        },
    };
    let curve = match demand_curve(&results, &spec) {
        Ok(curve) => curve,
        Err(e @ AnalysisError::PersistFailed(_)) => return fail(EXIT_RUNTIME, e),
        Err(e) => return fail(EXIT_VALIDATION, e),
    };
    for warning in &curve.warnings {
        eprintln!("warning: {warning}");
    }
    for point in &curve.points {
        match point.demand {
            Demand::Instances(n) => println!("workload {}: {n} instances", point.workload),
            Demand::Unsatisfiable => println!("workload {}: unsatisfiable", point.workload),
        }
    }
    let csv = input.join(graph::DEMAND_FILE);
    if let Err(e) = graph::emit_graph(&curve, &cfg.dimension.to_string(), &csv, plot) {
        return fail(EXIT_RUNTIME, e);
    }
    println!("wrote {} and {}", csv.display(), plot.display());
    ExitCode::SUCCESS
}
