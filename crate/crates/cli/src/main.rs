//! Command-line front end for admission and slicing experiments.

mod explain;
mod export;
mod run;
mod stats;
mod workload;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use vsnslice_core::exact::{Objective, SolverConfig};
use vsnslice_core::Strategy;

use export::{ExportMode, ExportRequest};
use run::{render_table, summarize, RunArtifact, RunRow, RunSpec, METRICS};
use workload::{SeedRange, Sweep, Workload};

/// Worker threads for parallel runs; defaults to one per core.
const WORKERS_ENV: &str = "VSNSLICE_WORKERS";

#[derive(Parser)]
#[command(name = "vsnslice", version, about = "Admission control and slicing experiments for shared sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate strategies over seeds and sweep values, writing per-run
    /// artifacts and a summary with 95% confidence intervals.
    Run(RunArgs),
    /// Write the offline model or the model for one arrival as an LP file
    /// with a JSON manifest beside it.
    ExportLp(ExportArgs),
    /// Replay a run up to one arrival and show why it was admitted or refused.
    Explain(ExplainArgs),
    /// Summarize the run artifacts in an output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct WorkloadArgs {
    /// Scenario file (JSON or TOML): generator parameters, or a fixed network with a `nodes` list.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Reference scenario 1..=6; used when no scenario file is given.
    #[arg(long)]
    preset: Option<usize>,
    /// Test points per application for generated scenarios.
    #[arg(long)]
    test_points: Option<usize>,
    /// Placement attempts per exact decision before it gives up.
    #[arg(long, default_value_t = SolverConfig::default().max_expansions)]
    max_expansions: u64,
}

impl WorkloadArgs {
    fn workload(&self) -> Result<Workload> {
        let w = match &self.scenario {
            Some(path) => Workload::from_file(path)?,
            None => Workload::preset(self.preset.unwrap_or(1))?,
        };
        match self.test_points {
            Some(n) => w.with_test_points(n),
            None => Ok(w),
        }
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig { max_expansions: self.max_expansions }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    workload: WorkloadArgs,
    /// Comma-separated strategies (or, total, maxmin, mixed, heuristic) or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    strategy: Vec<String>,
    /// Seeds as A..B (end excluded), A..=B or a single seed.
    #[arg(long, default_value = "0..1")]
    seeds: SeedRange,
    /// Vary one switching cost: phi=v1,v2,... or delta=v1,v2,...
    #[arg(long)]
    sweep: Option<Sweep>,
    /// Also record per-node residual energy at this time (s).
    #[arg(long)]
    probe_time: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    workload: WorkloadArgs,
    /// Seed for generated scenarios.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `global`, or `dynamic@N` for the N-th arrival (1-based).
    #[arg(long, default_value = "global")]
    mode: ExportMode,
    /// Objective of the dynamic model.
    #[arg(long, default_value = "mixed")]
    objective: String,
    /// Strategy deciding earlier arrivals; defaults to the exact solver with the chosen objective.
    #[arg(long)]
    strategy: Option<String>,
    /// Path of the `.lp` file; the manifest goes beside it with a `.json` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExplainArgs {
    /// Run artifact written by `run` (a file under `runs/`).
    artifact: PathBuf,
    /// Application id to explain.
    #[arg(long)]
    app: usize,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of a previous `run`.
    dir: PathBuf,
    /// Metric to tabulate.
    #[arg(long, default_value = "deployed")]
    metric: String,
    /// Print the full summary as JSON.
    #[arg(long)]
    json: bool,
}

fn usage_error(kind: ErrorKind, message: impl std::fmt::Display) -> ! {
    Cli::command().error(kind, message).exit()
}

fn parse_strategies(items: &[String]) -> Vec<Strategy> {
    let mut out = Vec::new();
    for item in items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        if item.eq_ignore_ascii_case("all") {
            out.extend(Strategy::ALL);
            continue;
        }
        match item.parse::<Strategy>() {
            Ok(s) => out.push(s),
            Err(e) => usage_error(ErrorKind::InvalidValue, e),
        }
    }
    if out.is_empty() {
        usage_error(ErrorKind::InvalidValue, "the strategy list is empty");
    }
    out.sort();
    out.dedup();
    out
}

fn configure_workers() -> Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{WORKERS_ENV}={value:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let strategies = parse_strategies(&args.strategy);
    let workload = args.workload.workload()?;
    if !workload.is_generated() && args.seeds.len() > 1 {
        bail!("a fixed scenario does not depend on the seed; pass a single seed");
    }
    if let Some(t) = args.probe_time {
        if !(t.is_finite() && t >= 0.0) {
            bail!("probe time must be a non-negative number of seconds");
        }
    }
    configure_workers()?;
    let spec = RunSpec {
        solver: args.workload.solver(),
        workload,
        strategies,
        seeds: args.seeds.iter().collect(),
        sweep: match &args.sweep {
            Some(s) => s.points().map(Some).collect(),
            None => vec![None],
        },
        probe_time: args.probe_time,
        out: args.out,
    };
    let outcome = run::run_batch(&spec)?;
    let rows: Vec<RunRow> = outcome.artifacts.iter().map(RunRow::of).collect();
    print!("{}", render_table(&summarize(&rows), "deployed"));
    println!("{} runs written to {}", outcome.artifacts.len(), spec.out.display());
    for f in &outcome.failures {
        eprintln!("run {} failed: {}", f.run, f.error);
    }
    Ok(if outcome.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_export(args: ExportArgs) -> Result<ExitCode> {
    let objective: Objective = args.objective.parse()?;
    let replay = match &args.strategy {
        Some(s) => s.parse()?,
        None => Strategy::Exact(objective),
    };
    let req = ExportRequest {
        workload: args.workload.workload()?.with_seed(args.seed),
        mode: args.mode,
        objective,
        replay,
        solver: args.workload.solver(),
        out: args.out,
    };
    let model = export::export(&req)?;
    println!(
        "{}: {} variables ({} binary), {} rows; manifest {}",
        req.out.display(),
        model.variables.len(),
        model.binaries(),
        model.rows.len(),
        export::manifest_path(&req.out).display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_explain(args: ExplainArgs) -> Result<ExitCode> {
    let artifact = RunArtifact::read(&args.artifact)?;
    let e = explain::explain(&artifact, args.app)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&e)?);
    } else {
        print!("{}", explain::render(&e));
    }
    Ok(ExitCode::SUCCESS)
}

fn read_artifacts(dir: &Path) -> Result<Vec<RunArtifact>> {
    let runs = dir.join("runs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&runs)
        .with_context(|| format!("reading {}", runs.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no run artifacts in {}", runs.display());
    }
    paths.iter().map(|p| RunArtifact::read(p)).collect()
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode> {
    if !METRICS.contains(&args.metric.as_str()) {
        usage_error(
            ErrorKind::InvalidValue,
            format!("unknown metric {:?}; expected one of {}", args.metric, METRICS.join(", ")),
        );
    }
    let artifacts = read_artifacts(&args.dir)?;
    let rows: Vec<RunRow> = artifacts.iter().map(RunRow::of).collect();
    let summary = summarize(&rows);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print!("{}", render_table(&summary, &args.metric));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::ExportLp(a) => cmd_export(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
