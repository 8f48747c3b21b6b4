//! Batches of simulations and the files they leave behind.

use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vsnslice_core::exact::SolverConfig;
use vsnslice_core::sim::{run_simulation, Metrics, SimOptions};
use vsnslice_core::Strategy;

use crate::stats::Estimate;
use crate::workload::{SweepPoint, SweepVar, Workload};

pub const TOOL: &str = concat!("vsnslice ", env!("CARGO_PKG_VERSION"));

/// Everything needed to reproduce one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    /// Scenario with the seed and any swept cost already applied.
    pub workload: Workload,
    pub seed: Option<u64>,
    pub strategy: Strategy,
    pub sweep: Option<SweepPoint>,
    pub solver: SolverConfig,
    pub probe_time: Option<f64>,
    /// SHA-256 of this manifest with the hash field empty.
    pub config_hash: String,
}

impl RunManifest {
    pub fn new(
        workload: Workload,
        strategy: Strategy,
        sweep: Option<SweepPoint>,
        solver: SolverConfig,
        probe_time: Option<f64>,
    ) -> Self {
        let mut m = Self {
            tool: TOOL.to_string(),
            seed: workload.seed(),
            workload,
            strategy,
            sweep,
            solver,
            probe_time,
            config_hash: String::new(),
        };
        m.config_hash = m.hash();
        m
    }

    pub fn hash(&self) -> String {
        let blank = Self { config_hash: String::new(), ..self.clone() };
        let bytes = serde_json::to_vec(&blank).expect("manifest serializes");
        hex(&Sha256::digest(bytes))
    }

    pub fn options(&self) -> SimOptions {
        SimOptions { solver: self.solver, probe_time: self.probe_time, keep_prior_states: false }
    }

    /// File stem unique within one batch.
    pub fn label(&self) -> String {
        let mut s = self.strategy.name().to_string();
        if let Some(p) = self.sweep {
            write!(s, "_{}{}", p.variable, p.value).unwrap();
        }
        match self.seed {
            Some(seed) => write!(s, "_seed{seed}").unwrap(),
            None => s.push_str("_fixed"),
        }
        s
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub manifest: RunManifest,
    pub metrics: Metrics,
}

impl RunArtifact {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let artifact: Self =
            serde_json::from_str(&text).with_context(|| format!("{}: not a run artifact", path.display()))?;
        if artifact.manifest.hash() != artifact.manifest.config_hash {
            return Err(anyhow!("{}: manifest hash does not match its contents", path.display()));
        }
        Ok(artifact)
    }
}

/// A batch request: one run per (sweep value, seed, strategy).
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub workload: Workload,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub sweep: Vec<Option<SweepPoint>>,
    pub solver: SolverConfig,
    pub probe_time: Option<f64>,
    pub out: PathBuf,
}

impl RunSpec {
    pub fn manifests(&self) -> Vec<RunManifest> {
        let mut out = Vec::new();
        for &point in &self.sweep {
            let swept = match point {
                Some(p) => self.workload.with_sweep(p),
                None => self.workload.clone(),
            };
            for &seed in &self.seeds {
                let w = if swept.is_generated() { swept.with_seed(seed) } else { swept.clone() };
                for &strategy in &self.strategies {
                    out.push(RunManifest::new(w.clone(), strategy, point, self.solver, self.probe_time));
                }
            }
        }
        out
    }
}

pub fn execute(manifest: &RunManifest) -> Result<Metrics> {
    let (scenario, topology) = manifest.workload.build()?;
    catch_unwind(AssertUnwindSafe(|| run_simulation(&scenario, &topology, manifest.strategy, manifest.options())))
        .map_err(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            anyhow!("simulation aborted: {msg}")
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub run: String,
    pub error: String,
}

pub struct BatchOutcome {
    pub artifacts: Vec<RunArtifact>,
    pub failures: Vec<Failure>,
}

/// Runs every job in parallel and writes the per-run files, the tables and
/// the summary under `spec.out`. Failed runs are reported, not fatal.
pub fn run_batch(spec: &RunSpec) -> Result<BatchOutcome> {
    let runs_dir = spec.out.join("runs");
    fs::create_dir_all(&runs_dir).with_context(|| format!("creating {}", runs_dir.display()))?;
    let manifests = spec.manifests();
    let results: Vec<(RunManifest, Result<Metrics>)> = manifests
        .into_par_iter()
        .map(|m| {
            let r = execute(&m);
            (m, r)
        })
        .collect();

    let mut artifacts = Vec::new();
    let mut failures = Vec::new();
    for (manifest, result) in results {
        match result {
            Ok(metrics) => {
                let artifact = RunArtifact { manifest, metrics };
                let path = runs_dir.join(format!("{}.json", artifact.manifest.label()));
                write_json(&path, &artifact)?;
                artifacts.push(artifact);
            }
            Err(e) => failures.push(Failure { run: manifest.label(), error: format!("{e:#}") }),
        }
    }
    write_tables(&spec.out, &artifacts, &failures)?;
    Ok(BatchOutcome { artifacts, failures })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Per-run scalar results, one line of `runs.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub strategy: Strategy,
    pub sweep: Option<SweepPoint>,
    pub seed: Option<u64>,
    pub values: Vec<f64>,
}

pub const METRICS: [&str; 8] = [
    "deployed",
    "rejected",
    "unsolved",
    "unproven",
    "movements",
    "activations",
    "mean_final_energy",
    "min_final_energy",
];

impl RunRow {
    pub fn of(a: &RunArtifact) -> Self {
        let m = &a.metrics;
        let energy = &m.final_energy;
        let mean_energy = if energy.is_empty() { 0.0 } else { energy.iter().sum::<f64>() / energy.len() as f64 };
        let min_energy = energy.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            strategy: a.manifest.strategy,
            sweep: a.manifest.sweep,
            seed: a.manifest.seed,
            values: vec![
                m.deployed as f64,
                m.rejected as f64,
                m.unsolved as f64,
                m.unproven as f64,
                m.movements as f64,
                m.activations as f64,
                mean_energy,
                if min_energy.is_finite() { min_energy } else { 0.0 },
            ],
        }
    }
}

fn sweep_cells(p: Option<SweepPoint>) -> (String, String) {
    match p {
        Some(p) => (p.variable.to_string(), p.value.to_string()),
        None => (String::new(), String::new()),
    }
}

/// Mean and interval of every metric for one (strategy, sweep value) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub sweep_variable: Option<SweepVar>,
    pub sweep_value: Option<f64>,
    pub metric: String,
    pub estimate: Estimate,
}

fn group_key(row: &RunRow) -> (Strategy, Option<f64>) {
    (row.strategy, row.sweep.map(|p| p.value))
}

fn cmp_key(a: &(Strategy, Option<f64>), b: &(Strategy, Option<f64>)) -> std::cmp::Ordering {
    a.0.cmp(&b.0).then_with(|| match (a.1, b.1) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (x, y) => x.is_some().cmp(&y.is_some()),
    })
}

pub fn summarize(rows: &[RunRow]) -> Vec<SummaryRow> {
    let mut sorted: Vec<&RunRow> = rows.iter().collect();
    sorted.sort_by(|a, b| cmp_key(&group_key(a), &group_key(b)).then(a.seed.cmp(&b.seed)));
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let key = group_key(sorted[i]);
        let mut j = i;
        while j < sorted.len() && cmp_key(&group_key(sorted[j]), &key).is_eq() {
            j += 1;
        }
        let group = &sorted[i..j];
        for (k, name) in METRICS.iter().enumerate() {
            let samples: Vec<f64> = group.iter().map(|r| r.values[k]).collect();
            out.push(SummaryRow {
                strategy: key.0,
                sweep_variable: group[0].sweep.map(|p| p.variable),
                sweep_value: key.1,
                metric: name.to_string(),
                estimate: Estimate::of(&samples),
            });
        }
        i = j;
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<Failure>,
}

pub fn write_tables(out: &Path, artifacts: &[RunArtifact], failures: &[Failure]) -> Result<()> {
    let mut rows: Vec<RunRow> = artifacts.iter().map(RunRow::of).collect();
    rows.sort_by(|a, b| cmp_key(&group_key(a), &group_key(b)).then(a.seed.cmp(&b.seed)));

    let mut runs = String::from("strategy,sweep_variable,sweep_value,seed");
    for m in METRICS {
        write!(runs, ",{m}").unwrap();
    }
    runs.push('\n');
    for r in &rows {
        let (var, value) = sweep_cells(r.sweep);
        let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
        write!(runs, "{},{var},{value},{seed}", r.strategy).unwrap();
        for v in &r.values {
            write!(runs, ",{v}").unwrap();
        }
        runs.push('\n');
    }
    fs::write(out.join("runs.csv"), runs).context("writing runs.csv")?;

    let mut ordered: Vec<&RunArtifact> = artifacts.iter().collect();
    ordered.sort_by_key(|a| a.manifest.label());
    let mut series = String::from("strategy,sweep_variable,sweep_value,seed,time,deployed,residual_energy\n");
    let mut energy = String::from("strategy,sweep_variable,sweep_value,seed,node_rank,final_energy,probe_energy\n");
    for a in ordered {
        let m = &a.manifest;
        let (var, value) = sweep_cells(m.sweep);
        let seed = m.seed.map(|s| s.to_string()).unwrap_or_default();
        let prefix = format!("{},{var},{value},{seed}", m.strategy);
        for p in &a.metrics.series {
            writeln!(series, "{prefix},{},{},{}", p.time, p.deployed, p.residual_energy).unwrap();
        }
        for (k, e) in a.metrics.final_energy.iter().enumerate() {
            let probe = a.metrics.probe_energy.as_ref().map(|p| p[k].to_string()).unwrap_or_default();
            writeln!(energy, "{prefix},{k},{e},{probe}").unwrap();
        }
    }
    fs::write(out.join("series.csv"), series).context("writing series.csv")?;
    fs::write(out.join("energy.csv"), energy).context("writing energy.csv")?;

    let summary = Summary { runs: artifacts.len(), rows: summarize(&rows), failures: failures.to_vec() };
    let mut csv = String::from("strategy,sweep_variable,sweep_value,metric,n,mean,std_dev,ci95_low,ci95_high\n");
    for s in &summary.rows {
        let var = s.sweep_variable.map(|v| v.to_string()).unwrap_or_default();
        let value = s.sweep_value.map(|v| v.to_string()).unwrap_or_default();
        let e = s.estimate;
        writeln!(
            csv,
            "{},{var},{value},{},{},{},{},{},{}",
            s.strategy,
            s.metric,
            e.n,
            e.mean,
            e.std_dev,
            e.low(),
            e.high()
        )
        .unwrap();
    }
    fs::write(out.join("summary.csv"), csv).context("writing summary.csv")?;
    write_json(&out.join("summary.json"), &summary)
}

/// Strategies as rows, sweep values as columns, `mean ± half-width` cells.
pub fn render_table(rows: &[SummaryRow], metric: &str) -> String {
    let picked: Vec<&SummaryRow> = rows.iter().filter(|r| r.metric == metric).collect();
    let mut columns: Vec<Option<f64>> = Vec::new();
    for r in &picked {
        if !columns.contains(&r.sweep_value) {
            columns.push(r.sweep_value);
        }
    }
    columns.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(y),
        (x, y) => x.is_some().cmp(&y.is_some()),
    });
    let var = picked.iter().find_map(|r| r.sweep_variable);
    let mut strategies: Vec<Strategy> = picked.iter().map(|r| r.strategy).collect();
    strategies.dedup();

    let mut out = format!("{metric} (mean ± 95% CI)\n{:<10}", "strategy");
    for c in &columns {
        let head = match (var, c) {
            (Some(v), Some(x)) => format!("{v}={x}"),
            _ => "all".into(),
        };
        write!(out, " {head:>20}").unwrap();
    }
    out.push('\n');
    for s in strategies {
        write!(out, "{:<10}", s.name()).unwrap();
        for c in &columns {
            let cell = picked
                .iter()
                .find(|r| r.strategy == s && r.sweep_value == *c)
                .map(|r| format!("{:.2} ± {:.2}", r.estimate.mean, r.estimate.half_width))
                .unwrap_or_else(|| "-".into());
            write!(out, " {cell:>20}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use vsnslice_core::exact::Objective;

    fn row(strategy: Strategy, value: Option<f64>, seed: u64, deployed: f64) -> RunRow {
        RunRow {
            strategy,
            sweep: value.map(|value| SweepPoint { variable: SweepVar::Delta, value }),
            seed: Some(seed),
            values: vec![deployed, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    #[test]
    fn groups_by_strategy_and_sweep_value() {
        let h = Strategy::Heuristic;
        let m = Strategy::Exact(Objective::Mixed);
        let rows = vec![
            row(h, Some(50.0), 0, 9.0),
            row(m, Some(10.0), 0, 10.0),
            row(h, Some(10.0), 1, 8.0),
            row(h, Some(10.0), 0, 6.0),
            row(m, Some(10.0), 1, 10.0),
        ];
        let deployed: Vec<_> = summarize(&rows).into_iter().filter(|r| r.metric == "deployed").collect();
        assert_eq!(deployed.len(), 3);
        assert_eq!((deployed[0].strategy, deployed[0].sweep_value), (m, Some(10.0)));
        assert_eq!(deployed[0].estimate.mean, 10.0);
        assert_eq!((deployed[1].strategy, deployed[1].sweep_value, deployed[1].estimate.n), (h, Some(10.0), 2));
        assert_eq!(deployed[1].estimate.mean, 7.0);
        assert_eq!(deployed[2].estimate.n, 1);
        let table = render_table(&summarize(&rows), "deployed");
        assert!(table.contains("delta=10"), "{table}");
        assert!(table.contains("heuristic"), "{table}");
    }

    #[test]
    fn manifest_hash_tracks_contents() {
        let w = Workload::preset(1).unwrap();
        let a = RunManifest::new(w.with_seed(1), Strategy::Heuristic, None, SolverConfig::default(), None);
        let b = RunManifest::new(w.with_seed(2), Strategy::Heuristic, None, SolverConfig::default(), None);
        assert_eq!(a.config_hash, a.hash());
        assert_eq!(a.config_hash.len(), 64);
        assert_ne!(a.config_hash, b.config_hash);
        assert_eq!(a.label(), "heuristic_seed1");
    }
}
