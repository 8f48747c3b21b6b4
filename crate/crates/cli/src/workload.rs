//! Where a run's scenario comes from, and the parameters swept over it.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vsnslice_core::model::{parse_by_extension, ScenarioFile};
use vsnslice_core::sim::{generate_scenario, ScenarioConfig};
use vsnslice_core::{build_topology, Scenario, Topology};

/// A fully resolved scenario: generator parameters including the seed, or a
/// fixed list of nodes and applications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workload {
    Generated(ScenarioConfig),
    Fixed(ScenarioFile),
}

impl Workload {
    /// Reads a scenario file. Files with a `nodes` list describe a fixed
    /// network; anything else is taken as generator parameters.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value = parse_by_extension(path, &text)?;
        if value.get("nodes").is_some() {
            let file: ScenarioFile =
                serde_json::from_value(value).with_context(|| format!("{}: not a valid scenario", path.display()))?;
            file.clone().into_scenario().with_context(|| path.display().to_string())?;
            Ok(Workload::Fixed(file))
        } else {
            let config: ScenarioConfig = serde_json::from_value(value)
                .with_context(|| format!("{}: not a valid scenario configuration", path.display()))?;
            config.validate().with_context(|| path.display().to_string())?;
            Ok(Workload::Generated(config))
        }
    }

    pub fn preset(n: usize) -> Result<Self> {
        Ok(Workload::Generated(ScenarioConfig::preset(n)?))
    }

    pub fn is_generated(&self) -> bool {
        matches!(self, Workload::Generated(_))
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Workload::Generated(c) => Some(c.seed),
            Workload::Fixed(_) => None,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        if let Workload::Generated(c) = &mut out {
            c.seed = seed;
        }
        out
    }

    pub fn with_test_points(&self, count: usize) -> Result<Self> {
        match self {
            Workload::Generated(c) => {
                let mut c = c.clone();
                c.test_points_per_app = count;
                c.validate()?;
                Ok(Workload::Generated(c))
            }
            Workload::Fixed(_) => bail!("--test-points only applies to generated scenarios"),
        }
    }

    /// Sets the activation cost of every node or the moving cost of every
    /// application. Per-node overrides in fixed scenarios are kept.
    pub fn with_sweep(&self, point: SweepPoint) -> Self {
        let mut out = self.clone();
        match (&mut out, point.variable) {
            (Workload::Generated(c), SweepVar::Phi) => c.activation_cost = point.value,
            (Workload::Generated(c), SweepVar::Delta) => c.move_cost = point.value,
            (Workload::Fixed(f), SweepVar::Phi) => f.nodes.iter_mut().for_each(|n| n.activation_cost = point.value),
            (Workload::Fixed(f), SweepVar::Delta) => f.apps.iter_mut().for_each(|a| a.move_cost = point.value),
        }
        out
    }

    pub fn build(&self) -> Result<(Scenario, Topology)> {
        match self {
            Workload::Generated(c) => Ok(generate_scenario(c)?),
            Workload::Fixed(f) => {
                let scenario = f.clone().into_scenario()?;
                let topology = build_topology(&scenario.nodes, &scenario.radio, &scenario.energy)?;
                Ok((scenario, topology))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// Activation cost of switching a node on (J).
    Phi,
    /// Cost of moving a test point to another node (J).
    Delta,
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVar::Phi => "phi",
            SweepVar::Delta => "delta",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub variable: SweepVar,
    pub value: f64,
}

/// `phi=v1,v2,...` or `delta=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn points(&self) -> impl Iterator<Item = SweepPoint> + '_ {
        self.values.iter().map(|&value| SweepPoint { variable: self.variable, value })
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, list) = s.split_once('=').ok_or("expected phi=v1,v2,... or delta=v1,v2,...")?;
        let variable = match name.trim().to_ascii_lowercase().as_str() {
            "phi" => SweepVar::Phi,
            "delta" => SweepVar::Delta,
            other => return Err(format!("unknown sweep variable {other:?}; expected phi or delta")),
        };
        let mut values = Vec::new();
        for item in list.split(',').map(str::trim).filter(|v| !v.is_empty()) {
            let v: f64 = item.parse().map_err(|_| format!("sweep value {item:?} is not a number"))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("sweep value {item} must be a non-negative number"));
            }
            if values.contains(&v) {
                return Err(format!("sweep value {item} listed twice"));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        Ok(Sweep { variable, values })
    }
}

/// Seeds given as `A..B` (end excluded), `A..=B` or a single number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn iter(&self) -> std::ops::Range<u64> {
        self.start..self.end
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("{t:?} is not a seed"));
        let (start, end) = if let Some((a, b)) = s.split_once("..=") {
            (num(a)?, num(b)?.checked_add(1).ok_or("seed range too large")?)
        } else if let Some((a, b)) = s.split_once("..") {
            (num(a)?, num(b)?)
        } else {
            let a = num(s)?;
            (a, a + 1)
        };
        if end <= start {
            return Err(format!("seed range {s} is empty"));
        }
        Ok(SeedRange { start, end })
    }
}
