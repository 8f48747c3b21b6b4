//! Domain types for nodes, applications and radio/energy parameters, plus the
//! built-in presets and the scenario file format.
//!
//! Units are SI throughout: Joules, Watts, bit/s, bits, metres, seconds.
//! Processing load is in MIPS.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type AppId = usize;
pub type TestPointId = usize;

/// Default sensing radius of a node, in metres.
pub const DEFAULT_SENSING_RANGE: f64 = 40.0;
/// Default activation and moving cost, in Joules.
pub const DEFAULT_SWITCH_COST: f64 = 10.0;
/// Default activity time of an application: five hours.
pub const DEFAULT_ACTIVITY: f64 = 18_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Radio profile shared by every node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Maximum transmit power (W).
    pub p_max: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Antenna constant of the gain model `g0 * d^-gamma`.
    pub g0: f64,
    /// Receiver sensitivity (W).
    pub alpha: f64,
    /// Interference sensitivity (W).
    pub mu: f64,
}

impl RadioParams {
    /// -10 dBm transmit power, -92 dBm sensitivity, -104 dBm interference threshold.
    pub fn reference() -> Self {
        Self { p_max: 1e-4, gamma: 4.0, g0: 8.1e-3, alpha: 6.31e-13, mu: 3.98e-14 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.p_max, self.gamma, self.g0, self.alpha, self.mu];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("radio parameters must be finite and strictly positive".into()));
        }
        if self.alpha <= self.mu {
            return Err(Error::InvalidInput("receiver sensitivity must exceed the interference threshold".into()));
        }
        if self.gamma < 2.0 {
            return Err(Error::InvalidInput("path-loss exponent must be at least 2".into()));
        }
        Ok(())
    }
}

impl Default for RadioParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// Radio energy coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConstants {
    /// Distance-independent transmit cost (J/bit).
    pub beta1: f64,
    /// Distance-dependent transmit cost (J/bit/m^gamma).
    pub beta2: f64,
    /// Receive cost (J/bit).
    pub rho: f64,
}

impl EnergyConstants {
    pub fn reference() -> Self {
        Self { beta1: 5e-8, beta2: 1.3e-15, rho: 5e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.beta1, self.beta2, self.rho].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("energy constants must be finite and strictly positive".into()));
        }
        Ok(())
    }
}

impl Default for EnergyConstants {
    fn default() -> Self {
        Self::reference()
    }
}

/// Capacities of a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceVector {
    /// Link bandwidth (bit/s).
    pub bandwidth: f64,
    /// Storage (bits).
    pub storage: f64,
    /// Processing capacity (MIPS).
    pub processing: f64,
    /// Battery energy (J).
    pub energy: f64,
}

impl ResourceVector {
    fn validate(&self, what: &str) -> Result<()> {
        let all = [self.bandwidth, self.storage, self.processing, self.energy];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!("{what}: resources must be finite and non-negative")));
        }
        Ok(())
    }
}

/// Per-test-point requirements of an application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandVector {
    /// Data rate generated per sensed test point (bit/s).
    pub rate: f64,
    /// Memory per hosted test point (bits).
    pub memory: f64,
    /// Processing load per hosted test point (MIPS).
    pub load: f64,
    /// Processing power per hosted test point (W).
    pub proc_power: f64,
}

/// Requirement vector of a visual-processing application.
pub fn preset_visual_app() -> DemandVector {
    DemandVector { rate: 12_000.0, memory: 842.0 * 8.0 * 1024.0, load: 69.23, proc_power: 0.2 }
}

/// Resource vector of a BeagleBone-class node on a 3 V, 3 Ah battery.
pub fn preset_beaglebone() -> ResourceVector {
    ResourceVector { bandwidth: 250_000.0, storage: 256.0 * 8.0 * 1024.0 * 1024.0, processing: 720.0, energy: 32_400.0 }
}

pub fn resource_preset(name: &str) -> Option<ResourceVector> {
    match name {
        "beaglebone" => Some(preset_beaglebone()),
        _ => None,
    }
}

pub fn demand_preset(name: &str) -> Option<DemandVector> {
    match name {
        "visual" => Some(preset_visual_app()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorNode {
    pub id: NodeId,
    pub position: Point,
    pub resources: ResourceVector,
    pub sensing_range: f64,
    pub is_sink: bool,
    pub activation_cost: f64,
    /// Transmit power override (W); `None` means the radio's maximum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power: Option<f64>,
}

impl SensorNode {
    pub fn new(id: NodeId, position: Point, resources: ResourceVector, is_sink: bool) -> Self {
        Self {
            id,
            position,
            resources,
            sensing_range: DEFAULT_SENSING_RANGE,
            is_sink,
            activation_cost: DEFAULT_SWITCH_COST,
            tx_power: None,
        }
    }

    pub fn covers(&self, p: &Point) -> bool {
        self.position.distance(p) <= self.sensing_range
    }

    pub fn validate(&self) -> Result<()> {
        let what = format!("node {}", self.id);
        self.resources.validate(&what)?;
        if !(self.sensing_range.is_finite() && self.sensing_range > 0.0) {
            return Err(Error::InvalidInput(format!("{what}: sensing range must be positive")));
        }
        if !(self.activation_cost.is_finite() && self.activation_cost >= 0.0) {
            return Err(Error::InvalidInput(format!("{what}: activation cost must be non-negative")));
        }
        if !(self.position.x.is_finite() && self.position.y.is_finite()) {
            return Err(Error::InvalidInput(format!("{what}: non-finite position")));
        }
        if let Some(p) = self.tx_power {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidInput(format!("{what}: transmit power must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPoint {
    pub id: TestPointId,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppRequest {
    pub id: AppId,
    pub arrival: f64,
    pub activity: f64,
    pub demand: DemandVector,
    pub test_points: Vec<TestPoint>,
    pub max_tp_per_node: u32,
    pub move_cost: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub max_tp_overrides: BTreeMap<NodeId, u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub move_cost_overrides: BTreeMap<NodeId, f64>,
}

impl AppRequest {
    pub fn departure(&self) -> f64 {
        self.arrival + self.activity
    }

    /// Activity left at time `now`, never negative.
    pub fn remaining(&self, now: f64) -> f64 {
        (self.departure() - now).max(0.0)
    }

    pub fn max_tp_on(&self, node: NodeId) -> u32 {
        self.max_tp_overrides.get(&node).copied().unwrap_or(self.max_tp_per_node)
    }

    pub fn move_cost_on(&self, node: NodeId) -> f64 {
        self.move_cost_overrides.get(&node).copied().unwrap_or(self.move_cost)
    }

    pub fn test_point(&self, id: TestPointId) -> Option<&TestPoint> {
        self.test_points.iter().find(|t| t.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        let what = format!("application {}", self.id);
        if !(self.activity.is_finite() && self.activity > 0.0) {
            return Err(Error::InvalidInput(format!("{what}: activity must be positive")));
        }
        if !self.arrival.is_finite() {
            return Err(Error::InvalidInput(format!("{what}: non-finite arrival time")));
        }
        if self.test_points.is_empty() {
            return Err(Error::InvalidInput(format!("{what}: no test points")));
        }
        if self.max_tp_per_node < 1 || self.max_tp_overrides.values().any(|n| *n < 1) {
            return Err(Error::InvalidInput(format!("{what}: per-node test point cap must be at least 1")));
        }
        let d = &self.demand;
        if [d.rate, d.memory, d.load, d.proc_power].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!("{what}: demand must be non-negative")));
        }
        if !(self.move_cost.is_finite() && self.move_cost >= 0.0)
            || self.move_cost_overrides.values().any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::InvalidInput(format!("{what}: moving cost must be non-negative")));
        }
        let mut seen = BTreeSet::new();
        for tp in &self.test_points {
            if !seen.insert(tp.id) {
                return Err(Error::InvalidInput(format!("{what}: duplicate test point id {}", tp.id)));
            }
            if !(tp.position.x.is_finite() && tp.position.y.is_finite()) {
                return Err(Error::InvalidInput(format!("{what}: test point {} has a non-finite position", tp.id)));
            }
        }
        Ok(())
    }
}

/// A fully specified workload: nodes, applications and the physical constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub radio: RadioParams,
    pub energy: EnergyConstants,
    pub nodes: Vec<SensorNode>,
    pub apps: Vec<AppRequest>,
}

impl Scenario {
    /// Node ids must equal their index; application ids must be unique.
    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.energy.validate()?;
        if self.nodes.is_empty() {
            return Err(Error::InvalidInput("scenario has no nodes".into()));
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.id != idx {
                return Err(Error::InvalidInput(format!(
                    "node ids must be 0..n in order; found id {} at position {idx}",
                    node.id
                )));
            }
            node.validate()?;
        }
        let mut ids = BTreeSet::new();
        for app in &self.apps {
            if !ids.insert(app.id) {
                return Err(Error::InvalidInput(format!("duplicate application id {}", app.id)));
            }
            app.validate()?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let file: ScenarioFile = parse_by_extension(path, &text)?;
        file.into_scenario()
    }
}

/// Parses JSON or TOML, chosen by file extension (JSON when unknown).
pub fn parse_by_extension<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResourceSpec {
    Preset(String),
    Vector(ResourceVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSpec {
    Preset(String),
    Vector(DemandVector),
}

fn default_sensing_range() -> f64 {
    DEFAULT_SENSING_RANGE
}

fn default_switch_cost() -> f64 {
    DEFAULT_SWITCH_COST
}

fn default_tp_cap() -> u32 {
    1
}

fn default_activity() -> f64 {
    DEFAULT_ACTIVITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub resources: ResourceSpec,
    #[serde(default)]
    pub is_sink: bool,
    #[serde(default = "default_switch_cost")]
    pub activation_cost: f64,
    #[serde(default = "default_sensing_range")]
    pub sensing_range: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPointEntry {
    pub id: TestPointId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppEntry {
    pub id: AppId,
    pub arrival: f64,
    #[serde(default = "default_activity")]
    pub activity: f64,
    pub demand: DemandSpec,
    pub test_points: Vec<TestPointEntry>,
    #[serde(default = "default_tp_cap")]
    pub max_tp_per_node: u32,
    #[serde(default = "default_switch_cost")]
    pub move_cost: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub max_tp_overrides: BTreeMap<NodeId, u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub move_cost_overrides: BTreeMap<NodeId, f64>,
}

/// On-disk scenario layout with flat coordinates and named presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default)]
    pub radio: RadioParams,
    #[serde(default)]
    pub energy: EnergyConstants,
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub apps: Vec<AppEntry>,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let nodes = self
            .nodes
            .into_iter()
            .map(|n| {
                let resources = match n.resources {
                    ResourceSpec::Vector(v) => v,
                    ResourceSpec::Preset(name) => resource_preset(&name).ok_or_else(|| {
                        Error::InvalidInput(format!("node {}: unknown resource preset {name:?}", n.id))
                    })?,
                };
                Ok(SensorNode {
                    id: n.id,
                    position: Point::new(n.x, n.y),
                    resources,
                    sensing_range: n.sensing_range,
                    is_sink: n.is_sink,
                    activation_cost: n.activation_cost,
                    tx_power: n.tx_power,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let apps = self
            .apps
            .into_iter()
            .map(|a| {
                let demand = match a.demand {
                    DemandSpec::Vector(v) => v,
                    DemandSpec::Preset(name) => demand_preset(&name).ok_or_else(|| {
                        Error::InvalidInput(format!("application {}: unknown demand preset {name:?}", a.id))
                    })?,
                };
                Ok(AppRequest {
                    id: a.id,
                    arrival: a.arrival,
                    activity: a.activity,
                    demand,
                    test_points: a
                        .test_points
                        .into_iter()
                        .map(|t| TestPoint { id: t.id, position: Point::new(t.x, t.y) })
                        .collect(),
                    max_tp_per_node: a.max_tp_per_node,
                    move_cost: a.move_cost,
                    max_tp_overrides: a.max_tp_overrides,
                    move_cost_overrides: a.move_cost_overrides,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario { radio: self.radio, energy: self.energy, nodes, apps };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            radio: s.radio,
            energy: s.energy,
            nodes: s
                .nodes
                .iter()
                .map(|n| NodeEntry {
                    id: n.id,
                    x: n.position.x,
                    y: n.position.y,
                    resources: ResourceSpec::Vector(n.resources),
                    is_sink: n.is_sink,
                    activation_cost: n.activation_cost,
                    sensing_range: n.sensing_range,
                    tx_power: n.tx_power,
                })
                .collect(),
            apps: s
                .apps
                .iter()
                .map(|a| AppEntry {
                    id: a.id,
                    arrival: a.arrival,
                    activity: a.activity,
                    demand: DemandSpec::Vector(a.demand),
                    test_points: a
                        .test_points
                        .iter()
                        .map(|t| TestPointEntry { id: t.id, x: t.position.x, y: t.position.y })
                        .collect(),
                    max_tp_per_node: a.max_tp_per_node,
                    move_cost: a.move_cost,
                    max_tp_overrides: a.max_tp_overrides.clone(),
                    move_cost_overrides: a.move_cost_overrides.clone(),
                })
                .collect(),
        }
    }
}
