use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    preset_beaglebone, preset_visual_app, AppRequest, DemandVector, EnergyConstants, Point, RadioParams,
    ResourceVector, Scenario, SensorNode, TestPoint, DEFAULT_ACTIVITY, DEFAULT_SENSING_RANGE, DEFAULT_SWITCH_COST,
};
use crate::topology::{build_topology, Topology};

const TOPOLOGY_ATTEMPTS: usize = 10_000;
const TEST_POINT_ATTEMPTS: usize = 100_000;

/// Parameters of a randomly generated workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Side of the square deployment area (m).
    pub area_side: f64,
    pub node_count: usize,
    pub sink_count: usize,
    pub app_count: usize,
    /// Mean arrivals per hour of the Poisson process.
    pub arrival_rate_per_hour: f64,
    /// Activity time of every application (s).
    pub activity: f64,
    pub test_points_per_app: usize,
    pub max_tp_per_node: u32,
    pub activation_cost: f64,
    pub move_cost: f64,
    pub sensing_range: f64,
    pub node_resources: ResourceVector,
    pub demand: DemandVector,
    pub radio: RadioParams,
    pub energy: EnergyConstants,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::preset(1).expect("preset 1 exists")
    }
}

/// (nodes, sinks, apps, arrivals per hour, area side) of the six reference scenarios.
const PRESETS: [(usize, usize, usize, f64, f64); 6] = [
    (18, 1, 100, 0.5, 100.0),
    (36, 2, 200, 1.0, 141.0),
    (54, 3, 300, 1.5, 173.0),
    (72, 4, 400, 2.0, 200.0),
    (90, 5, 500, 2.5, 224.0),
    (108, 6, 600, 3.0, 245.0),
];

impl ScenarioConfig {
    /// Reference scenario `n` in 1..=6; all share the same node density.
    pub fn preset(n: usize) -> Result<Self> {
        let &(node_count, sink_count, app_count, rate, side) = n
            .checked_sub(1)
            .and_then(|i| PRESETS.get(i))
            .ok_or_else(|| Error::InvalidInput(format!("unknown scenario preset {n}; expected 1..=6")))?;
        Ok(Self {
            area_side: side,
            node_count,
            sink_count,
            app_count,
            arrival_rate_per_hour: rate,
            activity: DEFAULT_ACTIVITY,
            test_points_per_app: 3,
            max_tp_per_node: 1,
            activation_cost: DEFAULT_SWITCH_COST,
            move_cost: DEFAULT_SWITCH_COST,
            sensing_range: DEFAULT_SENSING_RANGE,
            node_resources: preset_beaglebone(),
            demand: preset_visual_app(),
            radio: RadioParams::reference(),
            energy: EnergyConstants::reference(),
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.area_side.is_finite() && self.area_side > 0.0) {
            return bad("area side must be positive");
        }
        if self.node_count == 0 || self.sink_count == 0 {
            return bad("node and sink counts must be positive");
        }
        if self.sink_count > self.node_count {
            return bad("more sinks than nodes");
        }
        if self.test_points_per_app == 0 {
            return bad("applications need at least one test point");
        }
        if self.max_tp_per_node == 0 {
            return bad("per-node test point cap must be at least 1");
        }
        if !(self.arrival_rate_per_hour.is_finite() && self.arrival_rate_per_hour > 0.0) {
            return bad("arrival rate must be positive");
        }
        if !(self.activity.is_finite() && self.activity > 0.0) {
            return bad("activity time must be positive");
        }
        if !(self.activation_cost >= 0.0 && self.move_cost >= 0.0) {
            return bad("switching costs must be non-negative");
        }
        self.radio.validate()?;
        self.energy.validate()
    }
}

/// Anchor points on a near-square grid; sinks are the nodes closest to them.
fn anchors(count: usize, side: f64) -> Vec<Point> {
    let cols = (count as f64).sqrt().ceil() as usize;
    let rows = count.div_ceil(cols);
    (0..count)
        .map(|k| {
            let (r, c) = (k / cols, k % cols);
            Point::new((c as f64 + 0.5) * side / cols as f64, (r as f64 + 0.5) * side / rows as f64)
        })
        .collect()
}

fn place_nodes(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<SensorNode> {
    let side = config.area_side;
    let positions: Vec<Point> =
        (0..config.node_count).map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side)).collect();
    let mut is_sink = vec![false; positions.len()];
    for anchor in anchors(config.sink_count, side) {
        let nearest = (0..positions.len())
            .filter(|&i| !is_sink[i])
            .min_by(|&a, &b| positions[a].distance(&anchor).total_cmp(&positions[b].distance(&anchor)))
            .expect("sink count does not exceed node count");
        is_sink[nearest] = true;
    }
    positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| SensorNode {
            id: i,
            position: p,
            resources: config.node_resources,
            sensing_range: config.sensing_range,
            is_sink: is_sink[i],
            activation_cost: config.activation_cost,
            tx_power: None,
        })
        .collect()
}

/// Random connected topology and Poisson workload, reproducible from the seed.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<(Scenario, Topology)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut built = None;
    for _ in 0..TOPOLOGY_ATTEMPTS {
        let nodes = place_nodes(config, &mut rng);
        match build_topology(&nodes, &config.radio, &config.energy) {
            Ok(t) => {
                built = Some((nodes, t));
                break;
            }
            Err(Error::Disconnected { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let (nodes, topology) = built.ok_or(Error::GenerationFailed { attempts: TOPOLOGY_ATTEMPTS })?;

    let gaps = Exp::new(config.arrival_rate_per_hour / 3600.0)
        .map_err(|e| Error::InvalidInput(format!("arrival rate: {e}")))?;
    let side = config.area_side;
    let mut clock = 0.0;
    let mut apps = Vec::with_capacity(config.app_count);
    for id in 0..config.app_count {
        clock += gaps.sample(&mut rng);
        let mut test_points = Vec::with_capacity(config.test_points_per_app);
        for k in 0..config.test_points_per_app {
            let mut tries = 0;
            let position = loop {
                let p = Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side);
                if nodes.iter().any(|n| n.covers(&p)) {
                    break p;
                }
                tries += 1;
                if tries >= TEST_POINT_ATTEMPTS {
                    return Err(Error::InvalidInput("sensing discs cover almost none of the area".into()));
                }
            };
            test_points.push(TestPoint { id: k, position });
        }
        apps.push(AppRequest {
            id,
            arrival: clock,
            activity: config.activity,
            demand: config.demand,
            test_points,
            max_tp_per_node: config.max_tp_per_node,
            move_cost: config.move_cost,
            max_tp_overrides: Default::default(),
            move_cost_overrides: Default::default(),
        });
    }
    let scenario = Scenario { radio: config.radio, energy: config.energy, nodes, apps };
    Ok((scenario, topology))
}
