//! Small random instances shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vsnslice_core::exact::Objective;
use vsnslice_core::sim::{SimOptions, Simulation};
use vsnslice_core::{
    build_topology, preset_beaglebone, preset_visual_app, AppRequest, EnergyConstants, NetworkState, Point,
    RadioParams, Scenario, SensorNode, Strategy, TestPoint, Topology,
};

/// An arrival to decide on top of a state built by earlier arrivals.
pub struct TinyArrival {
    pub scenario: Scenario,
    pub topology: Topology,
    pub state: NetworkState,
    pub arriving: AppRequest,
}

/// Bounds on the size of a tiny instance.
#[derive(Debug, Clone, Copy)]
pub struct TinyShape {
    pub max_nodes: usize,
    pub max_apps: usize,
    pub max_tps: usize,
}

impl Default for TinyShape {
    fn default() -> Self {
        Self { max_nodes: 6, max_apps: 3, max_tps: 2 }
    }
}

/// One sink at the origin plus up to `max_nodes - 1` nodes within two hops,
/// with budgets drawn low enough that memory, processing, airtime and energy
/// all bind now and then.
pub fn tiny_nodes(rng: &mut ChaCha8Rng, max_nodes: usize) -> (Vec<SensorNode>, Topology) {
    loop {
        let n = rng.random_range(2..=max_nodes.max(2));
        let mut nodes = Vec::with_capacity(n);
        let mut sink = SensorNode::new(0, Point::new(0.0, 0.0), preset_beaglebone(), true);
        sink.sensing_range = rng.random_range(1.0..20.0);
        nodes.push(sink);
        for i in 1..n {
            let pos = Point::new(rng.random_range(-45.0..45.0), rng.random_range(-45.0..45.0));
            let mut node = SensorNode::new(i, pos, preset_beaglebone(), false);
            node.sensing_range = rng.random_range(20.0..45.0);
            node.activation_cost = rng.random_range(0.0..200.0);
            node.resources.processing = rng.random_range(60.0..300.0);
            node.resources.energy = rng.random_range(2_000.0..32_400.0);
            node.resources.bandwidth = rng.random_range(15_000.0..250_000.0);
            if rng.random_bool(0.2) {
                node.resources.storage = 842.0 * 8.0 * 1024.0 * rng.random_range(1.0..3.0);
            }
            nodes.push(node);
        }
        if let Ok(topology) = build_topology(&nodes, &RadioParams::reference(), &EnergyConstants::reference()) {
            return (nodes, topology);
        }
    }
}

/// An app arriving at `arrival` whose test points each have at least one
/// covering node.
pub fn tiny_app(
    rng: &mut ChaCha8Rng,
    id: usize,
    arrival: f64,
    activity: f64,
    max_tps: usize,
    topology: &Topology,
) -> AppRequest {
    let tps = rng.random_range(1..=max_tps.max(1));
    let mut test_points = Vec::with_capacity(tps);
    while test_points.len() < tps {
        let p = Point::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
        if !topology.covering(&p).is_empty() {
            test_points.push(TestPoint { id: test_points.len(), position: p });
        }
    }
    AppRequest {
        id,
        arrival,
        activity,
        demand: preset_visual_app(),
        test_points,
        max_tp_per_node: rng.random_range(1..=2),
        move_cost: rng.random_range(0.0..100.0),
        max_tp_overrides: Default::default(),
        move_cost_overrides: Default::default(),
    }
}

fn search_space(apps: &[AppRequest], topology: &Topology) -> f64 {
    apps.iter().flat_map(|a| a.test_points.iter()).map(|tp| topology.covering(&tp.position).len() as f64).product()
}

/// A random arrival with up to `max_apps - 1` apps already running. Earlier
/// arrivals are decided by the feasibility-only solver.
pub fn tiny_arrival(seed: u64, shape: TinyShape) -> TinyArrival {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (nodes, topology) = tiny_nodes(&mut rng, shape.max_nodes);
        let count = rng.random_range(1..=shape.max_apps.max(1));
        let apps: Vec<AppRequest> = (0..count)
            .map(|j| {
                let activity = rng.random_range(6_000.0..20_000.0);
                tiny_app(&mut rng, j, 100.0 * j as f64, activity, shape.max_tps, &topology)
            })
            .collect();
        if search_space(&apps, &topology) > 20_000.0 {
            continue;
        }
        let scenario = Scenario { radio: RadioParams::reference(), energy: EnergyConstants::reference(), nodes, apps };
        let last = scenario.apps[count - 1].id;
        let options = SimOptions::default();
        let (state, arriving) = {
            let mut sim = Simulation::new(&scenario, &topology, Strategy::Exact(Objective::OnlyRestrictions), options);
            let arriving = sim.run_until_arrival(last).expect("last app arrives").clone();
            (sim.state().clone(), arriving)
        };
        return TinyArrival { scenario, topology, state, arriving };
    }
}

/// A short workload on a tiny network: `apps` arrivals spread over a few
/// activity times so that some overlap and some do not.
pub fn tiny_workload(seed: u64, max_nodes: usize, apps: usize, max_tps: usize) -> (Scenario, Topology) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nodes, topology) = tiny_nodes(&mut rng, max_nodes);
    let mut arrival = 0.0;
    let list = (0..apps)
        .map(|j| {
            arrival += rng.random_range(0.0..8_000.0);
            let activity = rng.random_range(4_000.0..18_000.0);
            tiny_app(&mut rng, j, arrival, activity, max_tps, &topology)
        })
        .collect();
    let scenario =
        Scenario { radio: RadioParams::reference(), energy: EnergyConstants::reference(), nodes, apps: list };
    (scenario, topology)
}

/// Flow conservation at every non-sink node, the throughput identity and
/// the airtime budget of every flowing link, for the placements in `state`.
pub fn check_flows(state: &NetworkState, topology: &Topology) -> Result<(), String> {
    let flows = state.flows(topology);
    for &app in flows.apps() {
        for i in topology.non_sinks() {
            let Some(up) = topology.parent[i] else { continue };
            let children: f64 =
                (0..topology.len()).filter(|&c| topology.parent[c] == Some(i)).map(|c| flows.flow(c, i, app)).sum();
            let out = flows.flow(i, up, app);
            let into = children + flows.generated(i, app);
            if (into - out).abs() > 1e-9 * out.abs().max(1.0) {
                return Err(format!("app {app}: node {i} takes in {into} but sends {out}"));
            }
        }
    }
    let demanded: f64 = state.running.iter().map(|a| a.test_points.len() as f64 * a.demand.rate).sum();
    let collected = flows.collected();
    if (demanded - collected).abs() > 1e-9 * demanded.max(1.0) {
        return Err(format!("sinks collect {collected} of {demanded} bit/s"));
    }
    for i in topology.non_sinks() {
        let Some(up) = topology.parent[i] else { continue };
        if flows.is_flowing(i) {
            let used = vsnslice_core::constraints::airtime_utilization(&flows, topology, (i, up));
            if used > 1.0 + 1e-9 {
                return Err(format!("link {i}->{up} uses {used} of its airtime"));
            }
        }
    }
    Ok(())
}

/// Runs a whole simulation, checking after every event that committed
/// decisions are feasible, rejections leave the state untouched, flows stay
/// consistent and no battery ever gains energy.
pub fn run_checked(
    scenario: &Scenario,
    topology: &Topology,
    strategy: Strategy,
    options: SimOptions,
) -> Result<vsnslice_core::sim::Metrics, String> {
    let options = SimOptions { keep_prior_states: true, ..options };
    let mut sim = Simulation::new(scenario, topology, strategy, options);
    let mut previous = sim.state().energy.clone();
    while let Some(record) = sim.step() {
        let state = sim.state();
        if let (Some(decision), Some(prior)) = (&record.decision, &record.prior) {
            let app = &scenario.apps.iter().find(|a| a.id == record.event.app).expect("known app");
            if decision.accepted() {
                let report = vsnslice_core::check_full(prior, &decision.assignment, &prior.apps_with(app), topology);
                if !report.feasible {
                    return Err(format!("{strategy}: app {} admitted infeasibly: {:?}", app.id, report.violations));
                }
            } else {
                let before = serde_json::to_string(prior.as_ref()).expect("state serializes");
                let after = serde_json::to_string(state).expect("state serializes");
                if before != after {
                    return Err(format!("{strategy}: rejecting app {} changed the state", app.id));
                }
            }
        }
        check_flows(state, topology).map_err(|e| format!("{strategy} at t={}: {e}", state.clock))?;
        for i in topology.non_sinks() {
            if state.energy[i] > previous[i] + 1e-9 * previous[i].abs().max(1.0) {
                return Err(format!("{strategy}: node {i} gained energy at t={}", state.clock));
            }
        }
        previous = state.energy.clone();
    }
    Ok(sim.finish())
}
