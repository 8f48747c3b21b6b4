use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constraints::{
    compute_energy_outcome, derive_flows, placement_list, Assignment, ChargeModel, FlowMap, PlacementKey,
};
use crate::exact::Decision;
use crate::model::{AppId, AppRequest, NodeId};
use crate::topology::Topology;

/// The mutable world between events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub clock: f64,
    /// Battery energy right now (J). Sink entries are never charged.
    pub energy: Vec<f64>,
    /// Energy left once every running app finishes (J).
    pub reserved: Vec<f64>,
    /// Switched-on flags.
    pub active: Vec<bool>,
    #[serde(with = "placement_list")]
    pub placements: BTreeMap<PlacementKey, NodeId>,
    /// Running applications, ascending by id.
    pub running: Vec<AppRequest>,
}

impl NetworkState {
    pub fn new(topology: &Topology) -> Self {
        let energy: Vec<f64> = topology.nodes.iter().map(|n| n.resources.energy).collect();
        Self {
            clock: 0.0,
            reserved: energy.clone(),
            energy,
            active: vec![false; topology.len()],
            placements: BTreeMap::new(),
            running: Vec::new(),
        }
    }

    pub fn assignment(&self, topology: &Topology) -> Assignment {
        Assignment::new(self.placements.clone(), topology)
    }

    pub fn flows(&self, topology: &Topology) -> FlowMap {
        derive_flows(&self.assignment(topology), topology, &self.running)
    }

    /// Running apps plus `arriving`, ascending by id.
    pub fn apps_with(&self, arriving: &AppRequest) -> Vec<AppRequest> {
        let mut apps: Vec<AppRequest> = self.running.iter().filter(|a| a.id != arriving.id).cloned().collect();
        apps.push(arriving.clone());
        apps.sort_by_key(|a| a.id);
        apps
    }

    fn charge_model<'a>(&'a self, topology: &'a Topology) -> (ChargeModel<'a>, crate::constraints::LoadTable) {
        let apps: Vec<&AppRequest> = self.running.iter().collect();
        let model = ChargeModel::from_state(topology, self, &apps);
        let mut table = model.table();
        for (&(app, _), &node) in &self.placements {
            if let Some(a) = model.app_index(app) {
                table.place(topology, a, node, false);
            }
        }
        (model, table)
    }

    pub fn available_memory(&self, topology: &Topology) -> Vec<f64> {
        let (model, table) = self.charge_model(topology);
        (0..topology.len()).map(|i| model.memory_slack(&table, i)).collect()
    }

    pub fn available_processing(&self, topology: &Topology) -> Vec<f64> {
        let (model, table) = self.charge_model(topology);
        (0..topology.len()).map(|i| model.load_slack(&table, i)).collect()
    }

    /// Unused airtime share of each node's uplink; 1 for sinks.
    pub fn available_airtime(&self, topology: &Topology) -> Vec<f64> {
        let (model, table) = self.charge_model(topology);
        (0..topology.len())
            .map(|i| if topology.parent[i].is_some() { 1.0 - model.utilization(&table, i) } else { 1.0 })
            .collect()
    }

    /// Power drawn by each node under the current placements (W); zero for sinks.
    pub fn power(&self, topology: &Topology) -> Vec<f64> {
        let (model, table) = self.charge_model(topology);
        (0..topology.len()).map(|i| if topology.is_sink(i) { 0.0 } else { model.power(&table, i) }).collect()
    }

    pub fn total_energy(&self, topology: &Topology) -> f64 {
        topology.non_sinks().map(|i| self.energy[i]).sum()
    }

    pub fn is_running(&self, app: AppId) -> bool {
        self.running.iter().any(|a| a.id == app)
    }
}

/// Drains `dt` seconds of the current power draw and moves the clock forward.
pub fn advance_energy(state: &mut NetworkState, dt: f64, topology: &Topology) {
    assert!(dt >= 0.0, "time cannot run backwards");
    if dt > 0.0 && !state.placements.is_empty() {
        let power = state.power(topology);
        for i in topology.non_sinks() {
            state.energy[i] -= dt * power[i];
        }
    }
    state.clock += dt;
}

/// Commits an accepted decision: one-off charges, reservations, placements.
pub fn apply_decision(state: &mut NetworkState, arriving: &AppRequest, decision: &Decision, topology: &Topology) {
    if !decision.accepted() {
        return;
    }
    let apps = state.apps_with(arriving);
    let outcome = compute_energy_outcome(state, &decision.assignment, &apps, topology);
    for n in &outcome.nodes {
        state.energy[n.node] -= n.activation_charge + n.move_charge;
        state.reserved[n.node] = n.lambda;
    }
    state.active = (0..topology.len()).map(|i| decision.assignment.active.contains(&i)).collect();
    state.placements = decision.assignment.placement.clone();
    state.running = apps;
}

/// Removes a finished application and switches off nodes left idle.
pub fn release(state: &mut NetworkState, app: AppId, topology: &Topology) {
    state.running.retain(|a| a.id != app);
    state.placements.retain(|k, _| k.0 != app);
    let active = state.assignment(topology).active;
    state.active = (0..topology.len()).map(|i| active.contains(&i)).collect();
}
