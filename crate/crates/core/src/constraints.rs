//! Feasibility of a placement: flows, node budgets, airtime and residual energy.
//!
//! Every feasibility verdict in the crate goes through [`LoadTable`] and
//! [`ChargeModel`]. The exact solver updates a table incrementally while the
//! checkers here rebuild one from an [`Assignment`]; both evaluate the same
//! functions on the same integer counts, so they agree bit for bit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{AppId, AppRequest, NodeId, TestPointId};
use crate::sim::NetworkState;
use crate::topology::Topology;

/// Slack tolerated on memory, processing, test point caps and airtime.
pub const BUDGET_TOLERANCE: f64 = 1e-9;
/// Slack tolerated on residual energy (J).
pub const ENERGY_TOLERANCE: f64 = 1e-6;

pub type PlacementKey = (AppId, TestPointId);

/// Serde helper storing a placement map as a list, since JSON keys must be strings.
pub(crate) mod placement_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        app: AppId,
        test_point: TestPointId,
        node: NodeId,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<PlacementKey, NodeId>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|(&(app, test_point), &node)| Entry { app, test_point, node }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<PlacementKey, NodeId>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| ((e.app, e.test_point), e.node)).collect())
    }
}

/// Which node senses each test point, and the nodes that end up switched on.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(with = "placement_list")]
    pub placement: BTreeMap<PlacementKey, NodeId>,
    /// Hosts and relays on their routes, sinks included.
    pub active: BTreeSet<NodeId>,
}

impl Assignment {
    pub fn new(placement: BTreeMap<PlacementKey, NodeId>, topology: &Topology) -> Self {
        let mut active = BTreeSet::new();
        for &node in placement.values() {
            if node < topology.len() {
                active.extend(topology.paths[node].iter().copied());
            }
        }
        Self { placement, active }
    }

    /// Hosts in (app, test point) order.
    pub fn placement_vector(&self) -> Vec<NodeId> {
        self.placement.values().copied().collect()
    }
}

/// Per-app terms of the energy and budget accounting for one decision instant.
#[derive(Debug, Clone)]
pub(crate) struct AppTerms<'a> {
    pub app: &'a AppRequest,
    pub rate: f64,
    pub memory: f64,
    pub load: f64,
    pub proc_power: f64,
    /// Activity left at the decision instant (s).
    pub remaining: f64,
}

/// Integer occupancy counts per node and app.
///
/// `host` counts test points sensed at a node; `through` counts test points
/// whose data leaves or ends at the node (hosted ones included); `moved`
/// counts hosted test points that were not there before the decision.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LoadTable {
    apps: usize,
    host: Vec<u32>,
    through: Vec<u32>,
    moved: Vec<u32>,
}

impl LoadTable {
    pub fn new(nodes: usize, apps: usize) -> Self {
        Self { apps, host: vec![0; nodes * apps], through: vec![0; nodes * apps], moved: vec![0; nodes * apps] }
    }

    pub fn place(&mut self, topology: &Topology, app: usize, node: NodeId, moved: bool) {
        self.host[node * self.apps + app] += 1;
        if moved {
            self.moved[node * self.apps + app] += 1;
        }
        for &g in &topology.paths[node] {
            self.through[g * self.apps + app] += 1;
        }
    }

    pub fn unplace(&mut self, topology: &Topology, app: usize, node: NodeId, moved: bool) {
        self.host[node * self.apps + app] -= 1;
        if moved {
            self.moved[node * self.apps + app] -= 1;
        }
        for &g in &topology.paths[node] {
            self.through[g * self.apps + app] -= 1;
        }
    }

    pub fn host(&self, node: NodeId, app: usize) -> u32 {
        self.host[node * self.apps + app]
    }

    pub fn through(&self, node: NodeId, app: usize) -> u32 {
        self.through[node * self.apps + app]
    }

    pub fn is_active(&self, node: NodeId) -> bool {
        self.through[node * self.apps..(node + 1) * self.apps].iter().any(|&c| c > 0)
    }
}

/// Energy and budget evaluation at one decision instant.
#[derive(Debug, Clone)]
pub(crate) struct ChargeModel<'a> {
    pub topology: &'a Topology,
    pub apps: Vec<AppTerms<'a>>,
    index: BTreeMap<AppId, usize>,
    pub base_energy: &'a [f64],
    pub was_active: &'a [bool],
}

impl<'a> ChargeModel<'a> {
    /// `apps` may come in any order; they are indexed by ascending id.
    pub fn new(
        topology: &'a Topology,
        apps: &[&'a AppRequest],
        now: f64,
        base_energy: &'a [f64],
        was_active: &'a [bool],
    ) -> Self {
        let mut sorted: Vec<&AppRequest> = apps.to_vec();
        sorted.sort_by_key(|a| a.id);
        let terms: Vec<AppTerms> = sorted
            .iter()
            .map(|app| AppTerms {
                app,
                rate: app.demand.rate,
                memory: app.demand.memory,
                load: app.demand.load,
                proc_power: app.demand.proc_power,
                remaining: app.remaining(now),
            })
            .collect();
        let index = terms.iter().enumerate().map(|(a, t)| (t.app.id, a)).collect();
        Self { topology, apps: terms, index, base_energy, was_active }
    }

    pub fn from_state(topology: &'a Topology, state: &'a NetworkState, apps: &[&'a AppRequest]) -> Self {
        Self::new(topology, apps, state.clock, &state.energy, &state.active)
    }

    pub fn app_index(&self, id: AppId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn table(&self) -> LoadTable {
        LoadTable::new(self.topology.len(), self.apps.len())
    }

    /// Energy drawn at `node` over the remaining activity of every app.
    pub fn consumption(&self, table: &LoadTable, node: NodeId) -> f64 {
        let tx = self.topology.tx_cost(node);
        let rho = self.topology.energy.rho;
        let mut total = 0.0;
        for (a, t) in self.apps.iter().enumerate() {
            let through = table.through(node, a);
            let host = table.host(node, a);
            let out = through as f64 * t.rate;
            let inflow = (through - host) as f64 * t.rate;
            let proc = host as f64 * t.proc_power;
            total += t.remaining * (tx * out + rho * inflow + proc);
        }
        total
    }

    /// Instantaneous power drawn at `node` (W).
    pub fn power(&self, table: &LoadTable, node: NodeId) -> f64 {
        let tx = self.topology.tx_cost(node);
        let rho = self.topology.energy.rho;
        let mut total = 0.0;
        for (a, t) in self.apps.iter().enumerate() {
            let through = table.through(node, a);
            let host = table.host(node, a);
            total +=
                tx * (through as f64 * t.rate) + rho * ((through - host) as f64 * t.rate) + host as f64 * t.proc_power;
        }
        total
    }

    pub fn activation_charge(&self, table: &LoadTable, node: NodeId) -> f64 {
        if table.is_active(node) && !self.was_active[node] {
            self.topology.nodes[node].activation_cost
        } else {
            0.0
        }
    }

    pub fn move_charge(&self, table: &LoadTable, node: NodeId) -> f64 {
        let mut total = 0.0;
        for (a, t) in self.apps.iter().enumerate() {
            let moved = table.moved[node * table.apps + a];
            if moved > 0 {
                total += t.app.move_cost_on(node) * moved as f64;
            }
        }
        total
    }

    /// Residual energy of a non-sink node once every app has finished.
    pub fn lambda(&self, table: &LoadTable, node: NodeId) -> f64 {
        self.base_energy[node]
            - self.consumption(table, node)
            - self.activation_charge(table, node)
            - self.move_charge(table, node)
    }

    pub fn memory_used(&self, table: &LoadTable, node: NodeId) -> f64 {
        let mut total = 0.0;
        for (a, t) in self.apps.iter().enumerate() {
            total += table.host(node, a) as f64 * t.memory;
        }
        total
    }

    pub fn load_used(&self, table: &LoadTable, node: NodeId) -> f64 {
        let mut total = 0.0;
        for (a, t) in self.apps.iter().enumerate() {
            total += table.host(node, a) as f64 * t.load;
        }
        total
    }

    pub fn memory_slack(&self, table: &LoadTable, node: NodeId) -> f64 {
        self.topology.nodes[node].resources.storage - self.memory_used(table, node)
    }

    pub fn load_slack(&self, table: &LoadTable, node: NodeId) -> f64 {
        self.topology.nodes[node].resources.processing - self.load_used(table, node)
    }

    pub fn cap_slack(&self, table: &LoadTable, node: NodeId, app: usize) -> f64 {
        self.apps[app].app.max_tp_on(node) as f64 - table.host(node, app) as f64
    }

    /// Aggregate rate on the uplink of `node` (bit/s).
    pub fn uplink_flow(&self, table: &LoadTable, node: NodeId) -> f64 {
        if self.topology.parent[node].is_none() {
            return 0.0;
        }
        let mut total = 0.0;
        for (a, t) in self.apps.iter().enumerate() {
            total += table.through(node, a) as f64 * t.rate;
        }
        total
    }

    pub fn utilization(&self, table: &LoadTable, node: NodeId) -> f64 {
        let mut total = 0.0;
        for &l in self.topology.airtime_group(node) {
            total += self.uplink_flow(table, l) / self.topology.uplink_capacity(l);
        }
        total
    }

    pub fn is_flowing(&self, table: &LoadTable, node: NodeId) -> bool {
        self.topology.parent[node].is_some() && table.is_active(node)
    }
}

/// Data rates implied by an assignment, routed along the fixed tree.
#[derive(Debug, Clone)]
pub struct FlowMap {
    apps: Vec<AppId>,
    rates: Vec<f64>,
    parent: Vec<Option<NodeId>>,
    sinks: Vec<NodeId>,
    capacity: Vec<f64>,
    airtime_group: Vec<Vec<NodeId>>,
    table: LoadTable,
}

impl FlowMap {
    fn app_pos(&self, app: AppId) -> Option<usize> {
        self.apps.binary_search(&app).ok()
    }

    /// Rate of `app` on the directed link `(i, h)` (bit/s); zero off the tree.
    pub fn flow(&self, i: NodeId, h: NodeId, app: AppId) -> f64 {
        match (self.parent[i], self.app_pos(app)) {
            (Some(p), Some(a)) if p == h => self.table.through(i, a) as f64 * self.rates[a],
            _ => 0.0,
        }
    }

    pub fn aggregate(&self, i: NodeId, h: NodeId) -> f64 {
        if self.parent[i] != Some(h) {
            return 0.0;
        }
        let mut total = 0.0;
        for a in 0..self.apps.len() {
            total += self.table.through(i, a) as f64 * self.rates[a];
        }
        total
    }

    /// Rate generated at node `i` by `app` (bit/s).
    pub fn generated(&self, i: NodeId, app: AppId) -> f64 {
        self.app_pos(app).map_or(0.0, |a| self.table.host(i, a) as f64 * self.rates[a])
    }

    /// Rate of `app` received by node `i` from its children (bit/s).
    pub fn inflow(&self, i: NodeId, app: AppId) -> f64 {
        self.app_pos(app).map_or(0.0, |a| (self.table.through(i, a) - self.table.host(i, a)) as f64 * self.rates[a])
    }

    pub fn total_generated(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.parent.len() {
            for a in 0..self.apps.len() {
                total += self.table.host(i, a) as f64 * self.rates[a];
            }
        }
        total
    }

    /// Traffic received by sinks plus traffic they generate themselves.
    pub fn collected(&self) -> f64 {
        let mut total = 0.0;
        for &s in &self.sinks {
            for a in 0..self.apps.len() {
                total += self.table.through(s, a) as f64 * self.rates[a];
            }
        }
        total
    }

    pub fn is_flowing(&self, i: NodeId) -> bool {
        self.parent[i].is_some() && self.table.is_active(i)
    }

    pub fn apps(&self) -> &[AppId] {
        &self.apps
    }
}

/// Routes every placed test point along its tree path.
///
/// Placements referring to unknown applications or nodes are ignored here and
/// reported by [`check_full`].
pub fn derive_flows(assignment: &Assignment, topology: &Topology, active_apps: &[AppRequest]) -> FlowMap {
    let mut sorted: Vec<&AppRequest> = active_apps.iter().collect();
    sorted.sort_by_key(|a| a.id);
    let apps: Vec<AppId> = sorted.iter().map(|a| a.id).collect();
    let rates = sorted.iter().map(|a| a.demand.rate).collect();
    let mut table = LoadTable::new(topology.len(), apps.len());
    for (&(app, _), &node) in &assignment.placement {
        if let (Ok(a), true) = (apps.binary_search(&app), node < topology.len()) {
            table.place(topology, a, node, false);
        }
    }
    FlowMap {
        apps,
        rates,
        parent: topology.parent.clone(),
        sinks: topology.sinks().collect(),
        capacity: (0..topology.len()).map(|i| topology.uplink_capacity(i)).collect(),
        airtime_group: (0..topology.len()).map(|i| topology.airtime_group(i).to_vec()).collect(),
        table,
    }
}

/// Share of airtime used by the uplink `(i, h)` and every link conflicting with it.
pub fn airtime_utilization(flows: &FlowMap, topology: &Topology, link: (NodeId, NodeId)) -> f64 {
    let (i, h) = link;
    if topology.parent[i] != Some(h) {
        return 0.0;
    }
    let mut total = 0.0;
    for &l in &flows.airtime_group[i] {
        let p = flows.parent[l].expect("tree link");
        total += flows.aggregate(l, p) / flows.capacity[l];
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    Coverage,
    TestPointCap,
    Memory,
    Processing,
    Airtime,
    Energy,
}

impl ConstraintFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Coverage => "coverage",
            Self::TestPointCap => "test-point cap",
            Self::Memory => "memory",
            Self::Processing => "processing",
            Self::Airtime => "airtime",
            Self::Energy => "energy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Node(NodeId),
    Link(NodeId, NodeId),
    TestPoint(AppId, TestPointId),
    AppOnNode(AppId, NodeId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: ConstraintFamily,
    pub subject: Subject,
    /// Capacity minus usage; negative when violated.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self { feasible: violations.is_empty(), violations }
    }

    pub fn first_family(&self) -> Option<ConstraintFamily> {
        self.violations.first().map(|v| v.family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEnergy {
    pub node: NodeId,
    /// Residual energy once all running apps finish (J).
    pub lambda: f64,
    pub consumption: f64,
    pub activation_charge: f64,
    pub move_charge: f64,
}

/// Residual energy of every non-sink node, ascending by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyOutcome {
    pub nodes: Vec<NodeEnergy>,
}

impl EnergyOutcome {
    pub fn lambda(&self, node: NodeId) -> Option<f64> {
        self.nodes.iter().find(|n| n.node == node).map(|n| n.lambda)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.lambda).collect()
    }

    pub fn feasible(&self) -> bool {
        self.nodes.iter().all(|n| n.lambda >= -ENERGY_TOLERANCE)
    }
}

fn known_apps(active_apps: &[AppRequest]) -> Vec<&AppRequest> {
    active_apps.iter().collect()
}

/// Rebuilds the occupancy table of an assignment, marking placements that differ from `prior`.
fn table_for(
    model: &ChargeModel,
    assignment: &Assignment,
    prior: Option<&BTreeMap<PlacementKey, NodeId>>,
) -> LoadTable {
    let mut table = model.table();
    for (key, &node) in &assignment.placement {
        if let (Some(a), true) = (model.app_index(key.0), node < model.topology.len()) {
            let moved = prior.is_some_and(|p| p.get(key) != Some(&node));
            table.place(model.topology, a, node, moved);
        }
    }
    table
}

pub(crate) fn outcome_from_table(model: &ChargeModel, table: &LoadTable) -> EnergyOutcome {
    let nodes = model
        .topology
        .non_sinks()
        .map(|i| NodeEnergy {
            node: i,
            lambda: model.lambda(table, i),
            consumption: model.consumption(table, i),
            activation_charge: model.activation_charge(table, i),
            move_charge: model.move_charge(table, i),
        })
        .collect();
    EnergyOutcome { nodes }
}

/// Residual energies after the remaining activity of every app in `active_apps`,
/// charging activation for nodes switched on and moving cost for new placements.
pub fn compute_energy_outcome(
    state: &NetworkState,
    assignment: &Assignment,
    active_apps: &[AppRequest],
    topology: &Topology,
) -> EnergyOutcome {
    let apps = known_apps(active_apps);
    let model = ChargeModel::from_state(topology, state, &apps);
    let table = table_for(&model, assignment, Some(&state.placements));
    outcome_from_table(&model, &table)
}

fn budget_violations(model: &ChargeModel, table: &LoadTable, out: &mut Vec<Violation>) {
    for i in 0..model.topology.len() {
        for (a, t) in model.apps.iter().enumerate() {
            let slack = model.cap_slack(table, i, a);
            if slack < 0.0 {
                out.push(Violation {
                    family: ConstraintFamily::TestPointCap,
                    subject: Subject::AppOnNode(t.app.id, i),
                    slack,
                });
            }
        }
        let slack = model.memory_slack(table, i);
        if slack < -BUDGET_TOLERANCE {
            out.push(Violation { family: ConstraintFamily::Memory, subject: Subject::Node(i), slack });
        }
        let slack = model.load_slack(table, i);
        if slack < -BUDGET_TOLERANCE {
            out.push(Violation { family: ConstraintFamily::Processing, subject: Subject::Node(i), slack });
        }
    }
}

/// Memory, processing and per-app test point caps at every node.
pub fn check_node_budgets(assignment: &Assignment, apps: &[AppRequest], topology: &Topology) -> FeasibilityReport {
    let refs = known_apps(apps);
    let zeros = vec![0.0; topology.len()];
    let off = vec![false; topology.len()];
    let model = ChargeModel::new(topology, &refs, 0.0, &zeros, &off);
    let table = table_for(&model, assignment, None);
    let mut violations = Vec::new();
    budget_violations(&model, &table, &mut violations);
    FeasibilityReport::from_violations(violations)
}

fn coverage_violations(
    assignment: &Assignment,
    active_apps: &[AppRequest],
    topology: &Topology,
    out: &mut Vec<Violation>,
) {
    let mut expected = BTreeSet::new();
    for app in active_apps {
        for tp in &app.test_points {
            expected.insert((app.id, tp.id));
            let slack = match assignment.placement.get(&(app.id, tp.id)) {
                None => -1.0,
                Some(&node) if node >= topology.len() => -1.0,
                Some(&node) => {
                    let n = &topology.nodes[node];
                    n.sensing_range - n.position.distance(&tp.position)
                }
            };
            if slack < 0.0 {
                out.push(Violation {
                    family: ConstraintFamily::Coverage,
                    subject: Subject::TestPoint(app.id, tp.id),
                    slack,
                });
            }
        }
    }
    for key in assignment.placement.keys() {
        if !expected.contains(key) {
            out.push(Violation {
                family: ConstraintFamily::Coverage,
                subject: Subject::TestPoint(key.0, key.1),
                slack: -1.0,
            });
        }
    }
}

pub(crate) fn airtime_and_energy_violations(model: &ChargeModel, table: &LoadTable, out: &mut Vec<Violation>) {
    let topo = model.topology;
    for (i, h) in topo.tree_links() {
        if model.is_flowing(table, i) {
            let slack = 1.0 - model.utilization(table, i);
            if slack < -BUDGET_TOLERANCE {
                out.push(Violation { family: ConstraintFamily::Airtime, subject: Subject::Link(i, h), slack });
            }
        }
    }
    for i in topo.non_sinks() {
        let lambda = model.lambda(table, i);
        if lambda < -ENERGY_TOLERANCE {
            out.push(Violation { family: ConstraintFamily::Energy, subject: Subject::Node(i), slack: lambda });
        }
    }
}

/// Every constraint of the per-arrival problem: coverage, budgets, airtime on
/// flowing links, and non-negative residual energy at non-sink nodes.
pub fn check_full(
    state: &NetworkState,
    assignment: &Assignment,
    active_apps: &[AppRequest],
    topology: &Topology,
) -> FeasibilityReport {
    let mut violations = Vec::new();
    coverage_violations(assignment, active_apps, topology, &mut violations);
    let apps = known_apps(active_apps);
    let model = ChargeModel::from_state(topology, state, &apps);
    let table = table_for(&model, assignment, Some(&state.placements));
    budget_violations(&model, &table, &mut violations);
    airtime_and_energy_violations(&model, &table, &mut violations);
    FeasibilityReport::from_violations(violations)
}
