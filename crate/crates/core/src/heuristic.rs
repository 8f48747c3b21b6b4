//! Greedy admission.
//!
//! Test points of the arriving app are placed one at a time on the covering
//! node whose route to the sink has the most energy left. When the preferred
//! node is already switched on but full, one of the test points it hosts may
//! be moved to another covering node to make room. Each trial runs on a copy
//! of the resource snapshot, which is only adopted if every budget stays
//! non-negative.

use std::collections::BTreeMap;

use crate::constraints::PlacementKey;
use crate::exact::{Decision, Outcome};
use crate::model::{AppId, AppRequest, NodeId, TestPointId};
use crate::sim::NetworkState;
use crate::topology::Topology;

/// Remaining budgets as seen by the greedy algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceSnapshot {
    pub now: f64,
    /// Free memory per node (bits).
    pub memory: Vec<f64>,
    /// Free processing per node (MIPS).
    pub processing: Vec<f64>,
    /// Energy left once every reserved charge is paid (J); infinite at sinks.
    pub energy: Vec<f64>,
    /// Free airtime share of each node's uplink.
    pub airtime: Vec<f64>,
    pub active: Vec<bool>,
    pub placements: BTreeMap<PlacementKey, NodeId>,
    hosted: BTreeMap<(NodeId, AppId), u32>,
}

impl ResourceSnapshot {
    pub fn from_state(state: &NetworkState, topology: &Topology) -> Self {
        let energy =
            (0..topology.len()).map(|i| if topology.is_sink(i) { f64::INFINITY } else { state.reserved[i] }).collect();
        let mut hosted = BTreeMap::new();
        for (&(app, _), &node) in &state.placements {
            *hosted.entry((node, app)).or_insert(0) += 1;
        }
        Self {
            now: state.clock,
            memory: state.available_memory(topology),
            processing: state.available_processing(topology),
            energy,
            airtime: state.available_airtime(topology),
            active: state.active.clone(),
            placements: state.placements.clone(),
            hosted,
        }
    }

    pub fn hosted(&self, node: NodeId, app: AppId) -> u32 {
        self.hosted.get(&(node, app)).copied().unwrap_or(0)
    }

    fn host(&mut self, key: PlacementKey, node: NodeId) {
        if let Some(old) = self.placements.insert(key, node) {
            if let Some(c) = self.hosted.get_mut(&(old, key.0)) {
                *c -= 1;
            }
        }
        *self.hosted.entry((node, key.0)).or_insert(0) += 1;
    }
}

/// Lowest committed energy along the route from `node`, sinks excluded.
pub fn energy_metric(node: NodeId, snapshot: &ResourceSnapshot, topology: &Topology) -> f64 {
    topology.paths[node]
        .iter()
        .filter(|&&h| !topology.is_sink(h))
        .map(|&h| snapshot.energy[h])
        .fold(f64::INFINITY, f64::min)
}

/// Extra hops the displaced data travels when moved from `current` to `candidate`.
pub fn move_cost(candidate: NodeId, current: NodeId, topology: &Topology) -> i64 {
    topology.hops[candidate] as i64 - topology.hops[current] as i64
}

/// Tracks which snapshot entries a trial touched so only those are checked.
struct Trial {
    snap: ResourceSnapshot,
    nodes: Vec<NodeId>,
    links: Vec<NodeId>,
}

impl Trial {
    fn new(snap: &ResourceSnapshot) -> Self {
        Self { snap: snap.clone(), nodes: Vec::new(), links: Vec::new() }
    }

    /// Charges `app`'s traffic along the route from `host`; `sign` is +1 to
    /// charge and -1 to credit. The host pays processing, relays pay reception.
    fn route(&mut self, app: &AppRequest, host: NodeId, sign: f64, topology: &Topology) {
        let d = &app.demand;
        let remaining = app.remaining(self.snap.now);
        for &g in &topology.paths[host] {
            if !topology.is_sink(g) {
                let tx = topology.tx_cost(g);
                let charge = if g == host {
                    remaining * (d.proc_power + d.rate * tx)
                } else {
                    remaining * d.rate * (topology.energy.rho + tx)
                };
                self.snap.energy[g] -= sign * charge;
                if sign > 0.0 && !self.snap.active[g] {
                    self.snap.energy[g] -= topology.nodes[g].activation_cost;
                }
                self.nodes.push(g);
            }
            if sign > 0.0 {
                self.snap.active[g] = true;
            }
            if topology.parent[g].is_some() {
                let share = sign * d.rate / topology.uplink_capacity(g);
                self.snap.airtime[g] -= share;
                self.links.push(g);
                for &h in &topology.interference[g] {
                    self.snap.airtime[h] -= share;
                    self.links.push(h);
                }
            }
        }
    }

    fn occupy(&mut self, app: &AppRequest, tp: TestPointId, node: NodeId) -> bool {
        if self.snap.hosted(node, app.id) + 1 > app.max_tp_on(node) {
            return false;
        }
        self.snap.memory[node] -= app.demand.memory;
        self.snap.processing[node] -= app.demand.load;
        if !self.snap.energy[node].is_infinite() {
            self.snap.energy[node] -= app.move_cost_on(node);
        }
        self.nodes.push(node);
        self.snap.host((app.id, tp), node);
        true
    }

    fn finish(self) -> Option<ResourceSnapshot> {
        let s = &self.snap;
        let nodes_ok = self.nodes.iter().all(|&i| s.memory[i] >= 0.0 && s.processing[i] >= 0.0 && s.energy[i] >= 0.0);
        let links_ok = self.links.iter().all(|&l| s.airtime[l] >= 0.0);
        (nodes_ok && links_ok).then_some(self.snap)
    }
}

/// Tries to place test point `tp` of `app` on `node`.
pub fn fits(
    app: &AppRequest,
    tp: TestPointId,
    node: NodeId,
    snapshot: &ResourceSnapshot,
    topology: &Topology,
) -> Option<ResourceSnapshot> {
    let mut trial = Trial::new(snapshot);
    if !trial.occupy(app, tp, node) {
        return None;
    }
    trial.route(app, node, 1.0, topology);
    trial.finish()
}

/// Tries to place `tp` of `app` on `node` after moving test point
/// `displaced_tp` of `displaced` from `node` to `destination`.
#[allow(clippy::too_many_arguments)]
pub fn fits_with_move(
    app: &AppRequest,
    tp: TestPointId,
    node: NodeId,
    displaced: &AppRequest,
    displaced_tp: TestPointId,
    destination: NodeId,
    snapshot: &ResourceSnapshot,
    topology: &Topology,
) -> Option<ResourceSnapshot> {
    let mut trial = Trial::new(snapshot);
    if !trial.occupy(displaced, displaced_tp, destination) {
        return None;
    }
    trial.route(displaced, destination, 1.0, topology);

    trial.snap.memory[node] += displaced.demand.memory;
    trial.snap.processing[node] += displaced.demand.load;
    trial.route(displaced, node, -1.0, topology);
    if !trial.occupy(app, tp, node) {
        return None;
    }
    trial.route(app, node, 1.0, topology);
    trial.finish()
}

/// Greedy admission of `arriving`; running apps only move to make room.
pub fn greedy_admit(state: &NetworkState, arriving: &AppRequest, topology: &Topology) -> Decision {
    let running: BTreeMap<AppId, &AppRequest> = state.running.iter().map(|a| (a.id, a)).collect();
    let mut snap = ResourceSnapshot::from_state(state, topology);
    for tp in &arriving.test_points {
        let mut candidates: Vec<(f64, NodeId)> =
            topology.covering(&tp.position).into_iter().map(|i| (energy_metric(i, &snap, topology), i)).collect();
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut sensed = false;
        for &(_, f) in &candidates {
            if let Some(next) = fits(arriving, tp.id, f, &snap, topology) {
                snap = next;
                sensed = true;
                break;
            }
            if !snap.active[f] {
                continue;
            }
            let mut moves: Vec<(i64, AppId, NodeId, TestPointId)> = Vec::new();
            for (&(j, k), &host) in &snap.placements {
                if host != f || j == arriving.id {
                    continue;
                }
                let Some(point) = running.get(&j).and_then(|a| a.test_point(k)) else {
                    continue;
                };
                for s in topology.covering(&point.position) {
                    if s != f {
                        moves.push((move_cost(s, f, topology), j, s, k));
                    }
                }
            }
            moves.sort();
            for (_, j, s, k) in moves {
                if let Some(next) = fits_with_move(arriving, tp.id, f, running[&j], k, s, &snap, topology) {
                    snap = next;
                    sensed = true;
                    break;
                }
            }
            if sensed {
                break;
            }
        }
        if !sensed {
            return Decision::refused(state, topology, Outcome::Rejected);
        }
    }
    Decision::admit(state, topology, snap.placements, None)
}
