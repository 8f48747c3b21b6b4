//! Exact per-arrival solver and its brute-force oracle.
//!
//! On every arrival the whole running set is re-placed: each test point of
//! each running app (and of the newcomer) picks one covering node. The solver
//! is a depth-first branch and bound with forward checking: after every
//! placement the candidates of the remaining test points are filtered down to
//! those that still fit. The newcomer's test points are branched on first,
//! then the running ones with the fewest candidates left.
//!
//! Short dives that move at most a few running test points seed an incumbent.
//! A full pass then finds the optimal value, and a final pass fixes test
//! points in (app id, test point id) order to the lowest node that still
//! reaches it, which gives the lexicographically smallest optimum. Feasibility
//! alone (`OnlyRestrictions`) takes the first placement the full pass meets,
//! trying candidates in ascending node order.
//!
//! Every placement attempt counts against [`SolverConfig::max_expansions`].
//! When it runs out the best placement seen so far is admitted unproven, or
//! the arrival is reported [`Outcome::Unsolved`] if there is none.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constraints::{
    check_full, compute_energy_outcome, Assignment, ChargeModel, EnergyOutcome, LoadTable, PlacementKey,
    BUDGET_TOLERANCE, ENERGY_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::model::{AppRequest, NodeId};
use crate::sim::NetworkState;
use crate::topology::Topology;

/// Largest number of placement vectors the oracle will enumerate.
pub const ORACLE_GUARD: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    OnlyRestrictions,
    Total,
    MaxMin,
    Mixed,
}

impl Objective {
    pub const ALL: [Objective; 4] = [Self::OnlyRestrictions, Self::Total, Self::MaxMin, Self::Mixed];

    pub fn name(&self) -> &'static str {
        match self {
            Self::OnlyRestrictions => "or",
            Self::Total => "total",
            Self::MaxMin => "maxmin",
            Self::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" | "only-restrictions" | "onlyrestrictions" => Ok(Self::OnlyRestrictions),
            "total" => Ok(Self::Total),
            "maxmin" | "max-min" => Ok(Self::MaxMin),
            "mixed" => Ok(Self::Mixed),
            _ => Err(Error::InvalidInput(format!("unknown objective {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    Rejected,
    /// The search budget ran out before any feasible placement turned up.
    Unsolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    /// New placements when accepted, otherwise the previous ones.
    pub assignment: Assignment,
    /// Objective reached by an accepted exact decision (J).
    pub objective_value: Option<f64>,
    /// Previously placed test points that changed host.
    pub movements: usize,
    /// Non-sink nodes switched on.
    pub activations: usize,
    /// False when the search budget ran out and the best placement seen so
    /// far was admitted without an optimality proof.
    #[serde(default = "proven_default")]
    pub proven: bool,
}

fn proven_default() -> bool {
    true
}

impl Decision {
    pub fn accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }

    pub(crate) fn refused(state: &NetworkState, topology: &Topology, outcome: Outcome) -> Self {
        Self {
            outcome,
            assignment: state.assignment(topology),
            objective_value: None,
            movements: 0,
            activations: 0,
            proven: true,
        }
    }

    pub(crate) fn admit(
        state: &NetworkState,
        topology: &Topology,
        placement: BTreeMap<PlacementKey, NodeId>,
        value: Option<f64>,
    ) -> Self {
        let movements = placement.iter().filter(|(k, n)| state.placements.get(k).is_some_and(|p| p != *n)).count();
        let assignment = Assignment::new(placement, topology);
        let activations = assignment.active.iter().filter(|&&i| !topology.is_sink(i) && !state.active[i]).count();
        Self { outcome: Outcome::Accepted, assignment, objective_value: value, movements, activations, proven: true }
    }
}

pub(crate) fn objective_from(lambdas: &[f64], objective: Objective) -> f64 {
    if lambdas.is_empty() {
        return 0.0;
    }
    let sum = || lambdas.iter().fold(0.0, |acc, l| acc + l);
    let min = || lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    match objective {
        Objective::OnlyRestrictions => 0.0,
        Objective::Total => sum(),
        Objective::MaxMin => min(),
        Objective::Mixed => min() + sum() / lambdas.len() as f64,
    }
}

pub fn objective_value(outcome: &EnergyOutcome, objective: Objective) -> f64 {
    objective_from(&outcome.lambdas(), objective)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Placement attempts allowed before giving up as unsolved.
    pub max_expansions: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_expansions: 200_000 }
    }
}

/// Largest number of moved running test points tried before the full search.
const DIVE_MOVES: usize = 3;

struct Slot {
    app: usize,
    key: PlacementKey,
    candidates: Vec<NodeId>,
    prior: Option<NodeId>,
    /// Energy the placement adds to the network at each candidate, activation aside.
    margin: Vec<f64>,
}

#[derive(PartialEq)]
enum Phase {
    /// Find the best objective value.
    Optimize,
    /// Stop at the first placement reaching the target.
    Reach(f64),
}

struct Search<'a> {
    model: ChargeModel<'a>,
    topology: &'a Topology,
    objective: Objective,
    slots: Vec<Slot>,
    table: LoadTable,
    assigned: Vec<Option<NodeId>>,
    free: usize,
    /// Running test points currently off their previous host.
    moves: usize,
    /// Past this many moves, running test points stay where they are.
    move_limit: usize,
    non_sinks: Vec<NodeId>,
    best: Option<(f64, Vec<NodeId>)>,
    expansions: u64,
    cap: u64,
    exhausted: bool,
    stamp: Vec<u64>,
    epoch: u64,
}

/// Candidates of the unassigned slots that still fit, with a bound on any completion.
struct Forward {
    /// Unassigned slots with the indices of their fitting candidates.
    domains: Vec<(usize, Vec<usize>)>,
    bound: f64,
}

impl<'a> Search<'a> {
    fn new(
        model: ChargeModel<'a>,
        topology: &'a Topology,
        state: &NetworkState,
        objective: Objective,
        cap: u64,
    ) -> Option<Self> {
        let mut slots = Vec::new();
        for (a, terms) in model.apps.iter().enumerate() {
            let mut tps: Vec<_> = terms.app.test_points.iter().collect();
            tps.sort_by_key(|t| t.id);
            for tp in tps {
                let key = (terms.app.id, tp.id);
                let candidates = topology.covering(&tp.position);
                if candidates.is_empty() {
                    return None;
                }
                let prior = state.placements.get(&key).copied();
                let margin = candidates
                    .iter()
                    .map(|&c| {
                        if topology.is_sink(c) {
                            return 0.0;
                        }
                        let mut per_second = terms.proc_power;
                        for &g in &topology.paths[c] {
                            if topology.is_sink(g) {
                                continue;
                            }
                            per_second += topology.tx_cost(g) * terms.rate;
                            if g != c {
                                per_second += topology.energy.rho * terms.rate;
                            }
                        }
                        let moving = if prior == Some(c) { 0.0 } else { terms.app.move_cost_on(c) };
                        terms.remaining * per_second + moving
                    })
                    .collect();
                slots.push(Slot { app: a, key, candidates, prior, margin });
            }
        }
        let table = model.table();
        Some(Self {
            non_sinks: topology.non_sinks().collect(),
            assigned: vec![None; slots.len()],
            free: slots.len(),
            moves: 0,
            move_limit: usize::MAX,
            model,
            topology,
            objective,
            slots,
            table,
            best: None,
            expansions: 0,
            cap,
            exhausted: false,
            stamp: vec![0; topology.len()],
            epoch: 0,
        })
    }

    fn place(&mut self, pos: usize, c: NodeId) {
        let slot = &self.slots[pos];
        self.table.place(self.topology, slot.app, c, slot.prior != Some(c));
    }

    fn unplace(&mut self, pos: usize, c: NodeId) {
        let slot = &self.slots[pos];
        self.table.unplace(self.topology, slot.app, c, slot.prior != Some(c));
    }

    fn assign(&mut self, pos: usize, c: NodeId) {
        self.place(pos, c);
        self.assigned[pos] = Some(c);
        self.free -= 1;
        self.moves += usize::from(self.slots[pos].prior.is_some_and(|p| p != c));
    }

    fn release(&mut self, pos: usize, c: NodeId) {
        self.unplace(pos, c);
        self.assigned[pos] = None;
        self.free += 1;
        self.moves -= usize::from(self.slots[pos].prior.is_some_and(|p| p != c));
    }

    /// Budgets and energy at the host itself, after the test point is placed there.
    fn host_ok(&self, app: usize, c: NodeId) -> bool {
        let m = &self.model;
        m.cap_slack(&self.table, c, app) >= 0.0
            && m.memory_slack(&self.table, c) >= -BUDGET_TOLERANCE
            && m.load_slack(&self.table, c) >= -BUDGET_TOLERANCE
            && (self.topology.is_sink(c) || m.lambda(&self.table, c) >= -ENERGY_TOLERANCE)
    }

    /// Places slot `pos` on `c` if every constraint touched by the placement holds.
    fn try_place(&mut self, pos: usize, c: NodeId) -> bool {
        self.place(pos, c);
        let app = self.slots[pos].app;
        let topo = self.topology;
        let mut ok = self.host_ok(app, c);
        if ok {
            ok = topo.paths[c]
                .iter()
                .all(|&g| topo.is_sink(g) || self.model.lambda(&self.table, g) >= -ENERGY_TOLERANCE);
        }
        if ok {
            self.epoch += 1;
            'links: for &g in &topo.paths[c] {
                if topo.parent[g].is_none() {
                    continue;
                }
                for &l in topo.airtime_group(g) {
                    if self.stamp[l] == self.epoch {
                        continue;
                    }
                    self.stamp[l] = self.epoch;
                    if self.model.is_flowing(&self.table, l)
                        && 1.0 - self.model.utilization(&self.table, l) < -BUDGET_TOLERANCE
                    {
                        ok = false;
                        break 'links;
                    }
                }
            }
        }
        if !ok {
            self.unplace(pos, c);
        }
        ok
    }

    /// Filters every unassigned slot down to the candidates that fit now,
    /// starting from the parent's domains when given. Loads only grow along
    /// a branch, so a candidate that fails here fails in every completion.
    /// `None` when some slot has nothing left.
    fn forward(&mut self, parent: Option<&[(usize, Vec<usize>)]>) -> Option<Forward> {
        let mut min_partial = f64::INFINITY;
        let mut sum_partial = 0.0;
        for &i in &self.non_sinks {
            let l = self.model.lambda(&self.table, i);
            min_partial = min_partial.min(l);
            sum_partial += l;
        }
        let full: Vec<(usize, Vec<usize>)>;
        let parent = match parent {
            Some(d) => d,
            None => {
                full = (0..self.slots.len())
                    .filter(|&p| self.assigned[p].is_none())
                    .map(|p| (p, (0..self.slots[p].candidates.len()).collect()))
                    .collect();
                &full
            }
        };
        let topo = self.topology;
        let pinned = self.moves >= self.move_limit;
        let mut idle = Vec::new();
        let mut domains = Vec::with_capacity(self.free);
        let mut host_bound = f64::INFINITY;
        let mut margin_sum = 0.0;
        let mut margin_abs = 0.0;
        // Switch-on energy at least one remaining test point must pay for.
        let mut switch_extra = 0.0f64;
        for (p, cis) in parent {
            let p = *p;
            if self.assigned[p].is_some() {
                continue;
            }
            let mut fits = Vec::with_capacity(cis.len());
            let mut best_host = f64::NEG_INFINITY;
            let mut least = f64::INFINITY;
            let mut least_switching = f64::INFINITY;
            for &ci in cis {
                let c = self.slots[p].candidates[ci];
                if pinned && self.slots[p].prior.is_some_and(|pr| pr != c) {
                    continue;
                }
                self.expansions += 1;
                idle.clear();
                idle.extend(topo.paths[c].iter().copied().filter(|&g| !self.table.is_active(g)));
                if !self.try_place(p, c) {
                    continue;
                }
                let value = if topo.is_sink(c) { f64::INFINITY } else { self.model.lambda(&self.table, c) };
                let switching: f64 = idle.iter().map(|&g| self.model.activation_charge(&self.table, g)).sum();
                self.unplace(p, c);
                fits.push(ci);
                best_host = best_host.max(value);
                let margin = self.slots[p].margin[ci];
                least = least.min(margin);
                least_switching = least_switching.min(margin + switching);
            }
            if fits.is_empty() {
                return None;
            }
            host_bound = host_bound.min(best_host);
            margin_sum += least;
            margin_abs += least.abs();
            switch_extra = switch_extra.max(least_switching - least);
            domains.push((p, fits));
        }
        let bound = if self.non_sinks.is_empty() {
            0.0
        } else {
            let ub_min = min_partial.min(host_bound);
            let ub_sum =
                sum_partial - margin_sum - switch_extra + 1e-9 * (sum_partial.abs() + margin_abs + switch_extra) + 1e-6;
            match self.objective {
                Objective::OnlyRestrictions => 0.0,
                Objective::Total => ub_sum,
                Objective::MaxMin => ub_min,
                Objective::Mixed => ub_min + ub_sum / self.non_sinks.len() as f64,
            }
        };
        Some(Forward { domains, bound })
    }

    fn leaf_value(&self) -> f64 {
        let lambdas: Vec<f64> = self.non_sinks.iter().map(|&i| self.model.lambda(&self.table, i)).collect();
        objective_from(&lambdas, self.objective)
    }

    /// Most promising candidates first, or plain candidate order when only
    /// feasibility counts.
    fn rank(&mut self, pos: usize, cis: &[usize]) -> Vec<NodeId> {
        if self.objective == Objective::OnlyRestrictions {
            return cis.iter().map(|&ci| self.slots[pos].candidates[ci]).collect();
        }
        let mut scored: Vec<(f64, NodeId)> = Vec::with_capacity(cis.len());
        for &ci in cis {
            let c = self.slots[pos].candidates[ci];
            let score = match self.objective {
                Objective::Total => -self.slots[pos].margin[ci],
                _ if self.topology.is_sink(c) => f64::INFINITY,
                _ => {
                    self.place(pos, c);
                    let l = self.model.lambda(&self.table, c);
                    self.unplace(pos, c);
                    l
                }
            };
            scored.push((score, c));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().map(|(_, c)| c).collect()
    }

    /// Branches on the arriving app first, then on the slot with the fewest
    /// fitting candidates. Returns true when the search should stop.
    fn dfs(&mut self, phase: &Phase, parent: Option<&[(usize, Vec<usize>)]>) -> bool {
        if self.expansions > self.cap {
            self.exhausted = true;
            return true;
        }
        if self.free == 0 {
            let value = self.leaf_value();
            let nodes = || self.assigned.iter().map(|n| n.unwrap_or_default()).collect();
            match phase {
                Phase::Optimize => {
                    if self.best.as_ref().is_none_or(|(b, _)| value > *b) {
                        self.best = Some((value, nodes()));
                    }
                    return false;
                }
                Phase::Reach(target) => {
                    if value >= *target {
                        self.best = Some((value, nodes()));
                        return true;
                    }
                    return false;
                }
            }
        }
        let Some(forward) = self.forward(parent) else {
            return false;
        };
        match phase {
            Phase::Optimize => {
                if self.best.as_ref().is_some_and(|(b, _)| forward.bound <= *b) {
                    return false;
                }
            }
            Phase::Reach(target) => {
                if forward.bound < *target {
                    return false;
                }
            }
        }
        let (pos, cis) = forward
            .domains
            .iter()
            .min_by_key(|(p, d)| (self.slots[*p].prior.is_some(), d.len(), *p))
            .expect("an unassigned slot");
        let pos = *pos;
        let cands = self.rank(pos, cis);
        for c in cands {
            self.expansions += 1;
            self.assign(pos, c);
            let stop = self.dfs(phase, Some(&forward.domains));
            self.release(pos, c);
            if stop {
                return true;
            }
        }
        false
    }

    /// Fixes slots in order to the lowest candidate that still reaches
    /// `target`, yielding the lexicographically smallest such placement.
    fn smallest_reaching(&mut self, target: f64) -> Option<(f64, Vec<NodeId>)> {
        for pos in 0..self.slots.len() {
            let mut fixed = false;
            for ci in 0..self.slots[pos].candidates.len() {
                let c = self.slots[pos].candidates[ci];
                self.expansions += 1;
                if !self.try_place(pos, c) {
                    continue;
                }
                self.unplace(pos, c);
                self.assign(pos, c);
                self.best = None;
                self.dfs(&Phase::Reach(target), None);
                if self.exhausted {
                    return None;
                }
                if self.best.is_some() {
                    fixed = true;
                    break;
                }
                self.release(pos, c);
            }
            if !fixed {
                return None;
            }
        }
        let value = self.leaf_value();
        Some((value, self.assigned.iter().map(|n| n.unwrap_or_default()).collect()))
    }

    fn placement(&self, nodes: &[NodeId]) -> BTreeMap<PlacementKey, NodeId> {
        self.slots.iter().zip(nodes).map(|(s, &n)| (s.key, n)).collect()
    }
}

/// Best re-placement of every running app plus `arriving`, with the default budget.
pub fn solve_arrival(
    state: &NetworkState,
    arriving: &AppRequest,
    topology: &Topology,
    objective: Objective,
) -> Decision {
    solve_arrival_with(state, arriving, topology, objective, &SolverConfig::default())
}

pub fn solve_arrival_with(
    state: &NetworkState,
    arriving: &AppRequest,
    topology: &Topology,
    objective: Objective,
    config: &SolverConfig,
) -> Decision {
    let apps = state.apps_with(arriving);
    let refs: Vec<&AppRequest> = apps.iter().collect();
    let model = ChargeModel::from_state(topology, state, &refs);
    let Some(mut search) = Search::new(model, topology, state, objective, config.max_expansions) else {
        return Decision::refused(state, topology, Outcome::Rejected);
    };
    // Dives that move few running test points find an incumbent cheaply.
    let mut limit = 0;
    while objective != Objective::OnlyRestrictions && search.best.is_none() && !search.exhausted && limit <= DIVE_MOVES
    {
        search.move_limit = limit;
        search.dfs(&Phase::Reach(f64::NEG_INFINITY), None);
        limit += 1;
    }
    search.move_limit = usize::MAX;
    if !search.exhausted {
        search.dfs(&Phase::Optimize, None);
    }
    let best = search.best.take();
    if search.exhausted {
        return match best {
            None => Decision::refused(state, topology, Outcome::Unsolved),
            Some((value, nodes)) => {
                let placement = search.placement(&nodes);
                Decision { proven: false, ..Decision::admit(state, topology, placement, Some(value)) }
            }
        };
    }
    let Some((target, incumbent)) = best else {
        return Decision::refused(state, topology, Outcome::Rejected);
    };
    if objective == Objective::OnlyRestrictions {
        return Decision::admit(state, topology, search.placement(&incumbent), Some(target));
    }
    match search.smallest_reaching(target) {
        Some((value, nodes)) => Decision::admit(state, topology, search.placement(&nodes), Some(value)),
        None => {
            let placement = search.placement(&incumbent);
            Decision { proven: false, ..Decision::admit(state, topology, placement, Some(target)) }
        }
    }
}

/// Enumerates every placement vector in lexicographic order and keeps the
/// first one with the highest objective among those passing [`check_full`].
pub fn brute_force_oracle(
    state: &NetworkState,
    arriving: &AppRequest,
    topology: &Topology,
    objective: Objective,
) -> Result<Decision> {
    let apps = state.apps_with(arriving);
    let mut keys = Vec::new();
    let mut candidates = Vec::new();
    for app in &apps {
        let mut tps: Vec<_> = app.test_points.iter().collect();
        tps.sort_by_key(|t| t.id);
        for tp in tps {
            keys.push((app.id, tp.id));
            candidates.push(topology.covering(&tp.position));
        }
    }
    let size: f64 = candidates.iter().map(|c| c.len() as f64).product();
    if size > ORACLE_GUARD {
        return Err(Error::SpaceTooLarge { size, limit: ORACLE_GUARD });
    }
    if candidates.iter().any(|c| c.is_empty()) {
        return Ok(Decision::refused(state, topology, Outcome::Rejected));
    }
    let mut digits = vec![0usize; keys.len()];
    let mut best: Option<(f64, BTreeMap<PlacementKey, NodeId>)> = None;
    loop {
        let placement: BTreeMap<PlacementKey, NodeId> =
            keys.iter().zip(&digits).zip(&candidates).map(|((k, &d), c)| (*k, c[d])).collect();
        let assignment = Assignment::new(placement, topology);
        if check_full(state, &assignment, &apps, topology).feasible {
            let value = objective_value(&compute_energy_outcome(state, &assignment, &apps, topology), objective);
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, assignment.placement));
                if objective == Objective::OnlyRestrictions {
                    break;
                }
            }
        }
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < candidates[pos].len() {
                break;
            }
            digits[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }
    Ok(match best {
        None => Decision::refused(state, topology, Outcome::Rejected),
        Some((value, placement)) => Decision::admit(state, topology, placement, Some(value)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::EnergyOutcome;
    use crate::constraints::NodeEnergy;
    use crate::model::*;
    use crate::sim::state::apply_decision;
    use crate::topology::build_topology;

    fn outcome(ls: &[f64]) -> EnergyOutcome {
        EnergyOutcome {
            nodes: ls
                .iter()
                .enumerate()
                .map(|(i, &l)| NodeEnergy {
                    node: i,
                    lambda: l,
                    consumption: 0.0,
                    activation_charge: 0.0,
                    move_charge: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn objective_arithmetic() {
        let o = outcome(&[10.0, 20.0, 30.0]);
        assert_eq!(objective_value(&o, Objective::Mixed), 30.0);
        assert_eq!(objective_value(&o, Objective::MaxMin), 10.0);
        assert_eq!(objective_value(&o, Objective::Total), 60.0);
        assert_eq!(objective_value(&o, Objective::OnlyRestrictions), 0.0);
        let flat = outcome(&[7.0; 4]);
        assert_eq!(objective_value(&flat, Objective::Total), 28.0);
        assert_eq!(objective_value(&flat, Objective::Mixed), 14.0);
    }

    #[test]
    fn objective_names_round_trip() {
        for o in Objective::ALL {
            assert_eq!(o.name().parse::<Objective>().unwrap(), o);
        }
        assert!("best".parse::<Objective>().is_err());
    }

    fn app(id: usize, arrival: f64, tps: &[(f64, f64)]) -> AppRequest {
        AppRequest {
            id,
            arrival,
            activity: 18_000.0,
            demand: preset_visual_app(),
            test_points: tps
                .iter()
                .enumerate()
                .map(|(k, &(x, y))| TestPoint { id: k, position: Point::new(x, y) })
                .collect(),
            max_tp_per_node: 1,
            move_cost: 10.0,
            max_tp_overrides: Default::default(),
            move_cost_overrides: Default::default(),
        }
    }

    fn topo(pos: &[(f64, f64, bool)], sensing: f64) -> Topology {
        let nodes: Vec<SensorNode> = pos
            .iter()
            .enumerate()
            .map(|(i, &(x, y, s))| {
                let mut n = SensorNode::new(i, Point::new(x, y), preset_beaglebone(), s);
                n.sensing_range = sensing;
                n
            })
            .collect();
        build_topology(&nodes, &RadioParams::reference(), &EnergyConstants::reference()).unwrap()
    }

    #[test]
    fn forced_single_candidate() {
        let t = topo(&[(0.0, 0.0, true), (25.0, 0.0, false)], 10.0);
        let state = NetworkState::new(&t);
        let a = app(0, 0.0, &[(25.0, 0.0)]);
        for obj in Objective::ALL {
            let d = solve_arrival(&state, &a, &t, obj);
            assert!(d.accepted());
            assert_eq!(d.assignment.placement[&(0, 0)], 1);
            assert_eq!(d.activations, 1);
            assert_eq!(d.movements, 0);
        }
    }

    #[test]
    fn uncovered_point_rejects() {
        let t = topo(&[(0.0, 0.0, true), (25.0, 0.0, false)], 10.0);
        let state = NetworkState::new(&t);
        let a = app(0, 0.0, &[(500.0, 0.0)]);
        let d = solve_arrival(&state, &a, &t, Objective::Mixed);
        assert_eq!(d.outcome, Outcome::Rejected);
        assert_eq!(d.assignment, state.assignment(&t));
        assert_eq!(brute_force_oracle(&state, &a, &t, Objective::Mixed).unwrap().outcome, Outcome::Rejected);
    }

    /// Two siblings under one sink. App 0 sits on node 1; the newcomer only
    /// fits on node 1 because node 2 is too weak to host it, so app 0 moves.
    #[test]
    fn migration_to_sibling() {
        let mut t = topo(&[(0.0, 0.0, true), (20.0, 10.0, false), (20.0, -10.0, false), (40.0, 30.0, false)], 25.0);
        // Nodes 1 and 2 host one visual test point each; node 3 none.
        t.nodes[0].sensing_range = 1.0;
        t.nodes[1].resources.processing = 100.0;
        t.nodes[2].resources.processing = 100.0;
        t.nodes[3].resources.processing = 10.0;
        let mut state = NetworkState::new(&t);
        let first = app(0, 0.0, &[(20.0, 0.0)]);
        let d0 = solve_arrival(&state, &first, &t, Objective::OnlyRestrictions);
        assert_eq!(d0.assignment.placement[&(0, 0)], 1);
        apply_decision(&mut state, &first, &d0, &t);
        state.clock = 100.0;
        let second = app(1, 100.0, &[(20.0, 20.0)]);
        assert_eq!(t.covering(&second.test_points[0].position), vec![1, 3]);
        for obj in Objective::ALL {
            let d = solve_arrival(&state, &second, &t, obj);
            let oracle = brute_force_oracle(&state, &second, &t, obj).unwrap();
            assert!(d.accepted(), "{obj}");
            assert_eq!(d.movements, 1, "{obj}");
            assert_eq!(d.assignment.placement[&(0, 0)], 2);
            assert_eq!(d.assignment.placement[&(1, 0)], 1);
            assert_eq!(d.objective_value, oracle.objective_value);
            assert_eq!(d.assignment, oracle.assignment);
        }
    }

    #[test]
    fn expansion_cap_reports_unsolved() {
        let t = topo(&[(0.0, 0.0, true), (20.0, 0.0, false), (0.0, 20.0, false)], 60.0);
        let state = NetworkState::new(&t);
        let a = app(0, 0.0, &[(5.0, 5.0), (6.0, 6.0)]);
        let d = solve_arrival_with(&state, &a, &t, Objective::Mixed, &SolverConfig { max_expansions: 1 });
        assert_eq!(d.outcome, Outcome::Unsolved);
        assert_eq!(d.assignment, state.assignment(&t));
    }

    #[test]
    fn oracle_refuses_huge_spaces() {
        let pos: Vec<(f64, f64, bool)> = (0..12).map(|i| (i as f64, 0.0, i == 0)).collect();
        let t = topo(&pos, 100.0);
        let state = NetworkState::new(&t);
        let tps: Vec<(f64, f64)> = (0..7).map(|k| (k as f64, 1.0)).collect();
        let mut a = app(0, 0.0, &tps);
        a.max_tp_per_node = 10;
        let err = brute_force_oracle(&state, &a, &t, Objective::Total).unwrap_err();
        assert!(matches!(err, Error::SpaceTooLarge { .. }));
    }
}
