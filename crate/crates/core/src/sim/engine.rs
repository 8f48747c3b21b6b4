use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::state::{advance_energy, apply_decision, release, NetworkState};
use crate::error::{Error, Result};
use crate::exact::{solve_arrival_with, Decision, Objective, Outcome, SolverConfig};
use crate::heuristic::greedy_admit;
use crate::model::{AppId, AppRequest, NodeId, Scenario, TestPointId};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exact(Objective),
    Heuristic,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Exact(Objective::OnlyRestrictions),
        Strategy::Exact(Objective::Total),
        Strategy::Exact(Objective::MaxMin),
        Strategy::Exact(Objective::Mixed),
        Strategy::Heuristic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Exact(o) => o.name(),
            Strategy::Heuristic => "heuristic",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("heuristic") || s.eq_ignore_ascii_case("greedy") {
            return Ok(Strategy::Heuristic);
        }
        s.parse().map(Strategy::Exact).map_err(|_| {
            Error::InvalidInput(format!("unknown strategy {s:?}; expected heuristic, or, total, maxmin or mixed"))
        })
    }
}

/// Runs the strategy on one arrival without touching the state.
pub fn decide(
    strategy: Strategy,
    state: &NetworkState,
    arriving: &AppRequest,
    topology: &Topology,
    solver: &SolverConfig,
) -> Decision {
    match strategy {
        Strategy::Heuristic => greedy_admit(state, arriving, topology),
        Strategy::Exact(objective) => solve_arrival_with(state, arriving, topology, objective, solver),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimOptions {
    pub solver: SolverConfig,
    /// Time at which per-node residual energies are sampled.
    pub probe_time: Option<f64>,
    /// Keep a copy of the state seen by each arrival in its step record.
    pub keep_prior_states: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time: f64,
    pub deployed: usize,
    /// Sum of non-sink battery energy (J).
    pub residual_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub app: AppId,
    pub time: f64,
    pub outcome: Outcome,
    pub movements: usize,
    pub activations: usize,
    /// Hosts chosen for the arriving app's test points.
    pub placed: Vec<(TestPointId, NodeId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Metrics {
    pub arrivals: usize,
    pub deployed: usize,
    /// Refused arrivals, unsolved ones included.
    pub rejected: usize,
    pub unsolved: usize,
    /// Admitted by the exact solver without an optimality proof.
    #[serde(default)]
    pub unproven: usize,
    pub movements: usize,
    pub activations: usize,
    pub series: Vec<SeriesPoint>,
    /// Non-sink battery energy at the end, ascending by node id.
    pub final_energy: Vec<f64>,
    pub probe_energy: Option<Vec<f64>>,
    pub decisions: Vec<DecisionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Departure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub app: AppId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub event: Event,
    pub decision: Option<Decision>,
    /// State the arrival was decided on, when requested.
    pub prior: Option<Box<NetworkState>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Departure(f64, AppId);

impl Eq for Departure {}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Event-driven run of one strategy over one scenario.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    topology: &'a Topology,
    strategy: Strategy,
    options: SimOptions,
    state: NetworkState,
    order: Vec<usize>,
    next_arrival: usize,
    departures: BinaryHeap<Reverse<Departure>>,
    metrics: Metrics,
    probed: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, topology: &'a Topology, strategy: Strategy, options: SimOptions) -> Self {
        let mut order: Vec<usize> = (0..scenario.apps.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (&scenario.apps[a], &scenario.apps[b]);
            x.arrival.total_cmp(&y.arrival).then(x.id.cmp(&y.id))
        });
        let state = NetworkState::new(topology);
        let metrics = Metrics {
            series: vec![SeriesPoint { time: 0.0, deployed: 0, residual_energy: state.total_energy(topology) }],
            ..Metrics::default()
        };
        Self {
            scenario,
            topology,
            strategy,
            options,
            state,
            order,
            next_arrival: 0,
            departures: BinaryHeap::new(),
            metrics,
            probed: false,
        }
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Next event; departures go first on equal times.
    pub fn peek(&self) -> Option<Event> {
        let arrival = self.order.get(self.next_arrival).map(|&i| &self.scenario.apps[i]);
        let departure = self.departures.peek().map(|Reverse(d)| *d);
        match (arrival, departure) {
            (None, None) => None,
            (Some(a), Some(d)) if d.0 > a.arrival => {
                Some(Event { time: a.arrival, kind: EventKind::Arrival, app: a.id })
            }
            (Some(a), None) => Some(Event { time: a.arrival, kind: EventKind::Arrival, app: a.id }),
            (_, Some(d)) => Some(Event { time: d.0, kind: EventKind::Departure, app: d.1 }),
        }
    }

    fn advance_to(&mut self, time: f64) {
        if let Some(p) = self.options.probe_time {
            if !self.probed && p <= time {
                let dt = (p - self.state.clock).max(0.0);
                advance_energy(&mut self.state, dt, self.topology);
                self.metrics.probe_energy = Some(self.topology.non_sinks().map(|i| self.state.energy[i]).collect());
                self.probed = true;
            }
        }
        let dt = (time - self.state.clock).max(0.0);
        advance_energy(&mut self.state, dt, self.topology);
    }

    /// Processes events up to, but not including, the arrival of `app`, and
    /// moves the clock to that arrival. Returns the arriving request.
    pub fn run_until_arrival(&mut self, app: AppId) -> Result<&'a AppRequest> {
        loop {
            match self.peek() {
                None => return Err(Error::InvalidInput(format!("application {app} never arrives"))),
                Some(ev) if ev.kind == EventKind::Arrival && ev.app == app => {
                    self.advance_to(ev.time);
                    return Ok(&self.scenario.apps[self.order[self.next_arrival]]);
                }
                Some(_) => {
                    self.step();
                }
            }
        }
    }

    pub fn step(&mut self) -> Option<StepRecord> {
        let event = self.peek()?;
        self.advance_to(event.time);
        let mut record = StepRecord { event, decision: None, prior: None };
        match event.kind {
            EventKind::Departure => {
                self.departures.pop();
                release(&mut self.state, event.app, self.topology);
            }
            EventKind::Arrival => {
                let app = &self.scenario.apps[self.order[self.next_arrival]];
                self.next_arrival += 1;
                if self.options.keep_prior_states {
                    record.prior = Some(Box::new(self.state.clone()));
                }
                let decision = decide(self.strategy, &self.state, app, self.topology, &self.options.solver);
                self.record_decision(app, &decision);
                if decision.accepted() {
                    apply_decision(&mut self.state, app, &decision, self.topology);
                    self.departures.push(Reverse(Departure(app.departure(), app.id)));
                }
                record.decision = Some(decision);
            }
        }
        self.metrics.series.push(SeriesPoint {
            time: event.time,
            deployed: self.metrics.deployed,
            residual_energy: self.state.total_energy(self.topology),
        });
        Some(record)
    }

    fn record_decision(&mut self, app: &AppRequest, decision: &Decision) {
        let m = &mut self.metrics;
        m.arrivals += 1;
        match decision.outcome {
            Outcome::Accepted => {
                m.deployed += 1;
                m.unproven += usize::from(!decision.proven);
                m.movements += decision.movements;
                m.activations += decision.activations;
            }
            Outcome::Rejected => m.rejected += 1,
            Outcome::Unsolved => {
                m.rejected += 1;
                m.unsolved += 1;
            }
        }
        let placed = if decision.accepted() {
            app.test_points.iter().map(|tp| (tp.id, decision.assignment.placement[&(app.id, tp.id)])).collect()
        } else {
            Vec::new()
        };
        m.decisions.push(DecisionRecord {
            app: app.id,
            time: app.arrival,
            outcome: decision.outcome,
            movements: decision.movements,
            activations: decision.activations,
            placed,
        });
    }

    pub fn finish(mut self) -> Metrics {
        while self.step().is_some() {}
        if self.options.probe_time.is_some() && !self.probed {
            self.metrics.probe_energy = Some(self.topology.non_sinks().map(|i| self.state.energy[i]).collect());
        }
        self.metrics.final_energy = self.topology.non_sinks().map(|i| self.state.energy[i]).collect();
        self.metrics
    }
}

pub fn run_simulation(scenario: &Scenario, topology: &Topology, strategy: Strategy, options: SimOptions) -> Metrics {
    Simulation::new(scenario, topology, strategy, options).finish()
}
