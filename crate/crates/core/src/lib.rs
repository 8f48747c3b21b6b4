//! Admission control and resource slicing for wireless sensor networks shared
//! by several applications.
//!
//! Each arriving application asks for a set of test points to be sensed. A
//! strategy decides whether it can be admitted and where every test point of
//! every running application is sensed, subject to memory, processing,
//! airtime and energy budgets along fixed min-hop routes to the sinks.

pub mod constraints;
pub mod error;
pub mod exact;
pub mod heuristic;
pub mod lpexport;
pub mod model;
pub mod sim;
pub mod topology;

pub use constraints::{
    check_full, check_node_budgets, compute_energy_outcome, derive_flows, Assignment, ConstraintFamily, EnergyOutcome,
    FeasibilityReport, FlowMap, Violation,
};
pub use error::{Error, Result};
pub use exact::{brute_force_oracle, objective_value, solve_arrival, Decision, Objective, Outcome};
pub use heuristic::greedy_admit;
pub use model::{
    preset_beaglebone, preset_visual_app, AppRequest, DemandVector, EnergyConstants, Point, RadioParams,
    ResourceVector, Scenario, SensorNode, TestPoint,
};
pub use sim::{NetworkState, ScenarioConfig, Strategy};
pub use topology::{build_topology, interference_range, transmission_range, Topology};
