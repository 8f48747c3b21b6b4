//! Why an arrival was admitted or refused.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use serde::Serialize;
use vsnslice_core::constraints::{compute_energy_outcome, Subject};
use vsnslice_core::sim::{SimOptions, Simulation};
use vsnslice_core::{check_full, Assignment, Decision, FeasibilityReport, NetworkState, Outcome, Topology};
use vsnslice_core::{AppRequest, Strategy};

use crate::run::RunArtifact;

#[derive(Debug, Clone, Serialize)]
pub struct Placement {
    pub test_point: usize,
    pub node: usize,
    /// Residual energy the node keeps once every running app ends (J).
    pub lambda: f64,
}

/// Result of placing one test point alone on one covering node, with all
/// other placements left where they are.
#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub node: usize,
    /// First violated constraint family, if any.
    pub first_violation: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestPointDiagnosis {
    pub test_point: usize,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Explanation {
    pub app: usize,
    pub time: f64,
    pub strategy: Strategy,
    pub outcome: Outcome,
    pub objective_value: Option<f64>,
    pub proven: bool,
    pub movements: usize,
    pub activations: usize,
    /// Re-check of the committed placements for accepted arrivals.
    pub report: Option<FeasibilityReport>,
    pub placements: Vec<Placement>,
    pub diagnosis: Vec<TestPointDiagnosis>,
}

pub fn explain(artifact: &RunArtifact, app: usize) -> Result<Explanation> {
    let manifest = &artifact.manifest;
    let (scenario, topology) = manifest.workload.build()?;
    let Some(request) = scenario.apps.iter().find(|a| a.id == app) else {
        bail!("application {app} does not arrive in this run");
    };
    let options = SimOptions { keep_prior_states: true, ..manifest.options() };
    let mut sim = Simulation::new(&scenario, &topology, manifest.strategy, options);
    sim.run_until_arrival(app)?;
    let record = sim.step().expect("the arrival is pending");
    let (Some(decision), Some(prior)) = (record.decision, record.prior) else {
        bail!("application {app} was not decided");
    };
    Ok(describe(&prior, request, &decision, &topology, manifest.strategy))
}

fn describe(
    prior: &NetworkState,
    app: &AppRequest,
    decision: &Decision,
    topology: &Topology,
    strategy: Strategy,
) -> Explanation {
    let mut out = Explanation {
        app: app.id,
        time: app.arrival,
        strategy,
        outcome: decision.outcome,
        objective_value: decision.objective_value,
        proven: decision.proven,
        movements: decision.movements,
        activations: decision.activations,
        report: None,
        placements: Vec::new(),
        diagnosis: Vec::new(),
    };
    if decision.accepted() {
        let apps = prior.apps_with(app);
        out.report = Some(check_full(prior, &decision.assignment, &apps, topology));
        let energy = compute_energy_outcome(prior, &decision.assignment, &apps, topology);
        for tp in &app.test_points {
            let node = decision.assignment.placement[&(app.id, tp.id)];
            out.placements.push(Placement {
                test_point: tp.id,
                node,
                lambda: energy.lambda(node).unwrap_or(f64::INFINITY),
            });
        }
    } else {
        for tp in &app.test_points {
            let mut alone = app.clone();
            alone.test_points = vec![*tp];
            let apps = prior.apps_with(&alone);
            let candidates = topology
                .covering(&tp.position)
                .into_iter()
                .map(|node| {
                    let mut placement = prior.assignment(topology).placement;
                    placement.insert((app.id, tp.id), node);
                    let report = check_full(prior, &Assignment::new(placement, topology), &apps, topology);
                    Candidate {
                        node,
                        first_violation: report
                            .violations
                            .first()
                            .map(|v| format!("{} at {}", v.family.name(), subject(&v.subject))),
                    }
                })
                .collect();
            out.diagnosis.push(TestPointDiagnosis { test_point: tp.id, candidates });
        }
    }
    out
}

fn subject(s: &Subject) -> String {
    match s {
        Subject::Node(i) => format!("node {i}"),
        Subject::Link(a, b) => format!("link {a}->{b}"),
        Subject::TestPoint(j, k) => format!("test point {k} of app {j}"),
        Subject::AppOnNode(j, i) => format!("app {j} on node {i}"),
    }
}

pub fn render(e: &Explanation) -> String {
    let mut s = format!("app {} at t={:.1} s, strategy {}: {:?}\n", e.app, e.time, e.strategy, e.outcome);
    if e.outcome == Outcome::Accepted {
        if let Some(v) = e.objective_value {
            writeln!(s, "objective {v:.3}{}", if e.proven { "" } else { " (search budget ran out)" }).unwrap();
        }
        writeln!(s, "movements {}, activations {}", e.movements, e.activations).unwrap();
        if let Some(r) = &e.report {
            writeln!(s, "re-check: {}", if r.feasible { "feasible" } else { "VIOLATED" }).unwrap();
            for v in &r.violations {
                writeln!(s, "  {} at {}: slack {:.4}", v.family.name(), subject(&v.subject), v.slack).unwrap();
            }
        }
        writeln!(s, "{:>10} {:>6} {:>14}", "test point", "node", "lambda (J)").unwrap();
        for p in &e.placements {
            writeln!(s, "{:>10} {:>6} {:>14.2}", p.test_point, p.node, p.lambda).unwrap();
        }
    } else {
        for d in &e.diagnosis {
            if d.candidates.is_empty() {
                writeln!(s, "coverage: test point {} uncovered", d.test_point).unwrap();
                continue;
            }
            writeln!(s, "test point {}:", d.test_point).unwrap();
            for c in &d.candidates {
                let why = c.first_violation.as_deref().unwrap_or("fits alone");
                writeln!(s, "  node {:>4}: {why}", c.node).unwrap();
            }
        }
    }
    s
}
