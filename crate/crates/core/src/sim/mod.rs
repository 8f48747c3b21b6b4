//! Event-driven simulation of application arrivals and departures.
//!
//! Arrivals are decided by a [`Strategy`] on the current [`NetworkState`];
//! accepted apps reserve their future energy, pay switching charges at once
//! and drain their batteries continuously until they leave.

mod engine;
mod scenario;
pub(crate) mod state;

pub use engine::{
    decide, run_simulation, DecisionRecord, Event, EventKind, Metrics, SeriesPoint, SimOptions, Simulation, StepRecord,
    Strategy,
};
pub use scenario::{generate_scenario, ScenarioConfig};
pub use state::{advance_energy, apply_decision, release, NetworkState};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::check_full;
    use crate::exact::Objective;
    use crate::model::*;
    use crate::topology::build_topology;

    fn line_scenario(apps: Vec<AppRequest>) -> (Scenario, crate::topology::Topology) {
        let nodes = vec![
            SensorNode::new(0, Point::new(0.0, 0.0), preset_beaglebone(), true),
            SensorNode::new(1, Point::new(33.65, 0.0), preset_beaglebone(), false),
            SensorNode::new(2, Point::new(60.0, 0.0), preset_beaglebone(), false),
        ];
        let mut nodes = nodes;
        nodes[0].sensing_range = 1.0;
        nodes[1].sensing_range = 10.0;
        nodes[2].sensing_range = 10.0;
        let s = Scenario { radio: RadioParams::reference(), energy: EnergyConstants::reference(), nodes, apps };
        let t = build_topology(&s.nodes, &s.radio, &s.energy).unwrap();
        (s, t)
    }

    fn visual(id: usize, arrival: f64, x: f64) -> AppRequest {
        AppRequest {
            id,
            arrival,
            activity: 18_000.0,
            demand: preset_visual_app(),
            test_points: vec![TestPoint { id: 0, position: Point::new(x, 0.0) }],
            max_tp_per_node: 1,
            move_cost: 10.0,
            max_tp_overrides: Default::default(),
            move_cost_overrides: Default::default(),
        }
    }

    #[test]
    fn idle_network_keeps_energy() {
        let (_, t) = line_scenario(vec![]);
        let mut s = NetworkState::new(&t);
        advance_energy(&mut s, 5000.0, &t);
        assert_eq!(s.energy, vec![32_400.0; 3]);
        assert_eq!(s.clock, 5000.0);
    }

    #[test]
    fn hosting_for_an_hour() {
        let (_, t) = line_scenario(vec![]);
        let app = visual(0, 0.0, 33.65);
        let mut s = NetworkState::new(&t);
        let d = crate::exact::solve_arrival(&s, &app, &t, Objective::Total);
        apply_decision(&mut s, &app, &d, &t);
        let before = s.energy[1];
        advance_energy(&mut s, 3600.0, &t);
        let drop = before - s.energy[1];
        let tx_power = 12_000.0 * (5e-8 + 1.3e-15 * 33.65f64.powi(4));
        assert!((tx_power - 6.2e-4).abs() < 1e-5);
        assert!((drop - 3600.0 * (0.2 + tx_power)).abs() < 1e-9);
        assert!((drop - 722.2).abs() < 0.1, "{drop}");
    }

    #[test]
    fn energy_at_departure_equals_reservation() {
        let (scenario, t) = line_scenario(vec![visual(0, 100.0, 60.0)]);
        let mut sim = Simulation::new(&scenario, &t, Strategy::Exact(Objective::Mixed), SimOptions::default());
        sim.step().unwrap();
        let reserved = sim.state().reserved.clone();
        sim.step().unwrap();
        for i in [1, 2] {
            assert!((sim.state().energy[i] - reserved[i]).abs() < 1e-8, "{i}");
        }
        assert!(sim.state().placements.is_empty());
        assert!(!sim.state().active[1]);
    }

    #[test]
    fn no_apps_means_no_activity() {
        let (scenario, t) = line_scenario(vec![]);
        let m = run_simulation(&scenario, &t, Strategy::Heuristic, SimOptions::default());
        assert_eq!((m.arrivals, m.deployed, m.rejected, m.movements, m.activations), (0, 0, 0, 0, 0));
        assert_eq!(m.final_energy.iter().sum::<f64>(), 2.0 * 32_400.0);
    }

    #[test]
    fn single_app_activates_its_path() {
        let (scenario, t) = line_scenario(vec![visual(0, 10.0, 60.0)]);
        for strategy in Strategy::ALL {
            let m = run_simulation(&scenario, &t, strategy, SimOptions::default());
            assert_eq!(m.deployed, 1, "{strategy}");
            assert_eq!(m.movements, 0);
            // Node 2 hosts, node 1 relays.
            assert_eq!(m.activations, 2);
            assert_eq!(m.arrivals, m.deployed + m.rejected);
        }
    }

    #[test]
    fn simultaneous_departure_frees_room_first() {
        let mut first = visual(0, 0.0, 60.0);
        first.demand.load = 700.0;
        let mut second = visual(1, 18_000.0, 60.0);
        second.demand.load = 700.0;
        let (scenario, t) = line_scenario(vec![first, second]);
        let m = run_simulation(&scenario, &t, Strategy::Heuristic, SimOptions::default());
        assert_eq!(m.deployed, 2);
    }

    #[test]
    fn live_placements_stay_feasible() {
        let apps = (0..6).map(|j| visual(j, j as f64 * 4000.0, if j % 2 == 0 { 60.0 } else { 33.65 })).collect();
        let (scenario, t) = line_scenario(apps);
        for strategy in Strategy::ALL {
            let mut sim = Simulation::new(&scenario, &t, strategy, SimOptions::default());
            while sim.step().is_some() {
                let st = sim.state();
                let report = check_full(st, &st.assignment(&t), &st.running, &t);
                assert!(report.feasible, "{strategy}: {report:?}");
            }
        }
    }

    #[test]
    fn strategy_names_parse() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("random".parse::<Strategy>().is_err());
    }
}
