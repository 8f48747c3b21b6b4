use super::{LinearModel, ModelBuilder, Relation, RouteCap, Sense, VarKind};
use crate::exact::Objective;
use crate::model::AppRequest;
use crate::sim::NetworkState;
use crate::topology::Topology;

/// Model solved when `arriving` shows up: every running application and the
/// new one must be placed. Switching charges use the state's current
/// placements and active flags; `lam_i` is the residual energy of non-sink `i`.
pub fn export_dynamic(
    state: &NetworkState,
    arriving: &AppRequest,
    topology: &Topology,
    objective: Objective,
) -> LinearModel {
    let apps = state.apps_with(arriving);
    let nodes = topology.len();
    let non_sinks: Vec<usize> = topology.non_sinks().collect();
    let links: Vec<(usize, usize)> = topology.tree_links().collect();
    let big_m = 10.0 * apps.iter().map(|a| a.test_points.len() as f64 * a.demand.rate).sum::<f64>();
    let remaining: Vec<f64> = apps.iter().map(|a| a.remaining(state.clock)).collect();
    let cover: Vec<Vec<Vec<usize>>> =
        apps.iter().map(|a| a.test_points.iter().map(|tp| topology.covering(&tp.position)).collect()).collect();

    let mut b = ModelBuilder::new(&format!("dynamic-{}-app-{}", objective.name(), arriving.id), Sense::Maximize);
    // y[i][a][k]
    let y: Vec<Vec<Vec<usize>>> = (0..nodes)
        .map(|i| {
            apps.iter()
                .map(|a| a.test_points.iter().map(|tp| b.binary(format!("y_{}_{}_{}", i, a.id, tp.id))).collect())
                .collect()
        })
        .collect();
    let x: Vec<usize> = (0..nodes).map(|i| b.binary(format!("x_{i}"))).collect();
    let r: Vec<Vec<usize>> =
        (0..nodes).map(|i| apps.iter().map(|a| b.nonneg(format!("r_{}_{}", i, a.id))).collect()).collect();
    let mut fa: Vec<Option<Vec<usize>>> = vec![None; nodes];
    for &(i, p) in &links {
        fa[i] = Some(apps.iter().map(|a| b.nonneg(format!("f_{}_{}_{}", i, p, a.id))).collect());
    }
    let mut f: Vec<Option<usize>> = vec![None; nodes];
    for &(i, p) in &links {
        f[i] = Some(b.nonneg(format!("f_{i}_{p}")));
    }
    let mut pt = vec![Vec::new(); nodes];
    let mut pr = vec![Vec::new(); nodes];
    for &i in &non_sinks {
        pt[i] = apps.iter().map(|a| b.nonneg(format!("pt_{}_{}", i, a.id))).collect();
        pr[i] = apps.iter().map(|a| b.nonneg(format!("pr_{}_{}", i, a.id))).collect();
    }
    let mut lam_i = vec![None; nodes];
    for &i in &non_sinks {
        lam_i[i] = Some(b.nonneg(format!("lam_{i}")));
    }
    let lam = matches!(objective, Objective::MaxMin | Objective::Mixed) && !non_sinks.is_empty();
    let lam = lam.then(|| b.var("lam".into(), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY));

    let children_app = |i: usize, a: usize| -> Vec<usize> {
        topology.children[i].iter().filter_map(|&c| fa[c].as_ref().map(|v| v[a])).collect()
    };
    let children = |i: usize| -> Vec<usize> { topology.children[i].iter().filter_map(|&c| f[c]).collect() };

    for (a, app) in apps.iter().enumerate() {
        for (k, tp) in app.test_points.iter().enumerate() {
            let terms = cover[a][k].iter().map(|&i| (y[i][a][k], 1.0)).collect();
            b.row(format!("cover_{}_{}", app.id, tp.id), terms, Relation::Eq, 1.0);
        }
    }
    for (a, app) in apps.iter().enumerate() {
        for (k, tp) in app.test_points.iter().enumerate() {
            for i in (0..nodes).filter(|i| !cover[a][k].contains(i)) {
                b.row(format!("nocover_{}_{}_{}", i, app.id, tp.id), vec![(y[i][a][k], 1.0)], Relation::Eq, 0.0);
            }
        }
    }
    for i in 0..nodes {
        for (a, app) in apps.iter().enumerate() {
            let terms = (0..app.test_points.len()).map(|k| (y[i][a][k], 1.0)).collect();
            b.row(format!("tpcap_{}_{}", i, app.id), terms, Relation::Le, app.max_tp_on(i) as f64);
        }
    }
    let hosted = |i: usize, weight: &dyn Fn(usize, &AppRequest) -> f64| -> Vec<(usize, f64)> {
        let mut terms = Vec::new();
        for (a, app) in apps.iter().enumerate() {
            for k in 0..app.test_points.len() {
                terms.push((y[i][a][k], weight(a, app)));
            }
        }
        terms
    };
    for i in 0..nodes {
        b.row(
            format!("memory_{i}"),
            hosted(i, &|_, a| a.demand.memory),
            Relation::Le,
            topology.nodes[i].resources.storage,
        );
    }
    for i in 0..nodes {
        b.row(
            format!("processing_{i}"),
            hosted(i, &|_, a| a.demand.load),
            Relation::Le,
            topology.nodes[i].resources.processing,
        );
    }
    for i in 0..nodes {
        for (a, app) in apps.iter().enumerate() {
            let mut terms = vec![(r[i][a], 1.0)];
            terms.extend((0..app.test_points.len()).map(|k| (y[i][a][k], -app.demand.rate)));
            b.row(format!("rate_{}_{}", i, app.id), terms, Relation::Eq, 0.0);
        }
    }
    for &(i, p) in &links {
        let mut terms = vec![(f[i].unwrap(), 1.0)];
        terms.extend(fa[i].as_ref().unwrap().iter().map(|&v| (v, -1.0)));
        b.row(format!("aggregate_{i}_{p}"), terms, Relation::Eq, 0.0);
    }
    for &i in &non_sinks {
        for (a, app) in apps.iter().enumerate() {
            let mut terms: Vec<(usize, f64)> = children_app(i, a).into_iter().map(|v| (v, 1.0)).collect();
            if let Some(out) = &fa[i] {
                terms.push((out[a], -1.0));
            }
            terms.push((r[i][a], 1.0));
            b.row(format!("conserve_{}_{}", i, app.id), terms, Relation::Eq, 0.0);
        }
    }
    {
        let generated: f64 = apps.iter().map(|a| a.test_points.len() as f64 * a.demand.rate).sum();
        let mut terms = Vec::new();
        for s in topology.sinks() {
            terms.extend(children(s).into_iter().map(|v| (v, 1.0)));
            terms.extend(r[s].iter().map(|&v| (v, 1.0)));
        }
        b.row("collect".into(), terms, Relation::Eq, generated);
    }
    for i in 0..nodes {
        let mut terms = vec![(x[i], 1.0)];
        terms.extend(children(i).into_iter().map(|v| (v, -1.0)));
        terms.extend(r[i].iter().map(|&v| (v, -1.0)));
        b.row(format!("activeLo_{i}"), terms, Relation::Le, 0.0);
    }
    for i in 0..nodes {
        let mut terms = vec![(x[i], -big_m)];
        terms.extend(children(i).into_iter().map(|v| (v, 1.0)));
        terms.extend(r[i].iter().map(|&v| (v, 1.0)));
        b.row(format!("activeHi_{i}"), terms, Relation::Le, 0.0);
    }
    for &(i, p) in &links {
        b.row(format!("route_{i}_{p}"), vec![(f[i].unwrap(), 1.0)], Relation::Le, big_m);
    }
    for &(i, _) in &links {
        let group = topology.airtime_group(i);
        let slack = big_m * group.iter().map(|&l| 1.0 / topology.uplink_capacity(l)).sum::<f64>();
        let mut terms: Vec<(usize, f64)> = group
            .iter()
            .map(|&l| (f[l].expect("airtime groups hold uplinks"), 1.0 / topology.uplink_capacity(l)))
            .collect();
        terms.push((x[i], slack));
        b.row(format!("airtime_{i}"), terms, Relation::Le, 1.0 + slack);
    }
    for &i in &non_sinks {
        for (a, app) in apps.iter().enumerate() {
            let mut terms = vec![(pt[i][a], 1.0)];
            if let Some(out) = &fa[i] {
                terms.push((out[a], -topology.tx_cost(i)));
            }
            b.row(format!("ptx_{}_{}", i, app.id), terms, Relation::Eq, 0.0);
        }
    }
    for &i in &non_sinks {
        for (a, app) in apps.iter().enumerate() {
            let mut terms = vec![(pr[i][a], 1.0)];
            terms.extend(children_app(i, a).into_iter().map(|v| (v, -topology.energy.rho)));
            b.row(format!("prx_{}_{}", i, app.id), terms, Relation::Eq, 0.0);
        }
    }
    for &i in &non_sinks {
        let mut terms = Vec::new();
        for a in 0..apps.len() {
            terms.push((pt[i][a], remaining[a]));
            terms.push((pr[i][a], remaining[a]));
        }
        terms.extend(hosted(i, &|a, app| remaining[a] * app.demand.proc_power));
        for (a, app) in apps.iter().enumerate() {
            for (k, tp) in app.test_points.iter().enumerate() {
                if state.placements.get(&(app.id, tp.id)) != Some(&i) {
                    terms.push((y[i][a][k], app.move_cost_on(i)));
                }
            }
        }
        if !state.active[i] {
            terms.push((x[i], topology.nodes[i].activation_cost));
        }
        terms.push((lam_i[i].unwrap(), 1.0));
        b.row(format!("energy_{i}"), terms, Relation::Eq, state.energy[i]);
    }
    if let Some(l) = lam {
        for &i in &non_sinks {
            b.row(format!("minlam_{i}"), vec![(l, 1.0), (lam_i[i].unwrap(), -1.0)], Relation::Le, 0.0);
        }
    }

    let sum_terms = |w: f64| -> Vec<(usize, f64)> { non_sinks.iter().map(|&i| (lam_i[i].unwrap(), w)).collect() };
    let objective_terms = match (objective, lam) {
        (Objective::OnlyRestrictions, _) => Vec::new(),
        (Objective::Total, _) => sum_terms(1.0),
        (Objective::MaxMin, Some(l)) => vec![(l, 1.0)],
        (Objective::Mixed, Some(l)) => {
            let mut t = vec![(l, 1.0)];
            t.extend(sum_terms(1.0 / non_sinks.len() as f64));
            t
        }
        (_, None) => Vec::new(),
    };
    b.objective(objective_terms);
    let caps = links.iter().map(|&(from, to)| RouteCap { from, to, cap: big_m }).collect();
    b.set_big_m(big_m, caps);
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::solve_arrival;
    use crate::lpexport::{enumerate, parse_lp, write_lp};
    use crate::model::*;
    use crate::sim::apply_decision;
    use crate::topology::build_topology;

    fn fixture() -> Topology {
        let mut nodes = vec![
            SensorNode::new(0, Point::new(0.0, 0.0), preset_beaglebone(), true),
            SensorNode::new(1, Point::new(20.0, 10.0), preset_beaglebone(), false),
            SensorNode::new(2, Point::new(20.0, -10.0), preset_beaglebone(), false),
            SensorNode::new(3, Point::new(45.0, 10.0), preset_beaglebone(), false),
        ];
        nodes[0].sensing_range = 1.0;
        nodes[3].energy_scale(0.5);
        build_topology(&nodes, &RadioParams::reference(), &EnergyConstants::reference()).unwrap()
    }

    trait Scale {
        fn energy_scale(&mut self, f: f64);
    }

    impl Scale for SensorNode {
        fn energy_scale(&mut self, f: f64) {
            self.resources.energy *= f;
        }
    }

    fn app(id: usize, arrival: f64, points: &[(f64, f64)]) -> AppRequest {
        AppRequest {
            id,
            arrival,
            activity: 18_000.0,
            demand: preset_visual_app(),
            test_points: points
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

    fn assert_matches_solver(state: &NetworkState, arriving: &AppRequest, t: &Topology) {
        for objective in Objective::ALL {
            let model = export_dynamic(state, arriving, t, objective);
            let e = enumerate(&model, 1_000_000).unwrap();
            let d = solve_arrival(state, arriving, t, objective);
            assert_eq!(e.optimum.is_some(), d.accepted(), "{objective}");
            if let (Some(lp), Some(v)) = (e.optimum, d.objective_value) {
                assert!((lp - v).abs() <= 1e-6 * (1.0 + v.abs()), "{objective}: {lp} vs {v}");
            }
        }
    }

    #[test]
    fn optimum_matches_solver_on_empty_network() {
        let t = fixture();
        let state = NetworkState::new(&t);
        assert_matches_solver(&state, &app(0, 0.0, &[(20.0, 0.0), (30.0, 5.0)]), &t);
    }

    #[test]
    fn optimum_matches_solver_with_running_apps() {
        let t = fixture();
        let mut state = NetworkState::new(&t);
        let first = app(0, 0.0, &[(20.0, 0.0)]);
        let d = solve_arrival(&state, &first, &t, Objective::Mixed);
        apply_decision(&mut state, &first, &d, &t);
        crate::sim::advance_energy(&mut state, 600.0, &t);
        let second = app(1, 600.0, &[(22.0, 0.0), (40.0, 12.0)]);
        assert_matches_solver(&state, &second, &t);
    }

    #[test]
    fn uncovered_point_is_infeasible() {
        let t = fixture();
        let state = NetworkState::new(&t);
        let lonely = app(0, 0.0, &[(500.0, 500.0)]);
        let model = export_dynamic(&state, &lonely, &t, Objective::Total);
        assert_eq!(enumerate(&model, 1000).unwrap().optimum, None);
        assert_matches_solver(&state, &lonely, &t);
    }

    #[test]
    fn mixed_objective_row() {
        let t = fixture();
        let state = NetworkState::new(&t);
        let m = export_dynamic(&state, &app(0, 0.0, &[(20.0, 0.0)]), &t, Objective::Mixed);
        let lam = m.variable("lam").unwrap();
        let mut expected = vec![(lam, 1.0)];
        for i in [1, 2, 3] {
            expected.push((m.variable(&format!("lam_{i}")).unwrap(), 1.0 / 3.0));
        }
        assert_eq!(m.objective, expected);
        let or = export_dynamic(&state, &app(0, 0.0, &[(20.0, 0.0)]), &t, Objective::OnlyRestrictions);
        assert!(or.objective.is_empty());
        assert!(or.variable("lam").is_none());
    }

    #[test]
    fn empty_state_holds_only_the_arriving_app() {
        let t = fixture();
        let state = NetworkState::new(&t);
        let m = export_dynamic(&state, &app(7, 0.0, &[(20.0, 0.0)]), &t, Objective::Total);
        for v in m.variables.iter().filter(|v| v.name.starts_with("y_") || v.name.starts_with("r_")) {
            assert!(v.name.split('_').nth(2) == Some("7"), "{}", v.name);
        }
        let families: Vec<String> = m.family_counts().into_iter().map(|(f, _)| f).collect();
        for f in [
            "cover",
            "nocover",
            "tpcap",
            "memory",
            "processing",
            "rate",
            "aggregate",
            "conserve",
            "collect",
            "activeLo",
            "activeHi",
            "route",
            "airtime",
            "ptx",
            "prx",
            "energy",
        ] {
            assert!(families.iter().any(|g| g == f), "missing {f}");
        }
        assert_eq!(parse_lp(&write_lp(&m)).unwrap(), m);
    }

    #[test]
    fn big_m_is_ten_times_total_demand() {
        let t = fixture();
        let state = NetworkState::new(&t);
        let m = export_dynamic(&state, &app(0, 0.0, &[(20.0, 0.0), (30.0, 0.0)]), &t, Objective::Total);
        assert_eq!(m.big_m, 10.0 * 2.0 * preset_visual_app().rate);
        assert_eq!(m.route_caps.len(), 3);
        assert!(m.route_caps.iter().all(|c| c.cap == m.big_m));
    }
}
