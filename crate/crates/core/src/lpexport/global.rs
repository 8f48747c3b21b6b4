use super::{LinearModel, ModelBuilder, Relation, RouteCap, Sense, VarKind};
use crate::model::{AppRequest, Scenario};
use crate::topology::Topology;

/// Sorted distinct arrival and departure times.
pub fn event_instants(apps: &[AppRequest]) -> Vec<f64> {
    let mut t: Vec<f64> = apps.iter().flat_map(|a| [a.arrival, a.departure()]).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Offline model over every event instant: maximize the number of deployed
/// applications. Instant `n` lasts until instant `n + 1`; before instant 0
/// every node is off and nothing is placed.
pub fn export_global(scenario: &Scenario, topology: &Topology) -> LinearModel {
    let mut apps: Vec<&AppRequest> = scenario.apps.iter().collect();
    apps.sort_by_key(|a| a.id);
    let times = event_instants(&scenario.apps);
    let nt = times.len();
    let dt: Vec<f64> = (0..nt).map(|n| if n + 1 < nt { times[n + 1] - times[n] } else { 0.0 }).collect();
    let window = |a: &AppRequest, n: usize| times[n] >= a.arrival && times[n] < a.departure();
    let nodes = topology.len();
    let big_m = 10.0 * apps.iter().map(|a| a.test_points.len() as f64 * a.demand.rate).sum::<f64>();
    let cover: Vec<Vec<Vec<usize>>> =
        apps.iter().map(|a| a.test_points.iter().map(|tp| topology.covering(&tp.position)).collect()).collect();

    let mut b = ModelBuilder::new("global", Sense::Maximize);
    let z: Vec<usize> = apps.iter().map(|a| b.binary(format!("z_{}", a.id))).collect();
    let mut h = Vec::new();
    for a in &apps {
        let per_tp: Vec<Vec<usize>> = a
            .test_points
            .iter()
            .map(|tp| (0..nt).map(|n| b.binary(format!("h_{}_{}_{}", a.id, tp.id, n))).collect())
            .collect();
        h.push(per_tp);
    }
    // y[i][a][k][n]
    let mut y = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let per_app: Vec<Vec<Vec<usize>>> = apps
            .iter()
            .map(|a| {
                a.test_points
                    .iter()
                    .map(|tp| (0..nt).map(|n| b.binary(format!("y_{}_{}_{}_{}", i, a.id, tp.id, n))).collect())
                    .collect()
            })
            .collect();
        y.push(per_app);
    }
    let x: Vec<Vec<usize>> = (0..nodes).map(|i| (0..nt).map(|n| b.binary(format!("x_{i}_{n}"))).collect()).collect();
    let u: Vec<Vec<usize>> = (0..nodes).map(|i| (0..nt).map(|n| b.binary(format!("u_{i}_{n}"))).collect()).collect();
    let mut v = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let per_app: Vec<Vec<Vec<usize>>> = apps
            .iter()
            .map(|a| {
                a.test_points
                    .iter()
                    .map(|tp| (0..nt).map(|n| b.binary(format!("v_{}_{}_{}_{}", i, a.id, tp.id, n))).collect())
                    .collect()
            })
            .collect();
        v.push(per_app);
    }
    let r: Vec<Vec<usize>> = (0..nodes).map(|i| (0..nt).map(|n| b.nonneg(format!("r_{i}_{n}"))).collect()).collect();
    let links: Vec<(usize, usize)> = topology.tree_links().collect();
    // f[i][n] is the flow on the uplink of i.
    let mut f: Vec<Option<Vec<usize>>> = vec![None; nodes];
    for &(i, p) in &links {
        f[i] = Some((0..nt).map(|n| b.nonneg(format!("f_{i}_{p}_{n}"))).collect());
    }
    let non_sinks: Vec<usize> = topology.non_sinks().collect();
    let mut pt = vec![Vec::new(); nodes];
    let mut pr = vec![Vec::new(); nodes];
    for &i in &non_sinks {
        pt[i] = (0..nt).map(|n| b.nonneg(format!("pt_{i}_{n}"))).collect();
        pr[i] = (0..nt).map(|n| b.nonneg(format!("pr_{i}_{n}"))).collect();
    }
    let uplink = |i: usize, n: usize| f[i].as_ref().map(|fs| fs[n]);
    let inflow =
        |i: usize, n: usize| -> Vec<usize> { topology.children[i].iter().filter_map(|&c| uplink(c, n)).collect() };

    for (a, app) in apps.iter().enumerate() {
        for (k, tp) in app.test_points.iter().enumerate() {
            for n in 0..nt {
                let mut terms: Vec<(usize, f64)> = cover[a][k].iter().map(|&i| (y[i][a][k][n], 1.0)).collect();
                terms.push((h[a][k][n], -1.0));
                b.row(format!("sensed_{}_{}_{}", app.id, tp.id, n), terms, Relation::Eq, 0.0);
            }
        }
    }
    for (a, app) in apps.iter().enumerate() {
        for (k, tp) in app.test_points.iter().enumerate() {
            for i in (0..nodes).filter(|i| !cover[a][k].contains(i)) {
                for n in 0..nt {
                    b.row(
                        format!("nocover_{}_{}_{}_{}", i, app.id, tp.id, n),
                        vec![(y[i][a][k][n], 1.0)],
                        Relation::Eq,
                        0.0,
                    );
                }
            }
        }
    }
    for (a, app) in apps.iter().enumerate() {
        for (k, tp) in app.test_points.iter().enumerate() {
            for &i in &cover[a][k] {
                for n in (0..nt).filter(|&n| !window(app, n)) {
                    b.row(
                        format!("window_{}_{}_{}_{}", i, app.id, tp.id, n),
                        vec![(y[i][a][k][n], 1.0)],
                        Relation::Eq,
                        0.0,
                    );
                }
            }
        }
    }
    for i in 0..nodes {
        for (a, app) in apps.iter().enumerate() {
            for n in (0..nt).filter(|&n| window(app, n)) {
                let terms = (0..app.test_points.len()).map(|k| (y[i][a][k][n], 1.0)).collect();
                b.row(format!("tpcap_{}_{}_{}", i, app.id, n), terms, Relation::Le, app.max_tp_on(i) as f64);
            }
        }
    }
    for (a, app) in apps.iter().enumerate() {
        let active: Vec<usize> = (0..nt).filter(|&n| window(app, n)).collect();
        let mut terms = vec![(z[a], (app.test_points.len() * active.len()) as f64)];
        for k in 0..app.test_points.len() {
            terms.extend(active.iter().map(|&n| (h[a][k][n], -1.0)));
        }
        b.row(format!("deployed_{}", app.id), terms, Relation::Eq, 0.0);
    }
    let hosted = |i: usize, n: usize, weight: &dyn Fn(&AppRequest) -> f64| -> Vec<(usize, f64)> {
        let mut terms = Vec::new();
        for (a, app) in apps.iter().enumerate() {
            for k in 0..app.test_points.len() {
                terms.push((y[i][a][k][n], weight(app)));
            }
        }
        terms
    };
    for i in 0..nodes {
        for n in 0..nt {
            b.row(
                format!("memory_{i}_{n}"),
                hosted(i, n, &|a| a.demand.memory),
                Relation::Le,
                topology.nodes[i].resources.storage,
            );
        }
    }
    for i in 0..nodes {
        for n in 0..nt {
            b.row(
                format!("processing_{i}_{n}"),
                hosted(i, n, &|a| a.demand.load),
                Relation::Le,
                topology.nodes[i].resources.processing,
            );
        }
    }
    for i in 0..nodes {
        for n in 0..nt {
            let mut terms = vec![(r[i][n], 1.0)];
            terms.extend(hosted(i, n, &|a| -a.demand.rate));
            b.row(format!("rate_{i}_{n}"), terms, Relation::Eq, 0.0);
        }
    }
    for &i in &non_sinks {
        for n in 0..nt {
            let mut terms: Vec<(usize, f64)> = inflow(i, n).into_iter().map(|fv| (fv, 1.0)).collect();
            if let Some(out) = uplink(i, n) {
                terms.push((out, -1.0));
            }
            terms.push((r[i][n], 1.0));
            b.row(format!("conserve_{i}_{n}"), terms, Relation::Eq, 0.0);
        }
    }
    for n in 0..nt {
        let mut terms = Vec::new();
        for (a, app) in apps.iter().enumerate() {
            for k in 0..app.test_points.len() {
                terms.push((h[a][k][n], app.demand.rate));
            }
        }
        for s in topology.sinks() {
            terms.extend(inflow(s, n).into_iter().map(|fv| (fv, -1.0)));
            terms.push((r[s][n], -1.0));
        }
        b.row(format!("collect_{n}"), terms, Relation::Eq, 0.0);
    }
    for i in 0..nodes {
        for n in 0..nt {
            let mut terms = vec![(x[i][n], 1.0), (r[i][n], -1.0)];
            terms.extend(inflow(i, n).into_iter().map(|fv| (fv, -1.0)));
            b.row(format!("activeLo_{i}_{n}"), terms, Relation::Le, 0.0);
        }
    }
    for i in 0..nodes {
        for n in 0..nt {
            let mut terms = vec![(r[i][n], 1.0), (x[i][n], -big_m)];
            terms.extend(inflow(i, n).into_iter().map(|fv| (fv, 1.0)));
            b.row(format!("activeHi_{i}_{n}"), terms, Relation::Le, 0.0);
        }
    }
    for &(i, p) in &links {
        for n in 0..nt {
            b.row(format!("route_{i}_{p}_{n}"), vec![(f[i].as_ref().unwrap()[n], 1.0)], Relation::Le, big_m);
        }
    }
    for &(i, _) in &links {
        let group = topology.airtime_group(i);
        let slack = big_m * group.iter().map(|&l| 1.0 / topology.uplink_capacity(l)).sum::<f64>();
        for n in 0..nt {
            let mut terms: Vec<(usize, f64)> = group
                .iter()
                .map(|&l| (f[l].as_ref().expect("airtime groups hold uplinks")[n], 1.0 / topology.uplink_capacity(l)))
                .collect();
            terms.push((x[i][n], slack));
            b.row(format!("airtime_{i}_{n}"), terms, Relation::Le, 1.0 + slack);
        }
    }
    for &i in &non_sinks {
        for n in 0..nt {
            let mut terms = vec![(pt[i][n], 1.0)];
            if let Some(out) = uplink(i, n) {
                terms.push((out, -topology.tx_cost(i)));
            }
            b.row(format!("ptx_{i}_{n}"), terms, Relation::Eq, 0.0);
        }
    }
    for &i in &non_sinks {
        for n in 0..nt {
            let mut terms = vec![(pr[i][n], 1.0)];
            terms.extend(inflow(i, n).into_iter().map(|fv| (fv, -topology.energy.rho)));
            b.row(format!("prx_{i}_{n}"), terms, Relation::Eq, 0.0);
        }
    }
    for &i in &non_sinks {
        let phi = topology.nodes[i].activation_cost;
        let mut terms = Vec::new();
        for n in 0..nt {
            terms.push((pt[i][n], dt[n]));
            terms.push((pr[i][n], dt[n]));
            terms.extend(hosted(i, n, &|a| dt[n] * a.demand.proc_power));
            terms.push((x[i][n], phi));
            terms.push((u[i][n], -phi));
            for (a, app) in apps.iter().enumerate() {
                let delta = app.move_cost_on(i);
                for k in 0..app.test_points.len() {
                    terms.push((y[i][a][k][n], delta));
                    terms.push((v[i][a][k][n], -delta));
                }
            }
        }
        b.row(format!("energy_{i}"), terms, Relation::Le, topology.nodes[i].resources.energy);
    }
    product_rows(&mut b, "u", "X", nodes, nt, |i, n| (u[i][n], x[i][n]), |i| format!("{i}"));
    for (a, app) in apps.iter().enumerate() {
        for k in 0..app.test_points.len() {
            product_rows(
                &mut b,
                "v",
                "Y",
                nodes,
                nt,
                |i, n| (v[i][a][k][n], y[i][a][k][n]),
                |i| format!("{}_{}_{}", i, app.id, app.test_points[k].id),
            );
        }
    }

    b.objective(z.iter().map(|&zj| (zj, 1.0)).collect());
    let caps = links.iter().map(|&(from, to)| RouteCap { from, to, cap: big_m }).collect();
    b.set_big_m(big_m, caps);
    let model = b.finish();
    debug_assert!(model.variables.iter().all(|v| v.kind == VarKind::Binary || v.lower == 0.0));
    model
}

/// Rows making `p[n]` the product of `q[n]` and `q[n - 1]`, with `q[-1] = 0`.
fn product_rows(
    b: &mut ModelBuilder,
    product: &str,
    factor: &str,
    nodes: usize,
    nt: usize,
    pair: impl Fn(usize, usize) -> (usize, usize),
    suffix: impl Fn(usize) -> String,
) {
    for i in 0..nodes {
        let s = suffix(i);
        for n in 0..nt {
            let (p, q) = pair(i, n);
            b.row(format!("{product}Le{factor}_{s}_{n}"), vec![(p, 1.0), (q, -1.0)], Relation::Le, 0.0);
            let prev = (n > 0).then(|| pair(i, n - 1).1);
            let mut terms = vec![(p, 1.0)];
            terms.extend(prev.map(|q0| (q0, -1.0)));
            b.row(format!("{product}LePrev_{s}_{n}"), terms, Relation::Le, 0.0);
            let mut terms = vec![(p, 1.0), (q, -1.0)];
            terms.extend(prev.map(|q0| (q0, -1.0)));
            b.row(format!("{product}Ge_{s}_{n}"), terms, Relation::Ge, -1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpexport::enumerate;
    use crate::model::*;
    use crate::topology::build_topology;

    fn pair(apps: Vec<AppRequest>) -> (Scenario, Topology) {
        let mut nodes = vec![
            SensorNode::new(0, Point::new(0.0, 0.0), preset_beaglebone(), true),
            SensorNode::new(1, Point::new(30.0, 0.0), preset_beaglebone(), false),
        ];
        nodes[0].sensing_range = 1.0;
        let s = Scenario { radio: RadioParams::reference(), energy: EnergyConstants::reference(), nodes, apps };
        let t = build_topology(&s.nodes, &s.radio, &s.energy).unwrap();
        (s, t)
    }

    fn app(id: usize, arrival: f64, activity: f64) -> AppRequest {
        AppRequest {
            id,
            arrival,
            activity,
            demand: preset_visual_app(),
            test_points: vec![TestPoint { id: 0, position: Point::new(30.0, 5.0) }],
            max_tp_per_node: 1,
            move_cost: 10.0,
            max_tp_overrides: Default::default(),
            move_cost_overrides: Default::default(),
        }
    }

    #[test]
    fn hand_count_of_variables() {
        let (s, t) = pair(vec![app(0, 0.0, 100.0)]);
        let m = export_global(&s, &t);
        let count = |p: &str| m.variables.iter().filter(|v| v.name.starts_with(p)).count();
        assert_eq!(count("z_"), 1);
        assert_eq!(count("h_"), 2);
        assert_eq!(count("y_"), 4);
        assert_eq!(count("x_"), 4);
        assert_eq!(count("u_"), 4);
        assert_eq!(count("v_"), 4);
        assert_eq!(count("r_"), 4);
        assert_eq!(count("f_"), 2);
        assert_eq!(count("pt_"), 2);
        assert_eq!(count("pr_"), 2);
        assert_eq!(m.variables.len(), 29);
        assert_eq!(m.binaries(), 19);
    }

    #[test]
    fn objective_is_number_of_deployed_apps() {
        let (s, t) = pair(vec![app(0, 0.0, 100.0), app(1, 50.0, 100.0)]);
        let m = export_global(&s, &t);
        let z: Vec<usize> = [0, 1].iter().map(|j| m.variable(&format!("z_{j}")).unwrap()).collect();
        assert_eq!(m.objective, vec![(z[0], 1.0), (z[1], 1.0)]);
    }

    #[test]
    fn every_family_has_rows() {
        let (s, t) = pair(vec![app(0, 0.0, 100.0)]);
        let m = export_global(&s, &t);
        let families: Vec<String> = m.family_counts().into_iter().map(|(f, _)| f).collect();
        for f in [
            "sensed",
            "nocover",
            "window",
            "tpcap",
            "deployed",
            "memory",
            "processing",
            "rate",
            "conserve",
            "collect",
            "activeLo",
            "activeHi",
            "route",
            "airtime",
            "ptx",
            "prx",
            "energy",
            "uLeX",
            "uLePrev",
            "uGe",
            "vLeY",
            "vLePrev",
            "vGe",
        ] {
            assert!(families.iter().any(|g| g == f), "missing {f}");
        }
        assert!(m.manifest().families.iter().all(|f| f.description != "unclassified"));
    }

    #[test]
    fn overlapping_apps_compete_for_one_host() {
        // Node 1 is the only host and takes one test point per app, so both fit.
        let (s, t) = pair(vec![app(0, 0.0, 100.0), app(1, 50.0, 100.0)]);
        assert_eq!(enumerate(&export_global(&s, &t), 100_000).unwrap().optimum, Some(2.0));
        // Half the processing budget per app: the overlap admits only one.
        let (mut s, t) = pair(vec![app(0, 0.0, 100.0), app(1, 50.0, 100.0)]);
        for a in &mut s.apps {
            a.demand.load = 0.6 * s.nodes[1].resources.processing;
        }
        assert_eq!(enumerate(&export_global(&s, &t), 100_000).unwrap().optimum, Some(1.0));
        // Disjoint windows: both fit again.
        let (mut s, t) = pair(vec![app(0, 0.0, 100.0), app(1, 200.0, 100.0)]);
        for a in &mut s.apps {
            a.demand.load = 0.6 * s.nodes[1].resources.processing;
        }
        assert_eq!(enumerate(&export_global(&s, &t), 100_000).unwrap().optimum, Some(2.0));
    }

    #[test]
    fn energy_budget_limits_deployments() {
        let (mut s, t0) = pair(vec![app(0, 0.0, 18_000.0), app(1, 20_000.0, 18_000.0)]);
        // Enough battery for roughly one full activity period.
        s.nodes[1].resources.energy = 5000.0;
        let t = build_topology(&s.nodes, &s.radio, &s.energy).unwrap();
        assert_eq!(t0.len(), t.len());
        assert_eq!(enumerate(&export_global(&s, &t), 100_000).unwrap().optimum, Some(1.0));
    }

    #[test]
    fn instants_are_sorted_and_distinct() {
        let apps = vec![app(0, 10.0, 5.0), app(1, 0.0, 15.0), app(2, 15.0, 1.0)];
        assert_eq!(event_instants(&apps), vec![0.0, 10.0, 15.0, 16.0]);
    }

    #[test]
    fn no_apps_gives_an_empty_model() {
        let (s, t) = pair(vec![]);
        let m = export_global(&s, &t);
        assert!(m.objective.is_empty() && m.variables.is_empty());
        assert!(m.rows.iter().all(|r| r.terms.is_empty()));
        assert_eq!(enumerate(&m, 10).unwrap().optimum, Some(0.0));
    }
}
