//! Geometry, radio ranges, min-hop routing forest and interference sets.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AppId, AppRequest, EnergyConstants, NodeId, Point, RadioParams, SensorNode, TestPointId};

/// Distance at which a transmission at power `p` still reaches the receiver sensitivity.
pub fn transmission_range(p: f64, radio: &RadioParams) -> Result<f64> {
    range_for(p, radio.alpha, radio)
}

/// Distance within which a transmission at power `p` disturbs other receivers.
pub fn interference_range(p: f64, radio: &RadioParams) -> Result<f64> {
    range_for(p, radio.mu, radio)
}

fn range_for(p: f64, threshold: f64, radio: &RadioParams) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidInput(format!("transmit power must be positive, got {p}")));
    }
    Ok((p * radio.g0 / threshold).powf(1.0 / radio.gamma))
}

/// Test point to covering nodes, ascending by node id.
pub type CoverageMap = BTreeMap<(AppId, TestPointId), Vec<NodeId>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<SensorNode>,
    pub radio: RadioParams,
    pub energy: EnergyConstants,
    distance: Vec<f64>,
    /// Next hop towards the sink; `None` for sinks.
    pub parent: Vec<Option<NodeId>>,
    pub children: Vec<Vec<NodeId>>,
    pub sink_of: Vec<NodeId>,
    pub hops: Vec<u32>,
    /// Node list from each node to its sink, both ends included.
    pub paths: Vec<Vec<NodeId>>,
    /// Tree links (named by transmitter) that conflict with the uplink of each node.
    pub interference: Vec<Vec<NodeId>>,
    /// The uplink itself plus its conflicts, ascending.
    airtime_group: Vec<Vec<NodeId>>,
    /// Transmit energy per bit on the uplink: beta1 + beta2 * d^gamma.
    tx_cost: Vec<f64>,
}

impl Topology {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn distance(&self, i: NodeId, h: NodeId) -> f64 {
        self.distance[i * self.nodes.len() + h]
    }

    pub fn gain(&self, i: NodeId, h: NodeId) -> f64 {
        if i == h {
            return 0.0;
        }
        self.radio.g0 * self.distance(i, h).powf(-self.radio.gamma)
    }

    pub fn link_capacity(&self, i: NodeId, h: NodeId) -> f64 {
        self.nodes[i].resources.bandwidth.min(self.nodes[h].resources.bandwidth)
    }

    /// Capacity of the uplink of `i`; zero for sinks.
    pub fn uplink_capacity(&self, i: NodeId) -> f64 {
        self.parent[i].map_or(0.0, |p| self.link_capacity(i, p))
    }

    pub fn tx_cost(&self, i: NodeId) -> f64 {
        self.tx_cost[i]
    }

    pub fn is_sink(&self, i: NodeId) -> bool {
        self.nodes[i].is_sink
    }

    pub fn airtime_group(&self, i: NodeId) -> &[NodeId] {
        &self.airtime_group[i]
    }

    pub fn tx_power(&self, i: NodeId) -> f64 {
        self.nodes[i].tx_power.unwrap_or(self.radio.p_max)
    }

    /// Uplinks in ascending transmitter order.
    pub fn tree_links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.parent.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p)))
    }

    pub fn non_sinks(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|i| !self.nodes[*i].is_sink)
    }

    pub fn sinks(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|i| self.nodes[*i].is_sink)
    }

    /// Nodes whose sensing disc contains `p`, ascending.
    pub fn covering(&self, p: &Point) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.covers(p)).map(|n| n.id).collect()
    }
}

pub fn build_topology(nodes: &[SensorNode], radio: &RadioParams, energy: &EnergyConstants) -> Result<Topology> {
    radio.validate()?;
    energy.validate()?;
    let n = nodes.len();
    for (idx, node) in nodes.iter().enumerate() {
        if node.id != idx {
            return Err(Error::InvalidInput(format!(
                "node ids must be 0..n in order; found id {} at position {idx}",
                node.id
            )));
        }
        node.validate()?;
    }
    let sinks: Vec<NodeId> = nodes.iter().filter(|n| n.is_sink).map(|n| n.id).collect();
    if sinks.is_empty() {
        return Err(Error::NoSink);
    }

    let mut distance = vec![0.0; n * n];
    for i in 0..n {
        for h in 0..n {
            distance[i * n + h] = nodes[i].position.distance(&nodes[h].position);
        }
    }
    let power = |i: NodeId| nodes[i].tx_power.unwrap_or(radio.p_max);
    let mut reach = Vec::with_capacity(n);
    let mut interferes = Vec::with_capacity(n);
    for i in 0..n {
        reach.push(transmission_range(power(i), radio)?);
        interferes.push(interference_range(power(i), radio)?);
    }
    let can_send = |i: NodeId, h: NodeId| i != h && distance[i * n + h] <= reach[i];

    // Hop distance of every node to every sink, never relaying through another sink.
    let mut hop_to: Vec<Vec<u32>> = Vec::with_capacity(sinks.len());
    for &s in &sinks {
        let mut dist = vec![u32::MAX; n];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(h) = queue.pop_front() {
            if h != s && nodes[h].is_sink {
                continue;
            }
            for i in 0..n {
                if dist[i] == u32::MAX && can_send(i, h) {
                    dist[i] = dist[h] + 1;
                    queue.push_back(i);
                }
            }
        }
        hop_to.push(dist);
    }

    let mut parent = vec![None; n];
    let mut sink_of = vec![0; n];
    let mut hops = vec![0u32; n];
    for i in 0..n {
        if nodes[i].is_sink {
            sink_of[i] = i;
            continue;
        }
        let (best_idx, best) = hop_to
            .iter()
            .enumerate()
            .map(|(k, d)| (k, d[i]))
            .min_by_key(|&(k, d)| (d, sinks[k]))
            .expect("at least one sink");
        if best == u32::MAX {
            return Err(Error::Disconnected { node: i });
        }
        let s = sinks[best_idx];
        sink_of[i] = s;
        hops[i] = best;
        let dist = &hop_to[best_idx];
        let chosen = (0..n)
            .filter(|&h| dist[h] == best - 1 && can_send(i, h))
            .min_by(|&a, &b| distance[i * n + a].total_cmp(&distance[i * n + b]).then(a.cmp(&b)))
            .expect("a node one hop closer exists");
        parent[i] = Some(chosen);
    }

    let mut children = vec![Vec::new(); n];
    let mut paths = Vec::with_capacity(n);
    let mut tx_cost = vec![0.0; n];
    for i in 0..n {
        if let Some(p) = parent[i] {
            children[p].push(i);
            tx_cost[i] = energy.beta1 + energy.beta2 * distance[i * n + p].powf(radio.gamma);
        }
        let mut path = vec![i];
        let mut cur = i;
        while let Some(p) = parent[cur] {
            path.push(p);
            cur = p;
        }
        paths.push(path);
    }

    let links: Vec<(NodeId, NodeId)> = parent.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
    let conflict = |(g, ng): (NodeId, NodeId), (i, h): (NodeId, NodeId)| {
        g == i
            || g == h
            || ng == i
            || ng == h
            || distance[g * n + h] <= interferes[g]
            || distance[i * n + ng] <= interferes[i]
    };
    let mut interference = vec![Vec::new(); n];
    let mut airtime_group = vec![Vec::new(); n];
    for &a in &links {
        for &b in &links {
            if a != b && conflict(a, b) {
                interference[a.0].push(b.0);
            }
        }
        let mut group = interference[a.0].clone();
        group.push(a.0);
        group.sort_unstable();
        airtime_group[a.0] = group;
    }

    Ok(Topology {
        nodes: nodes.to_vec(),
        radio: *radio,
        energy: *energy,
        distance,
        parent,
        children,
        sink_of,
        hops,
        paths,
        interference,
        airtime_group,
        tx_cost,
    })
}

pub fn coverage_sets(topology: &Topology, apps: &[AppRequest]) -> CoverageMap {
    let mut map = CoverageMap::new();
    for app in apps {
        for tp in &app.test_points {
            map.insert((app.id, tp.id), topology.covering(&tp.position));
        }
    }
    map
}
