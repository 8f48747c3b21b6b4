//! Mixed-integer models in CPLEX LP text form.
//!
//! [`export_global`] builds the offline model that knows every arrival and
//! departure in advance; [`export_dynamic`] builds the model solved when one
//! application arrives. Both produce a [`LinearModel`] that can be written with
//! [`write_lp`], read back with [`parse_lp`] and solved on tiny instances by
//! [`enumerate`].
//!
//! Row names are `family_index_index...`; the family is the part before the
//! first underscore and [`LpManifest`] counts rows per family.

mod dynamic;
mod enumerate;
mod format;
mod global;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use dynamic::export_dynamic;
pub use enumerate::{enumerate, Enumeration, DEFAULT_ENUMERATION_LIMIT};
pub use format::{parse_lp, write_lp};
pub use global::{event_instants, export_global};

use crate::model::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    /// (variable index, coefficient); no zero coefficients, no repeated variable.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn family(&self) -> &str {
        family_of(&self.name)
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v]).sum()
    }
}

fn family_of(name: &str) -> &str {
    name.split('_').next().unwrap_or(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Capacity bound of a routing-tree link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteCap {
    pub from: NodeId,
    pub to: NodeId,
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub name: String,
    pub sense: Sense,
    pub objective: Vec<(usize, f64)>,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Bound on any node's aggregate rate, used to switch nodes on and off.
    pub big_m: f64,
    /// Links of the routing tree and their flow caps; every other link is capped at 0.
    pub route_caps: Vec<RouteCap>,
}

impl LinearModel {
    pub fn variable(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Rows per family, in order of first appearance.
    pub fn family_counts(&self) -> Vec<(String, usize)> {
        let mut counts: Vec<(String, usize)> = Vec::new();
        for row in &self.rows {
            match counts.iter_mut().find(|(f, _)| f == row.family()) {
                Some((_, n)) => *n += 1,
                None => counts.push((row.family().to_string(), 1)),
            }
        }
        counts
    }

    pub fn manifest(&self) -> LpManifest {
        LpManifest {
            model: self.name.clone(),
            sense: self.sense,
            variables: self.variables.len(),
            binaries: self.binaries(),
            rows: self.rows.len(),
            big_m: self.big_m,
            big_m_rule: BIG_M_RULE.to_string(),
            route_links: self.route_caps.len(),
            families: self
                .family_counts()
                .into_iter()
                .map(|(family, rows)| FamilyCount { description: describe_family(&family).to_string(), family, rows })
                .collect(),
        }
    }
}

const BIG_M_RULE: &str =
    "10 x sum over applications of test points x rate; tree links capped at the same value, all other links at 0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCount {
    pub family: String,
    pub description: String,
    pub rows: usize,
}

/// Sidecar summary of an exported model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpManifest {
    pub model: String,
    pub sense: Sense,
    pub variables: usize,
    pub binaries: usize,
    pub rows: usize,
    pub big_m: f64,
    pub big_m_rule: String,
    pub route_links: usize,
    pub families: Vec<FamilyCount>,
}

pub fn describe_family(family: &str) -> &'static str {
    match family {
        "sensed" => "a test point counts as sensed when exactly one covering node senses it",
        "cover" => "every test point of every running application is sensed by one covering node",
        "nocover" => "nodes outside a test point's coverage set never sense it",
        "window" => "no sensing outside the application's activity window",
        "tpcap" => "per-node cap on test points of one application",
        "deployed" => "an application is deployed iff all its test points are sensed over its whole window",
        "memory" => "storage budget",
        "processing" => "processing budget",
        "rate" => "data generated at a node",
        "aggregate" => "link flow is the sum of per-application flows",
        "conserve" => "flow conservation at non-sink nodes",
        "collect" => "all generated data reaches the sinks",
        "activeLo" => "a node with no traffic is off",
        "activeHi" => "a node with traffic is on",
        "route" => "flow only on routing-tree links",
        "airtime" => "airtime of a link and its interferers at most 1 while the link carries traffic",
        "ptx" => "transmitter power",
        "prx" => "receiver power",
        "energy" => "energy spent by a non-sink node, switching charges included",
        "minlam" => "minimum residual energy lies below every node's residual energy",
        "uLeX" | "uLePrev" | "uGe" => "u is the product of a node's activity at two consecutive instants",
        "vLeY" | "vLePrev" | "vGe" => "v is the product of a placement at two consecutive instants",
        _ => "unclassified",
    }
}

/// Incremental construction with unique variable names.
#[derive(Debug)]
pub(crate) struct ModelBuilder {
    model: LinearModel,
    index: HashMap<String, usize>,
}

impl ModelBuilder {
    pub fn new(name: &str, sense: Sense) -> Self {
        Self {
            model: LinearModel {
                name: name.to_string(),
                sense,
                objective: Vec::new(),
                variables: Vec::new(),
                rows: Vec::new(),
                big_m: 0.0,
                route_caps: Vec::new(),
            },
            index: HashMap::new(),
        }
    }

    pub fn var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        let id = self.model.variables.len();
        let previous = self.index.insert(name.clone(), id);
        assert!(previous.is_none(), "variable {name} declared twice");
        self.model.variables.push(Variable { name, kind, lower, upper });
        id
    }

    pub fn binary(&mut self, name: String) -> usize {
        self.var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn nonneg(&mut self, name: String) -> usize {
        self.var(name, VarKind::Continuous, 0.0, f64::INFINITY)
    }

    pub fn row(&mut self, name: String, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        let terms = merge_terms(terms);
        self.model.rows.push(Row { name, terms, relation, rhs });
    }

    pub fn objective(&mut self, terms: Vec<(usize, f64)>) {
        self.model.objective = merge_terms(terms);
    }

    pub fn set_big_m(&mut self, big_m: f64, route_caps: Vec<RouteCap>) {
        self.model.big_m = big_m;
        self.model.route_caps = route_caps;
    }

    pub fn finish(self) -> LinearModel {
        self.model
    }
}

/// Sums repeated variables and drops zero coefficients, keeping first-seen order.
pub(crate) fn merge_terms(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (v, a) in terms {
        match out.iter_mut().find(|(w, _)| *w == v) {
            Some((_, b)) => *b += a,
            None => out.push((v, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}
