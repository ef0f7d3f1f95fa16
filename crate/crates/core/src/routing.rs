//! Fractional and integral routings, their validation and JSON format.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{walk_nodes, EdgeId, MultiGraph, NodeId};
use crate::instance::{Demand, DemandId, MatchingInstance};
use crate::rational::{format_q, qu, serde_q, Q};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowPath {
    pub demand: DemandId,
    pub edges: Vec<EdgeId>,
    pub value: Q,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FractionalRouting {
    pub paths: Vec<FlowPath>,
}

/// Node sequence of `edges` read from `d.s`, accepting paths stored in
/// either direction. `None` unless the path is simple and joins s to t.
pub fn oriented_nodes(graph: &MultiGraph, d: Demand, edges: &[EdgeId]) -> Option<Vec<NodeId>> {
    let simple = |nodes: &Vec<NodeId>| nodes.iter().collect::<BTreeSet<_>>().len() == nodes.len();
    if let Some(nodes) = walk_nodes(graph, d.s, edges) {
        if nodes.last() == Some(&d.t) && simple(&nodes) {
            return Some(nodes);
        }
    }
    if let Some(mut nodes) = walk_nodes(graph, d.t, edges) {
        if nodes.last() == Some(&d.s) && simple(&nodes) {
            nodes.reverse();
            return Some(nodes);
        }
    }
    None
}

fn check_path(graph: &MultiGraph, demands: &[Demand], demand: DemandId, edges: &[EdgeId]) -> Result<()> {
    let d = *demands
        .get(demand)
        .ok_or_else(|| Error::invalid(format!("path for unknown demand {demand}")))?;
    if let Some(&e) = edges.iter().find(|&&e| !graph.has_edge(e)) {
        return Err(Error::invalid(format!("path of demand {demand} uses missing edge {e}")));
    }
    if oriented_nodes(graph, d, edges).is_none() {
        return Err(Error::invalid(format!(
            "path of demand {demand} is not a simple {}-{} path",
            d.s, d.t
        )));
    }
    Ok(())
}

impl FractionalRouting {
    pub fn new(paths: Vec<FlowPath>) -> Self {
        FractionalRouting { paths }
    }

    pub fn value(&self) -> Q {
        self.paths.iter().map(|p| &p.value).sum()
    }

    /// Flow sent for every demand id below `count`.
    pub fn demand_totals(&self, count: usize) -> Vec<Q> {
        let mut z = vec![Q::zero(); count];
        for p in &self.paths {
            if p.demand < count {
                z[p.demand] += &p.value;
            }
        }
        z
    }

    pub fn edge_loads(&self, graph: &MultiGraph) -> Vec<Q> {
        let mut load = vec![Q::zero(); graph.edge_count()];
        for p in &self.paths {
            for &e in &p.edges {
                load[e] += &p.value;
            }
        }
        load
    }

    /// Checks that paths are simple and join their demand's endpoints,
    /// values are non-negative, each demand gets at most 1 and every edge
    /// load is at most its capacity.
    pub fn validate_on(&self, graph: &MultiGraph, demands: &[Demand]) -> Result<()> {
        for p in &self.paths {
            check_path(graph, demands, p.demand, &p.edges)?;
            if p.value.is_negative() {
                return Err(Error::invalid(format!("negative flow on a path of demand {}", p.demand)));
            }
        }
        for (h, z) in self.demand_totals(demands.len()).iter().enumerate() {
            if z > &Q::one() {
                return Err(Error::invalid(format!("demand {h} receives {} > 1", format_q(z))));
            }
        }
        for (e, l) in self.edge_loads(graph).iter().enumerate() {
            if l > &qu(graph.cap(e)) {
                return Err(Error::invalid(format!(
                    "edge {e} carries {} over capacity {}",
                    format_q(l),
                    graph.cap(e)
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self, inst: &MatchingInstance) -> Result<()> {
        self.validate_on(inst.graph(), inst.demands())
    }

    /// Combines identical (demand, edge sequence) paths and drops zeros;
    /// output sorted by demand, then edges.
    pub fn merged(&self) -> FractionalRouting {
        let mut acc: BTreeMap<(DemandId, Vec<EdgeId>), Q> = BTreeMap::new();
        for p in &self.paths {
            *acc.entry((p.demand, p.edges.clone())).or_insert_with(Q::zero) += &p.value;
        }
        FractionalRouting {
            paths: acc
                .into_iter()
                .filter(|(_, v)| !v.is_zero())
                .map(|((demand, edges), value)| FlowPath { demand, edges, value })
                .collect(),
        }
    }

    pub fn scaled(&self, factor: &Q) -> FractionalRouting {
        FractionalRouting {
            paths: self
                .paths
                .iter()
                .map(|p| FlowPath {
                    demand: p.demand,
                    edges: p.edges.clone(),
                    value: &p.value * factor,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> RoutingJson {
        RoutingJson {
            paths: self
                .paths
                .iter()
                .map(|p| PathJson {
                    demand: p.demand,
                    edges: p.edges.clone(),
                    value: p.value.clone(),
                })
                .collect(),
        }
    }
}

/// x(v) = z_h for each terminal v of demand h.
pub fn marginals_of(routing: &FractionalRouting, inst: &MatchingInstance) -> BTreeMap<NodeId, Q> {
    let z = routing.demand_totals(inst.demand_count());
    let mut x = BTreeMap::new();
    for (h, d) in inst.demands().iter().enumerate() {
        x.insert(d.s, z[h].clone());
        x.insert(d.t, z[h].clone());
    }
    x
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutedPath {
    pub demand: DemandId,
    pub edges: Vec<EdgeId>,
}

/// A set of routed demands, one path each. `bound` is the congestion the
/// producer promises.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntegralRouting {
    pub paths: Vec<RoutedPath>,
    pub bound: Option<Q>,
}

impl IntegralRouting {
    pub fn routed(&self) -> usize {
        self.paths.len()
    }

    pub fn routed_demands(&self) -> BTreeSet<DemandId> {
        self.paths.iter().map(|p| p.demand).collect()
    }

    pub fn loads(&self, graph: &MultiGraph) -> Result<Vec<u64>> {
        let mut load = vec![0u64; graph.edge_count()];
        for p in &self.paths {
            for &e in &p.edges {
                *load
                    .get_mut(e)
                    .ok_or_else(|| Error::invalid(format!("path uses missing edge {e}")))? += 1;
            }
        }
        Ok(load)
    }

    /// max_e load(e) / c(e); zero for an empty routing.
    pub fn congestion(&self, graph: &MultiGraph) -> Result<Q> {
        let load = self.loads(graph)?;
        Ok(load
            .iter()
            .enumerate()
            .map(|(e, &l)| Q::new(l.into(), graph.cap(e).into()))
            .max()
            .unwrap_or_else(Q::zero))
    }

    /// Paths simple and joining endpoints, at most one per demand, and
    /// congestion within `cap` when given.
    pub fn validate_on(&self, graph: &MultiGraph, demands: &[Demand], cap: Option<&Q>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for p in &self.paths {
            check_path(graph, demands, p.demand, &p.edges)?;
            if !seen.insert(p.demand) {
                return Err(Error::invalid(format!("demand {} routed twice", p.demand)));
            }
        }
        if let Some(cap) = cap {
            let c = self.congestion(graph)?;
            if &c > cap {
                return Err(Error::Guarantee(format!(
                    "congestion {} exceeds {}",
                    format_q(&c),
                    format_q(cap)
                )));
            }
        }
        Ok(())
    }

    pub fn sorted(mut self) -> Self {
        self.paths.sort_by(|a, b| a.demand.cmp(&b.demand).then_with(|| a.edges.cmp(&b.edges)));
        self
    }

    pub fn to_json(&self) -> RoutingJson {
        RoutingJson {
            paths: self
                .paths
                .iter()
                .map(|p| PathJson {
                    demand: p.demand,
                    edges: p.edges.clone(),
                    value: Q::one(),
                })
                .collect(),
        }
    }
}

pub fn congestion_of(routing: &IntegralRouting, graph: &MultiGraph) -> Result<Q> {
    routing.congestion(graph)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathJson {
    pub demand: DemandId,
    pub edges: Vec<EdgeId>,
    #[serde(with = "serde_q")]
    pub value: Q,
}

/// Wire format: `{"paths": [{"demand", "edges", "value": "p/q"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingJson {
    pub paths: Vec<PathJson>,
}

impl RoutingJson {
    pub fn into_fractional(self) -> FractionalRouting {
        FractionalRouting {
            paths: self
                .paths
                .into_iter()
                .map(|p| FlowPath {
                    demand: p.demand,
                    edges: p.edges,
                    value: p.value,
                })
                .collect(),
        }
    }

    /// Every value must be exactly 1.
    pub fn into_integral(self) -> Result<IntegralRouting> {
        let mut paths = Vec::with_capacity(self.paths.len());
        for p in self.paths {
            if !p.value.is_one() {
                return Err(Error::invalid(format!(
                    "integral routing has value {} on demand {}",
                    format_q(&p.value),
                    p.demand
                )));
            }
            paths.push(RoutedPath {
                demand: p.demand,
                edges: p.edges,
            });
        }
        Ok(IntegralRouting { paths, bound: None })
    }
}
