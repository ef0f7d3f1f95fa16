//! MEDP instances: raw pair lists, matching instances with leaf terminals,
//! and the capacity unitization transform.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, MultiGraph, NodeId};
use crate::routing::{IntegralRouting, RoutedPath};

pub type DemandId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Demand {
    pub s: NodeId,
    pub t: NodeId,
}

impl Demand {
    pub fn new(s: NodeId, t: NodeId) -> Self {
        Demand { s, t }
    }

    pub fn other(&self, x: NodeId) -> NodeId {
        if x == self.s {
            self.t
        } else {
            self.s
        }
    }
}

/// A graph with a multiset of demand pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub graph: MultiGraph,
    pub demands: Vec<Demand>,
}

impl Instance {
    pub fn new(graph: MultiGraph, demands: Vec<Demand>) -> Result<Self> {
        for (h, d) in demands.iter().enumerate() {
            if !graph.has_node(d.s) || !graph.has_node(d.t) {
                return Err(Error::invalid(format!(
                    "demand {h} ({}, {}) references a node not in the graph",
                    d.s, d.t
                )));
            }
            if d.s == d.t {
                return Err(Error::invalid(format!("demand {h} joins node {} to itself", d.s)));
            }
        }
        Ok(Instance { graph, demands })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_str(text)?;
        raw.into_instance()
    }

    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            nodes: self.graph.node_count(),
            edges: self
                .graph
                .edges()
                .iter()
                .map(|e| EdgeJson {
                    u: e.u,
                    v: e.v,
                    cap: e.cap,
                })
                .collect(),
            demands: self.demands.iter().map(|d| DemandJson { s: d.s, t: d.t }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub u: NodeId,
    pub v: NodeId,
    pub cap: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandJson {
    pub s: NodeId,
    pub t: NodeId,
}

/// Wire format: `{"nodes": N, "edges": [{"u","v","cap"}], "demands": [{"s","t"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub nodes: usize,
    pub edges: Vec<EdgeJson>,
    pub demands: Vec<DemandJson>,
}

impl InstanceJson {
    pub fn into_instance(self) -> Result<Instance> {
        let graph = MultiGraph::from_edges(self.nodes, self.edges.iter().map(|e| (e.u, e.v, e.cap)))?;
        Instance::new(graph, self.demands.iter().map(|d| Demand::new(d.s, d.t)).collect())
    }
}

/// The triple (G, X, M): every terminal is a degree-1 leaf and the demands
/// form a perfect matching on the terminals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingInstance {
    graph: MultiGraph,
    demands: Vec<Demand>,
    terminal_of: BTreeMap<NodeId, DemandId>,
}

impl MatchingInstance {
    pub fn new(graph: MultiGraph, demands: Vec<Demand>) -> Result<Self> {
        let mut terminal_of = BTreeMap::new();
        for (h, d) in demands.iter().enumerate() {
            for x in [d.s, d.t] {
                if !graph.has_node(x) {
                    return Err(Error::invalid(format!("terminal {x} of demand {h} not in graph")));
                }
                if terminal_of.insert(x, h).is_some() {
                    return Err(Error::invalid(format!("node {x} is a terminal of two demands")));
                }
                if graph.degree(x) != 1 {
                    return Err(Error::invalid(format!(
                        "terminal {x} has degree {} (leaf required)",
                        graph.degree(x)
                    )));
                }
            }
        }
        Ok(MatchingInstance {
            graph,
            demands,
            terminal_of,
        })
    }

    pub fn graph(&self) -> &MultiGraph {
        &self.graph
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn demand(&self, h: DemandId) -> Demand {
        self.demands[h]
    }

    pub fn demand_count(&self) -> usize {
        self.demands.len()
    }

    pub fn terminals(&self) -> BTreeSet<NodeId> {
        self.terminal_of.keys().copied().collect()
    }

    pub fn demand_of(&self, v: NodeId) -> Option<DemandId> {
        self.terminal_of.get(&v).copied()
    }

    pub fn is_terminal(&self, v: NodeId) -> bool {
        self.terminal_of.contains_key(&v)
    }

    /// The edge joining terminal `v` to the rest of the graph.
    pub fn leaf_edge(&self, v: NodeId) -> EdgeId {
        self.graph.incident(v)[0]
    }
}

/// Result of attaching fresh leaf terminals to every demand endpoint.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub instance: MatchingInstance,
    /// Number of edges that come from the raw graph; edges at or past this
    /// id are leaf attachments.
    pub base_edges: usize,
    pub base_nodes: usize,
    /// Raw demand endpoints, indexed by demand id.
    pub raw: Vec<Demand>,
}

/// Attaches a fresh leaf (unit edge) to every endpoint occurrence; repeated
/// endpoints get distinct leaves. Demand ids are preserved.
pub fn normalize_to_matching(graph: &MultiGraph, pairs: &[Demand]) -> Result<Normalized> {
    let mut g = graph.clone();
    let mut demands = Vec::with_capacity(pairs.len());
    for (h, d) in pairs.iter().enumerate() {
        if !graph.has_node(d.s) || !graph.has_node(d.t) {
            return Err(Error::invalid(format!("pair {h} ({}, {}) references a missing node", d.s, d.t)));
        }
        let s = g.add_node();
        g.add_edge(s, d.s, 1)?;
        let t = g.add_node();
        g.add_edge(t, d.t, 1)?;
        demands.push(Demand::new(s, t));
    }
    Ok(Normalized {
        instance: MatchingInstance::new(g, demands)?,
        base_edges: graph.edge_count(),
        base_nodes: graph.node_count(),
        raw: pairs.to_vec(),
    })
}

impl Normalized {
    /// Maps a routing of the matching instance to the raw pairs by removing
    /// the two leaf edges of every path.
    pub fn to_raw(&self, routing: &IntegralRouting) -> IntegralRouting {
        let paths = routing
            .paths
            .iter()
            .map(|p| RoutedPath {
                demand: p.demand,
                edges: p.edges.iter().copied().filter(|&e| e < self.base_edges).collect(),
            })
            .collect();
        IntegralRouting {
            paths,
            bound: routing.bound.clone(),
        }
    }

    /// Raw routing to the matching instance: prepends and appends leaf edges.
    pub fn from_raw(&self, routing: &IntegralRouting) -> Result<IntegralRouting> {
        let g = self.instance.graph();
        let mut paths = Vec::with_capacity(routing.paths.len());
        for p in &routing.paths {
            let raw = self
                .raw
                .get(p.demand)
                .ok_or_else(|| Error::invalid(format!("unknown demand {}", p.demand)))?;
            let d = self.instance.demand(p.demand);
            // raw paths may be stored in either direction
            let forward = crate::graph::walk_nodes(g, raw.s, &p.edges)
                .map(|w| w.last() == Some(&raw.t))
                .unwrap_or(false);
            let mut edges = Vec::with_capacity(p.edges.len() + 2);
            edges.push(self.instance.leaf_edge(d.s));
            if forward {
                edges.extend(p.edges.iter().copied());
            } else {
                edges.extend(p.edges.iter().rev().copied());
            }
            edges.push(self.instance.leaf_edge(d.t));
            paths.push(RoutedPath { demand: p.demand, edges });
        }
        Ok(IntegralRouting {
            paths,
            bound: routing.bound.clone(),
        })
    }
}

/// Graph with every edge of capacity c replaced by c parallel unit edges.
#[derive(Debug, Clone)]
pub struct Unitized {
    pub graph: MultiGraph,
    /// `origin[e]` is the original edge of unit edge `e`.
    pub origin: Vec<EdgeId>,
}

pub fn unitize_capacities(graph: &MultiGraph) -> Unitized {
    let mut g = MultiGraph::new(graph.node_count());
    let mut origin = Vec::new();
    for (id, e) in graph.edges().iter().enumerate() {
        for _ in 0..e.cap {
            g.add_edge(e.u, e.v, 1).expect("copy of a valid edge");
            origin.push(id);
        }
    }
    Unitized { graph: g, origin }
}

impl Unitized {
    pub fn to_original(&self, routing: &IntegralRouting) -> IntegralRouting {
        IntegralRouting {
            paths: routing
                .paths
                .iter()
                .map(|p| RoutedPath {
                    demand: p.demand,
                    edges: p.edges.iter().map(|&e| self.origin[e]).collect(),
                })
                .collect(),
            bound: routing.bound.clone(),
        }
    }

    /// Unit copies of each original edge, in id order.
    pub fn copies(&self) -> Vec<Vec<EdgeId>> {
        let n = self.origin.iter().copied().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); n];
        for (u, &o) in self.origin.iter().enumerate() {
            out[o].push(u);
        }
        out
    }

    /// Original routing to the unit graph, spreading the paths over
    /// distinct copies where possible.
    pub fn from_original(&self, routing: &IntegralRouting) -> IntegralRouting {
        let copies = self.copies();
        let mut next = vec![0usize; copies.len()];
        let paths = routing
            .paths
            .iter()
            .map(|p| RoutedPath {
                demand: p.demand,
                edges: p
                    .edges
                    .iter()
                    .map(|&e| {
                        let c = &copies[e];
                        let pick = c[next[e] % c.len()];
                        next[e] += 1;
                        pick
                    })
                    .collect(),
            })
            .collect();
        IntegralRouting {
            paths,
            bound: routing.bound.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    #[test]
    fn normalize_single_pair_on_path() {
        let g = MultiGraph::from_edges(2, [(0, 1, 1)]).unwrap();
        let n = normalize_to_matching(&g, &[Demand::new(0, 1)]).unwrap();
        assert_eq!(n.instance.graph().node_count(), 4);
        assert_eq!(n.instance.demand_count(), 1);
        let d = n.instance.demand(0);
        assert_eq!(n.instance.graph().degree(d.s), 1);
        assert_eq!(n.instance.graph().degree(d.t), 1);
    }

    #[test]
    fn normalize_repeated_endpoint_gets_distinct_leaves() {
        let g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1), (2, 0, 1)]).unwrap();
        let n = normalize_to_matching(&g, &[Demand::new(0, 1), Demand::new(0, 2)]).unwrap();
        assert_eq!(n.instance.terminals().len(), 4);
        assert_eq!(n.instance.demand_count(), 2);
        assert_ne!(n.instance.demand(0).s, n.instance.demand(1).s);
    }

    #[test]
    fn normalize_rejects_missing_nodes() {
        let g = MultiGraph::from_edges(2, [(0, 1, 1)]).unwrap();
        assert!(matches!(
            normalize_to_matching(&g, &[Demand::new(0, 5)]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn matching_instance_requires_leaves() {
        let g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1)]).unwrap();
        assert!(MatchingInstance::new(g.clone(), vec![Demand::new(0, 1)]).is_err());
        assert!(MatchingInstance::new(g.clone(), vec![Demand::new(0, 2)]).is_ok());
        assert!(MatchingInstance::new(g, vec![Demand::new(0, 2), Demand::new(2, 0)]).is_err());
    }

    #[test]
    fn unitize_cap3_edge() {
        let g = MultiGraph::from_edges(2, [(0, 1, 3)]).unwrap();
        let u = unitize_capacities(&g);
        assert_eq!(u.graph.edge_count(), 3);
        assert!(u.graph.edges().iter().all(|e| e.cap == 1));
        assert_eq!(u.origin, vec![0, 0, 0]);
    }

    #[test]
    fn unitize_identity_on_unit_graph() {
        let g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1)]).unwrap();
        let u = unitize_capacities(&g);
        assert_eq!(u.graph, g);
        assert_eq!(u.origin, vec![0, 1]);
    }

    #[test]
    fn unitized_triangle_routing_maps_back_with_bounded_load() {
        // triangle with capacity 2 everywhere; route three demands through
        // every possible copy combination and recount original loads
        let g = MultiGraph::from_edges(3, [(0, 1, 2), (1, 2, 2), (2, 0, 2)]).unwrap();
        let u = unitize_capacities(&g);
        let copies = u.copies();
        let unit_routing = IntegralRouting {
            paths: vec![
                RoutedPath { demand: 0, edges: vec![copies[0][0]] },
                RoutedPath { demand: 1, edges: vec![copies[0][1]] },
                RoutedPath { demand: 2, edges: vec![copies[1][0], copies[2][0]] },
            ],
            bound: None,
        };
        let unit_loads = unit_routing.loads(&u.graph).unwrap();
        assert!(unit_loads.iter().all(|&l| l <= 1));
        let back = u.to_original(&unit_routing);
        let loads = back.loads(&g).unwrap();
        assert!(loads.iter().all(|&l| l <= 2));
        assert_eq!(back.congestion(&g).unwrap(), qi(1));
        let again = u.from_original(&back);
        assert_eq!(again.congestion(&u.graph).unwrap(), qi(1));
    }

    #[test]
    fn instance_json_round_trip() {
        let text = r#"{"nodes":3,"edges":[{"u":0,"v":1,"cap":2},{"u":1,"v":2,"cap":1}],"demands":[{"s":0,"t":2}]}"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.graph.cap(0), 2);
        assert_eq!(serde_json::to_string(&inst.to_json()).unwrap(), text);
        assert!(Instance::from_json(r#"{"nodes":2,"edges":[{"u":0,"v":0,"cap":1}],"demands":[]}"#).is_err());
    }
}
