use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{route_supplies_or_cut, SupplyOutcome};
use crate::graph::{reversed, shortcut, walk_nodes, EdgeId, NodeId, View};
use crate::instance::{Demand, MatchingInstance};
use crate::rational::{q, qi, Q};
use crate::reductions::clusters::{cluster_paths, cluster_terminals, Cluster};
use crate::routing::{marginals_of, oriented_nodes, FlowPath, FractionalRouting, IntegralRouting, RoutedPath};

/// Everything needed to map routings of the moved instance back.
#[derive(Debug, Clone, Serialize)]
pub struct TransformRecord {
    pub clusters: Vec<Cluster>,
    /// Hub u_i of every cluster.
    pub hubs: Vec<NodeId>,
    /// Edge r_i u_i of every cluster.
    pub hub_edges: Vec<EdgeId>,
    /// Moved terminal -> its cluster.
    pub cluster_of: BTreeMap<NodeId, usize>,
    /// Moved terminal -> the fresh leaf on its hub that replaces it.
    pub relocated: BTreeMap<NodeId, NodeId>,
    /// Node and edge counts of the graph before moving; ids below these are
    /// shared with it.
    pub base_nodes: usize,
    pub base_edges: usize,
    #[serde(skip)]
    pub instance: MatchingInstance,
    #[serde(skip)]
    original: MatchingInstance,
}

impl TransformRecord {
    pub fn original(&self) -> &MatchingInstance {
        &self.original
    }

    fn inverse(&self) -> BTreeMap<NodeId, NodeId> {
        self.relocated.iter().map(|(&old, &new)| (new, old)).collect()
    }
}

/// Moves the terminals in `s` onto pendant hubs attached to `r`, using the
/// whole graph for clustering and exit paths.
pub fn move_terminals(
    inst: &MatchingInstance,
    routing: &FractionalRouting,
    s: &BTreeSet<NodeId>,
    r: &BTreeSet<NodeId>,
) -> Result<(MatchingInstance, FractionalRouting, TransformRecord)> {
    move_terminals_within(inst, routing, s, r, &View::full(inst.graph()))
}

/// As [`move_terminals`], with clusters, trees and exit paths confined to
/// `within`. The returned routing is the extended flow scaled by 1/5 and
/// is feasible in the new instance.
pub fn move_terminals_within(
    inst: &MatchingInstance,
    routing: &FractionalRouting,
    s: &BTreeSet<NodeId>,
    r: &BTreeSet<NodeId>,
    within: &View<'_>,
) -> Result<(MatchingInstance, FractionalRouting, TransformRecord)> {
    if let Some(t) = s.iter().find(|&&t| !inst.is_terminal(t)) {
        return Err(Error::invalid(format!("node {t} is not a terminal")));
    }
    let g = inst.graph();
    let marg = marginals_of(routing, inst);
    let x: BTreeMap<NodeId, Q> = s.iter().map(|&t| (t, marg[&t].clone())).collect();

    let clusters = if s.is_empty() {
        Vec::new()
    } else {
        if r.is_empty() {
            return Err(Error::invalid("cannot move terminals to an empty set"));
        }
        if let SupplyOutcome::Cut(cut) = route_supplies_or_cut(within, &x, r, &qi(1))? {
            return Err(Error::Infeasible(Box::new(cut)));
        }
        let cs = cluster_terminals(within, s, r, &x)?;
        cluster_paths(within, cs, r)?
    };

    let mut graph = g.clone();
    let mut hubs = Vec::new();
    let mut hub_edges = Vec::new();
    for c in &clusters {
        let u = graph.add_node();
        hub_edges.push(graph.add_edge(c.anchor, u, 1)?);
        hubs.push(u);
    }
    let mut cluster_of = BTreeMap::new();
    let mut relocated = BTreeMap::new();
    for (i, c) in clusters.iter().enumerate() {
        for &t in &c.terminals {
            let leaf = graph.add_node();
            graph.add_edge(hubs[i], leaf, 1)?;
            cluster_of.insert(t, i);
            relocated.insert(t, leaf);
        }
    }
    let phi = |v: NodeId| relocated.get(&v).copied().unwrap_or(v);
    let demands: Vec<Demand> = inst.demands().iter().map(|d| Demand::new(phi(d.s), phi(d.t))).collect();
    let new_inst = MatchingInstance::new(graph, demands)?;

    // prefix walk from the new leaf of a moved terminal back to it
    let mut prefix: BTreeMap<NodeId, Vec<EdgeId>> = BTreeMap::new();
    for (&t, &i) in &cluster_of {
        let c = &clusters[i];
        let leaf = relocated[&t];
        let mut walk = vec![new_inst.leaf_edge(leaf), hub_edges[i]];
        walk.extend(reversed(&c.exit));
        walk.extend(reversed(&c.tree_segment(within, t)?));
        prefix.insert(t, walk);
    }
    let fifth = q(1, 5);
    let mut paths = Vec::new();
    for p in &routing.paths {
        let d = inst.demand(p.demand);
        let nodes = oriented_nodes(g, d, &p.edges)
            .ok_or_else(|| Error::invalid(format!("flow path of demand {} is not a simple path", p.demand)))?;
        let forward = if walk_nodes(g, d.s, &p.edges).as_ref() == Some(&nodes) {
            p.edges.clone()
        } else {
            reversed(&p.edges)
        };
        let mut walk = prefix.get(&d.s).cloned().unwrap_or_default();
        walk.extend(forward);
        if let Some(tail) = prefix.get(&d.t) {
            walk.extend(reversed(tail));
        }
        let start = phi(d.s);
        paths.push(FlowPath {
            demand: p.demand,
            edges: shortcut(new_inst.graph(), start, &walk),
            value: &p.value * &fifth,
        });
    }
    let moved = FractionalRouting::new(paths);
    moved
        .validate(&new_inst)
        .map_err(|e| Error::internal(format!("moved flow infeasible: {e}")))?;
    let record = TransformRecord {
        clusters,
        hubs,
        hub_edges,
        cluster_of,
        relocated,
        base_nodes: g.node_count(),
        base_edges: g.edge_count(),
        instance: new_inst.clone(),
        original: inst.clone(),
    };
    Ok((new_inst, moved, record))
}

/// Hubs touched by a routed path of the moved instance.
fn hubs_used(record: &TransformRecord, path: &RoutedPath) -> Vec<usize> {
    let d = record.instance.demand(path.demand);
    let inv = record.inverse();
    let mut used: Vec<usize> = [d.s, d.t]
        .iter()
        .filter_map(|v| inv.get(v))
        .map(|old| record.cluster_of[old])
        .collect();
    used.dedup();
    used
}

/// Greedily keeps paths (in the given order) so that every hub is used by
/// at most one path, the precondition of [`lift_routing`].
pub fn restrict_to_hub_capacity(record: &TransformRecord, routing: &IntegralRouting) -> IntegralRouting {
    let mut taken = vec![false; record.hubs.len()];
    let mut kept = Vec::new();
    for p in &routing.paths {
        let hubs = hubs_used(record, p);
        if hubs.iter().all(|&h| !taken[h]) {
            for h in hubs {
                taken[h] = true;
            }
            kept.push(p.clone());
        }
    }
    IntegralRouting {
        paths: kept,
        bound: routing.bound.clone(),
    }
}

/// Maps a routing of the moved instance back to the original demands:
/// each hub prefix is replaced by the exit path and tree segment of its
/// cluster, then the walk is shortcut. Congestion grows by at most 2.
///
/// Every hub may serve at most one path. Two pairs relocated to the same
/// hub could otherwise both reuse that cluster's tree.
pub fn lift_routing(record: &TransformRecord, routing: &IntegralRouting) -> Result<IntegralRouting> {
    let g2 = record.instance.graph();
    let orig = record.original();
    let g = orig.graph();
    let within = View::full(g);
    let mut users = vec![0usize; record.hubs.len()];
    for p in &routing.paths {
        for h in hubs_used(record, p) {
            users[h] += 1;
        }
        for &e in &p.edges {
            if let Some(h) = record.hub_edges.iter().position(|&x| x == e) {
                if !hubs_used(record, p).contains(&h) {
                    return Err(Error::invalid(format!("path of demand {} crosses hub {h}", p.demand)));
                }
            }
        }
    }
    if let Some(h) = users.iter().position(|&u| u > 1) {
        return Err(Error::invalid(format!("hub {h} (capacity 1) serves {} paths", users[h])));
    }
    let inv = record.inverse();
    let mut out = Vec::new();
    for p in &routing.paths {
        let d2 = record.instance.demand(p.demand);
        let d = orig.demand(p.demand);
        let nodes = oriented_nodes(g2, d2, &p.edges)
            .ok_or_else(|| Error::invalid(format!("path of demand {} is not a simple path", p.demand)))?;
        let forward = if walk_nodes(g2, d2.s, &p.edges).as_ref() == Some(&nodes) {
            p.edges.clone()
        } else {
            reversed(&p.edges)
        };
        // strip the hub parts at both ends and splice in tree + exit walks
        let mut middle: &[EdgeId] = &forward;
        let mut head = Vec::new();
        let mut tail = Vec::new();
        if let Some(old) = inv.get(&d2.s) {
            let c = &record.clusters[record.cluster_of[old]];
            head.extend(c.tree_segment(&within, *old)?);
            if middle.get(1).is_some_and(|&e| record.hub_edges.contains(&e)) {
                head.extend(c.exit.iter().copied());
                middle = &middle[2..];
            } else {
                // both ends on the same hub: leaf, hub, leaf
                middle = &middle[1..];
            }
        }
        if let Some(old) = inv.get(&d2.t) {
            let c = &record.clusters[record.cluster_of[old]];
            tail.extend(reversed(&c.tree_segment(&within, *old)?));
            let n = middle.len();
            if n >= 2 && record.hub_edges.contains(&middle[n - 2]) {
                tail = reversed(&c.exit).into_iter().chain(tail).collect();
                middle = &middle[..n - 2];
            } else {
                middle = &middle[..n.saturating_sub(1)];
            }
        }
        let walk: Vec<EdgeId> = head.into_iter().chain(middle.iter().copied()).chain(tail).collect();
        if walk.iter().any(|&e| e >= record.base_edges) {
            return Err(Error::internal(format!("lifted walk of demand {} leaves the base graph", p.demand)));
        }
        let edges = shortcut(g, d.s, &walk);
        out.push(RoutedPath {
            demand: p.demand,
            edges,
        });
    }
    let bound = routing.bound.as_ref().map(|b| b + qi(2));
    let lifted = IntegralRouting { paths: out, bound };
    lifted.validate_on(g, orig.demands(), None)?;
    Ok(lifted)
}

/// Sum of x(v) over `nodes` for the routing's marginals.
pub fn marginal_mass(routing: &FractionalRouting, inst: &MatchingInstance, nodes: &BTreeSet<NodeId>) -> Q {
    let m = marginals_of(routing, inst);
    nodes.iter().filter_map(|v| m.get(v)).fold(Q::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MultiGraph;
    use crate::routing::congestion_of;

    /// Hub 0 with arms 0-1, 0-2; leaves 3 (on 1) and 4 (on 2) form one pair.
    fn arms() -> (MatchingInstance, FractionalRouting) {
        let g = MultiGraph::from_edges(5, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 4, 1)]).unwrap();
        let inst = MatchingInstance::new(g, vec![Demand::new(3, 4)]).unwrap();
        let f = FractionalRouting::new(vec![FlowPath {
            demand: 0,
            edges: vec![2, 0, 1, 3],
            value: qi(1),
        }]);
        (inst, f)
    }

    #[test]
    fn empty_set_is_identity() {
        let (inst, f) = arms();
        let (inst2, f2, rec) = move_terminals(&inst, &f, &BTreeSet::new(), &BTreeSet::from([0])).unwrap();
        assert_eq!(inst2.graph().node_count(), inst.graph().node_count());
        assert_eq!(f2.value(), q(1, 5));
        assert!(rec.clusters.is_empty());
    }

    #[test]
    fn pair_moved_to_one_hub() {
        let (inst, f) = arms();
        let s = BTreeSet::from([3, 4]);
        let (inst2, f2, rec) = move_terminals(&inst, &f, &s, &BTreeSet::from([0])).unwrap();
        assert_eq!(rec.clusters.len(), 1);
        assert_eq!(f2.value(), q(1, 5));
        let d = inst2.demand(0);
        let hub = rec.hubs[0];
        assert_eq!(inst2.graph().edge(inst2.leaf_edge(d.s)).other(d.s), hub);
        assert_eq!(inst2.graph().edge(inst2.leaf_edge(d.t)).other(d.t), hub);
        // route the pair through the hub and lift it back
        let inner = IntegralRouting {
            paths: vec![RoutedPath {
                demand: 0,
                edges: vec![inst2.leaf_edge(d.s), inst2.leaf_edge(d.t)],
            }],
            bound: Some(qi(1)),
        };
        let lifted = lift_routing(&rec, &inner).unwrap();
        assert_eq!(lifted.routed(), 1);
        assert!(congestion_of(&lifted, inst.graph()).unwrap() <= qi(3));
    }

    #[test]
    fn blocked_precondition_returns_cut() {
        let g = MultiGraph::from_edges(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        let inst = MatchingInstance::new(g, vec![Demand::new(0, 3)]).unwrap();
        let f = FractionalRouting::new(vec![FlowPath {
            demand: 0,
            edges: vec![0, 1, 2],
            value: qi(1),
        }]);
        // R is an isolated node, so nothing can reach it
        let mut g2 = inst.graph().clone();
        let lonely = g2.add_node();
        let inst2 = MatchingInstance::new(g2, vec![Demand::new(0, 3)]).unwrap();
        let err = move_terminals(&inst2, &f, &BTreeSet::from([0]), &BTreeSet::from([lonely])).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn hub_used_twice_is_rejected() {
        // star centre 0 with four leaves; two pairs, both moved
        let g = MultiGraph::from_edges(5, (1..5).map(|i| (0, i, 1))).unwrap();
        let inst = MatchingInstance::new(g, vec![Demand::new(1, 2), Demand::new(3, 4)]).unwrap();
        let f = FractionalRouting::new(vec![
            FlowPath { demand: 0, edges: vec![0, 1], value: qi(1) },
            FlowPath { demand: 1, edges: vec![2, 3], value: qi(1) },
        ]);
        let (inst2, _, rec) = move_terminals(&inst, &f, &BTreeSet::from([1, 2, 3, 4]), &BTreeSet::from([0])).unwrap();
        let paths: Vec<RoutedPath> = (0..2)
            .map(|h| {
                let d = inst2.demand(h);
                let p = View::full(inst2.graph()).bfs_path(d.s, |x| x == d.t).unwrap();
                RoutedPath { demand: h, edges: p }
            })
            .collect();
        let inner = IntegralRouting { paths, bound: None };
        let same_hub = rec.cluster_of[&1] == rec.cluster_of[&3];
        if same_hub {
            assert!(lift_routing(&rec, &inner).is_err());
            let kept = restrict_to_hub_capacity(&rec, &inner);
            assert_eq!(kept.routed(), 1);
            assert!(lift_routing(&rec, &kept).is_ok());
        } else {
            assert!(lift_routing(&rec, &inner).is_ok());
        }
    }
}
