//! Supply networks: fractional supplies routed to a target set, exact via
//! common-denominator scaling, with a violated-cut certificate on failure.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::maxflow::{decompose, Dinic, FlowArc};
use crate::graph::{EdgeId, NodeId, View};
use crate::rational::{common_denominator, format_q, qu, scale_to_int, Q};

/// Base view plus a super source feeding `supplies` and a super sink
/// absorbing at `sinks`. All amounts are multiplied by `scale`.
#[derive(Debug, Clone)]
pub struct FlowNetwork<'g> {
    pub view: View<'g>,
    pub supplies: BTreeMap<NodeId, Q>,
    pub sinks: BTreeSet<NodeId>,
    pub scale: BigInt,
}

#[derive(Debug, Clone)]
pub struct MaxFlow {
    /// Flow value in scaled units.
    pub value: BigInt,
    /// Signed scaled flow per graph edge, positive in the `u -> v` direction.
    pub edge_flow: BTreeMap<EdgeId, BigInt>,
    /// Scaled amount leaving the super source into each supplied node.
    pub injected: BTreeMap<NodeId, BigInt>,
    pub absorbed: BTreeMap<NodeId, BigInt>,
    /// Graph nodes on the source side of the minimal min cut.
    pub source_side: BTreeSet<NodeId>,
}

impl<'g> FlowNetwork<'g> {
    pub fn new(view: View<'g>, supplies: BTreeMap<NodeId, Q>, sinks: BTreeSet<NodeId>) -> Result<Self> {
        for (v, s) in &supplies {
            if s.is_negative() {
                return Err(Error::invalid(format!("negative supply at node {v}")));
            }
            if !view.has_node(*v) {
                return Err(Error::invalid(format!("supply at node {v} outside the graph")));
            }
        }
        let scale = common_denominator(supplies.values());
        Ok(FlowNetwork {
            view,
            supplies,
            sinks,
            scale,
        })
    }

    pub fn total_supply(&self) -> Q {
        self.supplies.values().sum()
    }

    pub fn max_flow(&self) -> MaxFlow {
        let g = self.view.graph();
        let n = g.node_count();
        let (src, snk) = (n, n + 1);
        let mut d = Dinic::<BigInt>::new(n + 2);
        let d_scale = Q::from_integer(self.scale.clone());
        let total = scale_to_int(&self.total_supply(), &self.scale);
        let mut edge_arc = BTreeMap::new();
        for e in self.view.edges() {
            let ed = g.edge(e);
            let a = d.add_edge(ed.u, ed.v, BigInt::from(ed.cap) * &self.scale);
            edge_arc.insert(e, a);
        }
        let mut src_arc = BTreeMap::new();
        for (&v, s) in &self.supplies {
            if s.is_zero() {
                continue;
            }
            let amount = (s * &d_scale).to_integer();
            src_arc.insert(v, d.add_arc(src, v, amount));
        }
        let mut snk_arc = BTreeMap::new();
        for &t in &self.sinks {
            if self.view.has_node(t) {
                snk_arc.insert(t, d.add_arc(t, snk, total.clone()));
            }
        }
        let value = d.max_flow(src, snk);
        let reach = d.reachable(src);
        MaxFlow {
            value,
            edge_flow: edge_arc.iter().map(|(&e, &a)| (e, d.flow(a))).collect(),
            injected: src_arc.iter().map(|(&v, &a)| (v, d.flow(a))).collect(),
            absorbed: snk_arc.iter().map(|(&v, &a)| (v, d.flow(a))).collect(),
            source_side: (0..n).filter(|&v| reach[v] && self.view.has_node(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupplyPath {
    pub source: NodeId,
    pub target: NodeId,
    /// Edges from `source` to `target`.
    pub edges: Vec<EdgeId>,
    #[serde(with = "crate::rational::serde_q")]
    pub value: Q,
}

/// A feasible supply routing, as simple paths ending at targets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SupplyFlow {
    pub paths: Vec<SupplyPath>,
}

impl SupplyFlow {
    pub fn received(&self) -> BTreeMap<NodeId, Q> {
        let mut r: BTreeMap<NodeId, Q> = BTreeMap::new();
        for p in &self.paths {
            *r.entry(p.target).or_insert_with(Q::zero) += &p.value;
        }
        r
    }

    pub fn sent(&self) -> BTreeMap<NodeId, Q> {
        let mut r: BTreeMap<NodeId, Q> = BTreeMap::new();
        for p in &self.paths {
            *r.entry(p.source).or_insert_with(Q::zero) += &p.value;
        }
        r
    }
}

/// Node set U with boundary δ(U) (within the routed view), c(U) and the
/// supply inside U.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutCertificate {
    pub nodes: BTreeSet<NodeId>,
    pub boundary: Vec<EdgeId>,
    #[serde(with = "crate::rational::serde_q")]
    pub capacity: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub demand: Q,
}

impl CutCertificate {
    pub fn from_nodes(view: &View<'_>, nodes: BTreeSet<NodeId>, supply: &BTreeMap<NodeId, Q>) -> Self {
        let g = view.graph();
        let boundary: Vec<EdgeId> = view
            .edges()
            .filter(|&e| nodes.contains(&g.edge(e).u) != nodes.contains(&g.edge(e).v))
            .collect();
        let capacity = boundary.iter().map(|&e| qu(g.cap(e))).sum();
        let demand = nodes.iter().filter_map(|v| supply.get(v)).sum();
        CutCertificate {
            nodes,
            boundary,
            capacity,
            demand,
        }
    }

    pub fn is_violated(&self) -> bool {
        self.capacity < self.demand
    }

    /// Recomputes boundary, c(U) and supply(U) and checks the violation.
    pub fn verify(&self, view: &View<'_>, supply: &BTreeMap<NodeId, Q>) -> bool {
        let again = CutCertificate::from_nodes(view, self.nodes.clone(), supply);
        &again == self && again.is_violated()
    }
}

impl std::fmt::Display for CutCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "cut of {} nodes, c(U) = {}, supply {}",
            self.nodes.len(),
            format_q(&self.capacity),
            format_q(&self.demand)
        )
    }
}

#[derive(Debug, Clone)]
pub enum SupplyOutcome {
    Feasible(SupplyFlow),
    Cut(CutCertificate),
}

/// Routes `multiplier * supplies[v]` from every node to `targets`
/// simultaneously, or returns U (disjoint from targets) with
/// c(U) < supply(U).
pub fn route_supplies_or_cut(
    view: &View<'_>,
    supplies: &BTreeMap<NodeId, Q>,
    targets: &BTreeSet<NodeId>,
    multiplier: &Q,
) -> Result<SupplyOutcome> {
    if targets.is_empty() {
        return Err(Error::invalid("supply routing needs a nonempty target set"));
    }
    let scaled: BTreeMap<NodeId, Q> = supplies
        .iter()
        .filter(|(_, s)| !s.is_zero())
        .map(|(&v, s)| (v, s * multiplier))
        .collect();
    let net = FlowNetwork::new(view.clone(), scaled.clone(), targets.clone())?;
    let mf = net.max_flow();
    let total = scale_to_int(&net.total_supply(), &net.scale);
    if mf.value < total {
        let cut = CutCertificate::from_nodes(view, mf.source_side, &scaled);
        if !cut.is_violated() || cut.nodes.iter().any(|v| targets.contains(v)) {
            return Err(Error::internal(format!("min cut does not certify infeasibility: {cut}")));
        }
        return Ok(SupplyOutcome::Cut(cut));
    }
    Ok(SupplyOutcome::Feasible(decompose_flow(&net, &mf)?))
}

/// Splits a conserving network flow into simple source-to-target paths;
/// circulations are discarded.
pub fn decompose_flow(net: &FlowNetwork<'_>, mf: &MaxFlow) -> Result<SupplyFlow> {
    let g = net.view.graph();
    let scale = &net.scale;
    let n = g.node_count();
    let (src, snk) = (n, n + 1);
    let mut arcs = Vec::new();
    for (&e, f) in &mf.edge_flow {
        let ed = g.edge(e);
        if f.is_positive() {
            arcs.push(FlowArc { from: ed.u, to: ed.v, tag: e, amount: f.clone() });
        } else if f.is_negative() {
            arcs.push(FlowArc { from: ed.v, to: ed.u, tag: e, amount: -f });
        }
    }
    for (&v, f) in &mf.injected {
        if f.is_positive() {
            arcs.push(FlowArc { from: src, to: v, tag: usize::MAX, amount: f.clone() });
        }
    }
    for (&v, f) in &mf.absorbed {
        if f.is_positive() {
            arcs.push(FlowArc { from: v, to: snk, tag: usize::MAX, amount: f.clone() });
        }
    }
    let denom = Q::from_integer(scale.clone());
    let mut paths = Vec::new();
    for (walk, amount) in decompose(n + 2, &arcs, src, snk)? {
        let source = arcs[walk[0]].to;
        let target = arcs[*walk.last().expect("nonempty walk")].from;
        let edges = walk[1..walk.len() - 1].iter().map(|&a| arcs[a].tag).collect();
        paths.push(SupplyPath {
            source,
            target,
            edges,
            value: Q::from_integer(amount) / &denom,
        });
    }
    paths.sort_by(|a, b| (a.source, &a.edges).cmp(&(b.source, &b.edges)));
    Ok(SupplyFlow { paths })
}

/// Components of G[U] (inside `view`) that are violated on their own.
pub fn centralize_cut(view: &View<'_>, nodes: &BTreeSet<NodeId>, supplies: &BTreeMap<NodeId, Q>) -> Result<Vec<CutCertificate>> {
    let whole = CutCertificate::from_nodes(view, nodes.clone(), supplies);
    if !whole.is_violated() {
        return Err(Error::invalid(format!("cut is not violated: {whole}")));
    }
    let mut inner = view.clone();
    for e in view.edges().collect::<Vec<_>>() {
        let ed = view.graph().edge(e);
        if !(nodes.contains(&ed.u) && nodes.contains(&ed.v)) {
            inner.remove_edge(e);
        }
    }
    let out: Vec<CutCertificate> = inner
        .components()
        .into_iter()
        .filter(|c| c.iter().all(|v| nodes.contains(v)))
        .map(|c| CutCertificate::from_nodes(view, c, supplies))
        .filter(|c| c.is_violated())
        .collect();
    if out.is_empty() {
        return Err(Error::internal("violated cut has no violated component"));
    }
    Ok(out)
}

/// Edge connectivity λ(a, b) within `view`.
pub fn edge_connectivity(view: &View<'_>, a: NodeId, b: NodeId) -> u64 {
    if a == b {
        return u64::MAX;
    }
    let g = view.graph();
    let mut d = Dinic::<i64>::new(g.node_count());
    for e in view.edges() {
        let ed = g.edge(e);
        d.add_edge(ed.u, ed.v, ed.cap as i64);
    }
    d.max_flow(a, b) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MultiGraph;
    use crate::rational::{q, qi};

    fn path(n: usize) -> MultiGraph {
        MultiGraph::from_edges(n, (0..n - 1).map(|i| (i, i + 1, 1))).unwrap()
    }

    #[test]
    fn max_flow_unit_path_cut() {
        let g = path(3);
        let net = FlowNetwork::new(View::full(&g), BTreeMap::from([(0, qi(5))]), BTreeSet::from([2])).unwrap();
        let mf = net.max_flow();
        assert_eq!(mf.value, BigInt::from(1));
        assert_eq!(mf.source_side, BTreeSet::from([0]));
    }

    #[test]
    fn zero_supplies_feasible() {
        let g = path(3);
        let out = route_supplies_or_cut(&View::full(&g), &BTreeMap::new(), &BTreeSet::from([2]), &qi(1)).unwrap();
        assert!(matches!(out, SupplyOutcome::Feasible(f) if f.paths.is_empty()));
    }

    #[test]
    fn isolated_supply_cut() {
        let g = MultiGraph::from_edges(3, [(1, 2, 1)]).unwrap();
        let sup = BTreeMap::from([(0, q(1, 2))]);
        match route_supplies_or_cut(&View::full(&g), &sup, &BTreeSet::from([2]), &qi(1)).unwrap() {
            SupplyOutcome::Cut(c) => {
                assert_eq!(c.nodes, BTreeSet::from([0]));
                assert_eq!(c.capacity, qi(0));
            }
            SupplyOutcome::Feasible(_) => panic!("expected a cut"),
        }
    }

    #[test]
    fn four_halves_through_one_edge() {
        // 0..3 supplied with 1/2 each, edge 3-4 the only way to target 4
        let g = path(5);
        let sup: BTreeMap<_, _> = (0..4).map(|v| (v, q(1, 2))).collect();
        match route_supplies_or_cut(&View::full(&g), &sup, &BTreeSet::from([4]), &qi(1)).unwrap() {
            SupplyOutcome::Cut(c) => {
                assert!(c.verify(&View::full(&g), &sup));
                // hand recount: U = {0,1,2,3}, δ(U) = {3-4}
                assert_eq!(c.nodes, BTreeSet::from([0, 1, 2, 3]));
                assert_eq!(c.capacity, qi(1));
                assert_eq!(c.demand, qi(2));
            }
            SupplyOutcome::Feasible(_) => panic!("expected a cut"),
        }
    }

    #[test]
    fn feasible_paths_deliver_supply() {
        let g = MultiGraph::from_edges(4, [(0, 1, 1), (1, 3, 1), (0, 2, 1), (2, 3, 1)]).unwrap();
        let sup = BTreeMap::from([(0, qi(2)), (1, q(1, 3))]);
        let view = View::full(&g);
        match route_supplies_or_cut(&view, &sup, &BTreeSet::from([3]), &q(5, 6)).unwrap() {
            SupplyOutcome::Feasible(f) => {
                let sent = f.sent();
                assert_eq!(sent[&0], q(5, 3));
                assert_eq!(sent[&1], q(5, 18));
                for p in &f.paths {
                    assert!(crate::graph::is_simple_path(&g, p.source, p.target, &p.edges));
                }
            }
            SupplyOutcome::Cut(c) => panic!("unexpected cut {c}"),
        }
    }

    #[test]
    fn centralize_picks_violating_component() {
        // two disjoint edges; only {2,3} carries supply
        let g = MultiGraph::from_edges(6, [(0, 1, 1), (2, 3, 1), (1, 4, 1), (3, 5, 1)]).unwrap();
        let sup = BTreeMap::from([(2, q(3, 2)), (3, q(3, 2))]);
        let view = View::full(&g);
        let comps = centralize_cut(&view, &BTreeSet::from([0, 1, 2, 3]), &sup).unwrap();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].nodes, BTreeSet::from([2, 3]));
        assert!(centralize_cut(&view, &BTreeSet::from([0]), &sup).is_err());
    }

    #[test]
    fn connectivity_counts_capacity() {
        let g = MultiGraph::from_edges(3, [(0, 1, 2), (1, 2, 1), (0, 2, 1)]).unwrap();
        assert_eq!(edge_connectivity(&View::full(&g), 0, 1), 3);
    }
}
