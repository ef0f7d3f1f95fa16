use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use petgraph::algo::maximum_matching;
use petgraph::graph::{NodeIndex, UnGraph};

use crate::error::{Error, Result};
use crate::flow::SupplyFlow;
use crate::graph::{reversed, shortcut, walk_nodes, EdgeId, MultiGraph, NodeId, View};
use crate::instance::{DemandId, MatchingInstance};
use crate::rational::{ceil_int, floor_int, format_q, qi, qu, Q};
use crate::reductions::{cluster_paths, cluster_terminals};
use crate::routing::{marginals_of, oriented_nodes, FractionalRouting, IntegralRouting, RoutedPath};

/// Nodes of a flow path, read from its demand's source.
pub(crate) fn path_nodes(inst: &MatchingInstance, demand: DemandId, edges: &[EdgeId]) -> Vec<NodeId> {
    let d = inst.demand(demand);
    oriented_nodes(inst.graph(), d, edges)
        .or_else(|| walk_nodes(inst.graph(), d.s, edges))
        .unwrap_or_default()
}

/// Total value of the flow paths that visit `v`.
pub fn through_flow(inst: &MatchingInstance, routing: &FractionalRouting, v: NodeId) -> Q {
    routing
        .paths
        .iter()
        .filter(|p| path_nodes(inst, p.demand, &p.edges).contains(&v))
        .map(|p| &p.value)
        .sum()
}

pub(crate) fn support<'a>(graph: &MultiGraph, paths: impl IntoIterator<Item = &'a [EdgeId]>) -> BTreeSet<EdgeId> {
    let mut out = BTreeSet::new();
    for p in paths {
        out.extend(p.iter().copied().filter(|&e| graph.has_edge(e)));
    }
    out
}

/// Routes demands through `v` given weights w_h such that every terminal
/// of demand h can send w_h to `v` simultaneously inside `view`.
///
/// Terminals are clustered toward {v}; each cluster gets an exit path to
/// v from one integral max-flow. Demands become edges between the
/// clusters of their endpoints (a demand inside one cluster becomes an
/// edge to that cluster's private dummy vertex) and a maximum matching
/// picks the routed set. A matched demand goes up its clusters' trees and
/// exit paths; trees are edge-disjoint and each is used once, so
/// congestion is at most 2.
fn route_weighted(
    inst: &MatchingInstance,
    view: &View<'_>,
    weights: &BTreeMap<DemandId, Q>,
    v: NodeId,
) -> Result<IntegralRouting> {
    let g = inst.graph();
    let mut x = BTreeMap::new();
    for (&h, w) in weights {
        if w > &Q::zero() {
            let d = inst.demand(h);
            x.insert(d.s, w.clone());
            x.insert(d.t, w.clone());
        }
    }
    if x.is_empty() {
        return Ok(IntegralRouting {
            paths: Vec::new(),
            bound: Some(qi(2)),
        });
    }
    let mut view = view.clone();
    view.add_node(v);
    for &t in x.keys() {
        view.add_node(t);
    }
    let r = BTreeSet::from([v]);
    let terminals: BTreeSet<NodeId> = x.keys().copied().collect();
    let clusters = cluster_paths(&view, cluster_terminals(&view, &terminals, &r, &x)?, &r)?;
    let mut cluster_of = BTreeMap::new();
    for (i, c) in clusters.iter().enumerate() {
        for &t in &c.terminals {
            cluster_of.insert(t, i);
        }
    }

    let m = clusters.len();
    let mut mg = UnGraph::<(), ()>::with_capacity(2 * m, weights.len());
    for _ in 0..2 * m {
        mg.add_node(());
    }
    let mut edge_demand: BTreeMap<(usize, usize), DemandId> = BTreeMap::new();
    for (&h, w) in weights {
        if w <= &Q::zero() {
            continue;
        }
        let d = inst.demand(h);
        let (a, b) = (cluster_of[&d.s], cluster_of[&d.t]);
        let key = if a == b { (a, m + a) } else { (a.min(b), a.max(b)) };
        if let std::collections::btree_map::Entry::Vacant(slot) = edge_demand.entry(key) {
            slot.insert(h);
            mg.add_edge(NodeIndex::new(key.0), NodeIndex::new(key.1), ());
        }
    }
    let matching = maximum_matching(&mg);

    let mut paths = Vec::new();
    for (a, b) in matching.edges() {
        let key = {
            let (a, b) = (a.index(), b.index());
            (a.min(b), a.max(b))
        };
        let h = edge_demand[&key];
        let d = inst.demand(h);
        let (cs, ct) = (&clusters[cluster_of[&d.s]], &clusters[cluster_of[&d.t]]);
        let mut walk: Vec<EdgeId> = cs.tree_segment(&view, d.s)?;
        if cs.id != ct.id {
            walk.extend(cs.exit.iter().copied());
            walk.extend(reversed(&ct.exit));
        }
        walk.extend(reversed(&ct.tree_segment(&view, d.t)?));
        paths.push(RoutedPath {
            demand: h,
            edges: shortcut(g, d.s, &walk),
        });
    }
    paths.sort_by_key(|p| p.demand);
    let out = IntegralRouting {
        paths,
        bound: Some(qi(2)),
    };
    out.validate_on(g, inst.demands(), Some(&qi(2)))?;
    Ok(out)
}

fn check_floor(routed: usize, floor: &Q, what: &str) -> Result<()> {
    if qu(routed as u64) < *floor {
        return Err(Error::Guarantee(format!(
            "{what}: routed {routed} pairs, below the floor {}",
            format_q(floor)
        )));
    }
    Ok(())
}

/// Integral routing when every positive flow path visits `v`. Routes at
/// least ⌈val/3⌉ pairs with congestion at most 2. Returned paths are
/// simple and may bypass `v` after shortcutting.
pub fn route_through_node(inst: &MatchingInstance, routing: &FractionalRouting, v: NodeId) -> Result<IntegralRouting> {
    let g = inst.graph();
    if !g.has_node(v) {
        return Err(Error::invalid(format!("node {v} is not in the graph")));
    }
    routing.validate(inst)?;
    for p in &routing.paths {
        if p.value > Q::zero() && !path_nodes(inst, p.demand, &p.edges).contains(&v) {
            return Err(Error::invalid(format!("a flow path of demand {} avoids node {v}", p.demand)));
        }
    }
    let mut weights: BTreeMap<DemandId, Q> = BTreeMap::new();
    for p in &routing.paths {
        *weights.entry(p.demand).or_insert_with(Q::zero) += &p.value;
    }
    let view = View::from_edges(g, support(g, routing.paths.iter().map(|p| p.edges.as_slice())));
    let out = route_weighted(inst, &view, &weights, v)?;
    let val = routing.value();
    check_floor(out.routed(), &Q::from_integer(ceil_int(&(val / qi(3)))), "single-node routing")?;
    Ok(out)
}

/// Picks the candidate with the most flow through it (lowest id on ties)
/// and routes the flow paths visiting it.
pub fn route_through_best(
    inst: &MatchingInstance,
    routing: &FractionalRouting,
    candidates: &BTreeSet<NodeId>,
) -> Result<(IntegralRouting, Option<NodeId>)> {
    let mut best: Option<(NodeId, Q)> = None;
    for &v in candidates {
        let f = through_flow(inst, routing, v);
        if f > Q::zero() && best.as_ref().is_none_or(|(_, b)| &f > b) {
            best = Some((v, f));
        }
    }
    let Some((v, _)) = best else {
        return Ok((
            IntegralRouting {
                paths: Vec::new(),
                bound: Some(qi(2)),
            },
            None,
        ));
    };
    let through = FractionalRouting::new(
        routing
            .paths
            .iter()
            .filter(|p| path_nodes(inst, p.demand, &p.edges).contains(&v))
            .cloned()
            .collect(),
    );
    Ok((route_through_node(inst, &through, v)?, Some(v)))
}

/// Integral routing from a fractional routing plus a second flow sending
/// at least x(t)/alpha from every terminal t into `s`.
///
/// The node v of `s` receiving the most (lowest id on ties) becomes the
/// hub. Pair i gets weight y_i/3 where y_i is the larger amount one of its
/// endpoints sends to v; the other endpoint reaches v through the pair's
/// own flow. Routes at least ⌊val/(9·alpha·|S|)⌋ pairs with congestion at
/// most 2.
pub fn reroute_to_set(
    inst: &MatchingInstance,
    routing: &FractionalRouting,
    to_set_flow: &SupplyFlow,
    alpha: &Q,
    s: &BTreeSet<NodeId>,
) -> Result<IntegralRouting> {
    let g = inst.graph();
    if s.is_empty() {
        return Err(Error::invalid("reroute needs a nonempty target set"));
    }
    if alpha < &Q::one() {
        return Err(Error::invalid(format!("alpha {} is below 1", format_q(alpha))));
    }
    routing.validate(inst)?;
    let mut load = vec![Q::zero(); g.edge_count()];
    for p in &to_set_flow.paths {
        if !s.contains(&p.target) {
            return Err(Error::invalid(format!("to-set path ends at {} outside S", p.target)));
        }
        match walk_nodes(g, p.source, &p.edges) {
            Some(nodes) if nodes.last() == Some(&p.target) => {}
            _ => {
                return Err(Error::invalid(format!(
                    "to-set path from {} is not a walk to {}",
                    p.source, p.target
                )))
            }
        }
        for &e in &p.edges {
            load[e] += &p.value;
        }
    }
    if let Some(e) = (0..g.edge_count()).find(|&e| load[e] > qu(g.cap(e))) {
        return Err(Error::invalid(format!("to-set flow overloads edge {e}")));
    }
    let x = marginals_of(routing, inst);
    let sent = to_set_flow.sent();
    for (t, xt) in &x {
        let need = xt / alpha;
        let got = sent.get(t).cloned().unwrap_or_else(Q::zero);
        if got < need {
            return Err(Error::invalid(format!(
                "to-set flow sends {} from terminal {t}, needs {}",
                format_q(&got),
                format_q(&need)
            )));
        }
    }

    let received = to_set_flow.received();
    let mut v = *s.iter().next().expect("nonempty");
    let mut most = Q::zero();
    for &c in s {
        let r = received.get(&c).cloned().unwrap_or_else(Q::zero);
        if r > most {
            most = r;
            v = c;
        }
    }
    let mut to_v: BTreeMap<NodeId, Q> = BTreeMap::new();
    for p in to_set_flow.paths.iter().filter(|p| p.target == v) {
        *to_v.entry(p.source).or_insert_with(Q::zero) += &p.value;
    }
    let z = routing.demand_totals(inst.demand_count());
    let mut weights = BTreeMap::new();
    for (h, zh) in z.iter().enumerate() {
        if zh <= &Q::zero() {
            continue;
        }
        let d = inst.demand(h);
        let get = |t: NodeId| to_v.get(&t).cloned().unwrap_or_else(Q::zero);
        let y = get(d.s).max(get(d.t)).min(zh.clone());
        if y > Q::zero() {
            weights.insert(h, y / qi(3));
        }
    }
    let edges = support(
        g,
        routing
            .paths
            .iter()
            .map(|p| p.edges.as_slice())
            .chain(to_set_flow.paths.iter().map(|p| p.edges.as_slice())),
    );
    let out = route_weighted(inst, &View::from_edges(g, edges), &weights, v)?;
    let val = routing.value();
    let floor = Q::from_integer(floor_int(&(val / (qi(9) * alpha * qu(s.len() as u64)))));
    check_floor(out.routed(), &floor, "reroute to set")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{route_supplies_or_cut, SupplyOutcome};
    use crate::instance::Demand;
    use crate::rational::q;
    use crate::routing::{congestion_of, FlowPath};

    /// Centre 0; every pair i has its own arms 0-a-s and 0-b-t.
    fn star(pairs: usize) -> (MatchingInstance, FractionalRouting) {
        let mut g = MultiGraph::new(1);
        let mut demands = Vec::new();
        let mut paths = Vec::new();
        for h in 0..pairs {
            let a = g.add_node();
            let s = g.add_node();
            let b = g.add_node();
            let t = g.add_node();
            let e1 = g.add_edge(s, a, 1).unwrap();
            let e2 = g.add_edge(a, 0, 1).unwrap();
            let e3 = g.add_edge(0, b, 1).unwrap();
            let e4 = g.add_edge(b, t, 1).unwrap();
            demands.push(Demand::new(s, t));
            paths.push(FlowPath {
                demand: h,
                edges: vec![e1, e2, e3, e4],
                value: qi(1),
            });
        }
        (MatchingInstance::new(g, demands).unwrap(), FractionalRouting::new(paths))
    }

    #[test]
    fn star_routes_everything() {
        let (inst, f) = star(4);
        let r = route_through_node(&inst, &f, 0).unwrap();
        assert_eq!(r.routed(), 4);
        assert!(congestion_of(&r, inst.graph()).unwrap() <= qi(2));
    }

    #[test]
    fn small_value_may_route_nothing() {
        let (inst, f) = star(1);
        let f = f.scaled(&q(1, 4));
        let r = route_through_node(&inst, &f, 0).unwrap();
        assert!(r.routed() <= 1);
    }

    #[test]
    fn path_missing_the_node_is_rejected() {
        let (inst, f) = star(2);
        let err = route_through_node(&inst, &f, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn best_node_prefers_lowest_id_on_ties() {
        let (inst, f) = star(2);
        let cand = BTreeSet::from([0, 1, 3]);
        let (r, v) = route_through_best(&inst, &f, &cand).unwrap();
        assert_eq!(v, Some(0));
        assert_eq!(r.routed(), 2);
    }

    #[test]
    fn reroute_with_target_on_every_path() {
        let (inst, f) = star(3);
        let x = marginals_of(&f, &inst);
        let s = BTreeSet::from([0]);
        let SupplyOutcome::Feasible(flow) = route_supplies_or_cut(&View::full(inst.graph()), &x, &s, &qi(1)).unwrap()
        else {
            panic!("star supplies are routable")
        };
        let r = reroute_to_set(&inst, &f, &flow, &qi(1), &s).unwrap();
        assert!(r.routed() >= 1);
        assert!(congestion_of(&r, inst.graph()).unwrap() <= qi(2));
    }

    #[test]
    fn reroute_rejects_short_supply() {
        let (inst, f) = star(1);
        let empty = SupplyFlow::default();
        let err = reroute_to_set(&inst, &f, &empty, &qi(2), &BTreeSet::from([0])).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
