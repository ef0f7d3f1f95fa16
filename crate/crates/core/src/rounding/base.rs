use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::decomposition::{classify_shape, BagId, Shape, TreeDecomposition};
use crate::error::{Error, Result};
use crate::flow::{decompose, Dinic, FlowArc};
use crate::graph::{reversed, shortcut, walk_nodes, EdgeId, MultiGraph, NodeId, View};
use crate::instance::{Demand, DemandId, MatchingInstance};
use crate::rational::{floor_int, format_q, qi, qu, Q};
use crate::reductions::{build_sparsifier, lift_routing, move_terminals_within, restrict_to_hub_capacity, Sparsifier};
use crate::routing::{marginals_of, oriented_nodes, FlowPath, FractionalRouting, IntegralRouting, RoutedPath};
use crate::rounding::ksum::Step;
use crate::rounding::oracle::OracleProfile;
use crate::rounding::router::{path_nodes, route_through_best};
use crate::rounding::Mode;

/// Which base shape ran and the floor its local bound promises.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseReport {
    pub step: Step,
    pub local_floor: Q,
}

fn floor_of(x: Q) -> Q {
    Q::from_integer(floor_int(&x))
}

/// Routes a flush routing on a decomposition that is a single bag, two
/// adjacent degenerate bags, or a star with degenerate leaves.
pub fn base_case(
    inst: &MatchingInstance,
    routing: &FractionalRouting,
    decomp: &TreeDecomposition,
    p: usize,
    oracle: &OracleProfile,
    mode: Mode,
) -> Result<IntegralRouting> {
    base_case_with_report(inst, routing, decomp, p, oracle, mode).map(|(r, _)| r)
}

pub(crate) fn base_case_with_report(
    inst: &MatchingInstance,
    routing: &FractionalRouting,
    decomp: &TreeDecomposition,
    p: usize,
    oracle: &OracleProfile,
    mode: Mode,
) -> Result<(IntegralRouting, BaseReport)> {
    let val = routing.value();
    let pq = qu(p.max(1) as u64);
    match classify_shape(decomp).shape {
        Shape::SingleGraph { bag } => {
            let step = Step::Single;
            if decomp.is_degenerate(bag) {
                // a lone degenerate bag has an empty separator, so a flush
                // routing carries nothing
                if val > Q::zero() {
                    return Err(Error::invalid("flow inside a lone degenerate bag is not flush"));
                }
                return Ok((empty(), BaseReport { step, local_floor: Q::zero() }));
            }
            match mode {
                Mode::Treewidth => {
                    let (r, _) = route_through_best(inst, routing, decomp.bag(bag))?;
                    let floor = floor_of(&val / (qi(12) * (&pq + Q::one())));
                    Ok((r, BaseReport { step, local_floor: floor }))
                }
                Mode::Generic => {
                    let r = oracle_on_subgraph(inst, routing, decomp.bag(bag), oracle)?;
                    Ok((r, BaseReport { step, local_floor: floor_of(&val / &oracle.alpha) }))
                }
            }
        }
        Shape::DegeneratePair { tree_edge } => {
            let (r, _) = route_through_best(inst, routing, &decomp.separator(tree_edge))?;
            let floor = floor_of(&val / (qi(12) * &pq));
            Ok((r, BaseReport { step: Step::Pair, local_floor: floor }))
        }
        Shape::DegenerateStar { center } => match mode {
            Mode::Treewidth => {
                let (r, _) = route_through_best(inst, routing, decomp.bag(center))?;
                let floor = floor_of(&val / (qi(12) * (&pq + Q::one())));
                Ok((r, BaseReport { step: Step::Star, local_floor: floor }))
            }
            Mode::Generic => {
                let r = star_generic(inst, routing, decomp, center, p, oracle)?;
                let floor = floor_of(&val / (qi(5) * &oracle.alpha * &pq * &pq));
                Ok((r, BaseReport { step: Step::Star, local_floor: floor }))
            }
        },
        other => Err(Error::invalid(format!("decomposition is not a base shape: {other:?}"))),
    }
}

fn empty() -> IntegralRouting {
    IntegralRouting {
        paths: Vec::new(),
        bound: Some(qi(2)),
    }
}

/// Demands with positive flow, in id order.
fn active_demands(inst: &MatchingInstance, routing: &FractionalRouting) -> Vec<DemandId> {
    let z = routing.demand_totals(inst.demand_count());
    (0..inst.demand_count()).filter(|&h| z[h] > Q::zero()).collect()
}

/// Runs the oracle on G[nodes] with ids compacted.
fn oracle_on_subgraph(
    inst: &MatchingInstance,
    routing: &FractionalRouting,
    nodes: &BTreeSet<NodeId>,
    oracle: &OracleProfile,
) -> Result<IntegralRouting> {
    let g = inst.graph();
    let id: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut sub = MultiGraph::new(nodes.len());
    let mut edge_back = Vec::new();
    let mut edge_to = BTreeMap::new();
    for e in View::induced(g, nodes).edges() {
        let ed = g.edge(e);
        edge_to.insert(e, sub.add_edge(id[&ed.u], id[&ed.v], ed.cap)?);
        edge_back.push(e);
    }
    let active = active_demands(inst, routing);
    let mut demand_to = BTreeMap::new();
    let mut demands = Vec::new();
    for &h in &active {
        let d = inst.demand(h);
        let (Some(&s), Some(&t)) = (id.get(&d.s), id.get(&d.t)) else {
            return Err(Error::invalid(format!("demand {h} carries flow but leaves the bag")));
        };
        demand_to.insert(h, demands.len());
        demands.push(Demand::new(s, t));
    }
    let sub_inst = MatchingInstance::new(sub, demands)?;
    let mut paths = Vec::new();
    for p in &routing.paths {
        let edges = p
            .edges
            .iter()
            .map(|e| edge_to.get(e).copied())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::invalid(format!("a flow path of demand {} leaves the bag", p.demand)))?;
        paths.push(FlowPath {
            demand: demand_to[&p.demand],
            edges,
            value: p.value.clone(),
        });
    }
    let out = oracle.call(&sub_inst, &FractionalRouting::new(paths))?;
    Ok(IntegralRouting {
        paths: out
            .paths
            .iter()
            .map(|p| RoutedPath {
                demand: active[p.demand],
                edges: p.edges.iter().map(|&e| edge_back[e]).collect(),
            })
            .collect(),
        bound: out.bound,
    })
}

#[derive(Debug, Clone, Copy)]
enum Origin {
    Base(EdgeId),
    Sparse(usize, usize),
    /// Edge from a relocated leaf (node of the moved graph) to its anchor.
    Leaf(NodeId),
}

enum Piece {
    Arc(usize, usize, usize),
    Segment { leaf: usize, a: NodeId, b: NodeId },
}

/// Generic star: move the leaf terminals onto hubs at the separators,
/// replace every leaf graph by a sparsifier on its separator, run the
/// oracle on the centre bag plus sparsifiers, embed back, repair and lift.
/// Congestion at most β + 3.
fn star_generic(
    inst: &MatchingInstance,
    routing: &FractionalRouting,
    decomp: &TreeDecomposition,
    center: BagId,
    p: usize,
    oracle: &OracleProfile,
) -> Result<IntegralRouting> {
    let g = inst.graph();
    let w = decomp.node_set();
    let xbag = decomp.bag(center).clone();
    let leaves: Vec<BagId> = (0..decomp.bag_count()).filter(|&b| b != center).collect();
    let seps: Vec<BTreeSet<NodeId>> = leaves.iter().map(|&b| decomp.leaf_separator(b)).collect();
    let mut owner: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (i, &b) in leaves.iter().enumerate() {
        for &v in decomp.bag(b) {
            if !xbag.contains(&v) {
                owner.insert(v, i);
            }
        }
    }
    let mut leaf_edges: Vec<Vec<EdgeId>> = vec![Vec::new(); leaves.len()];
    let mut edge_leaf: BTreeMap<EdgeId, usize> = BTreeMap::new();
    let mut core_edges = Vec::new();
    for e in View::induced(g, &w).edges() {
        let ed = g.edge(e);
        match owner.get(&ed.u).or_else(|| owner.get(&ed.v)) {
            Some(&i) => {
                leaf_edges[i].push(e);
                edge_leaf.insert(e, i);
            }
            None => core_edges.push(e),
        }
    }

    // 1. move every terminal with flow whose leaf edge lies in a leaf graph
    let marg = marginals_of(routing, inst);
    let moving: BTreeSet<NodeId> = w
        .iter()
        .copied()
        .filter(|&t| inst.is_terminal(t) && marg[&t] > Q::zero() && edge_leaf.contains_key(&inst.leaf_edge(t)))
        .collect();
    let r: BTreeSet<NodeId> = seps.iter().flatten().copied().collect();
    let mut within = View::from_edges(g, edge_leaf.keys().copied());
    for &v in r.iter().chain(&moving) {
        within.add_node(v);
    }
    let (inst2, f2, record) = move_terminals_within(inst, routing, &moving, &r, &within)?;
    let g2 = inst2.graph();

    // 2. sparsify every leaf graph on its separator
    let mut sparsifiers: Vec<Option<Sparsifier>> = Vec::new();
    for (i, s) in seps.iter().enumerate() {
        if s.len() < 2 {
            sparsifiers.push(None);
            continue;
        }
        let mut view = View::from_edges(g, leaf_edges[i].iter().copied());
        for &v in s {
            view.add_node(v);
        }
        sparsifiers.push(Some(build_sparsifier(&view, s)?));
    }

    // 3. the oracle graph: centre bag, sparsifier edges, relocated leaves
    // hung directly on their anchors
    let id: BTreeMap<NodeId, usize> = xbag.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut gg = MultiGraph::new(xbag.len());
    let mut origin: Vec<Origin> = Vec::new();
    let mut base_to: BTreeMap<EdgeId, usize> = BTreeMap::new();
    for &e in &core_edges {
        let ed = g.edge(e);
        base_to.insert(e, gg.add_edge(id[&ed.u], id[&ed.v], ed.cap)?);
        origin.push(Origin::Base(e));
    }
    let mut sparse_to: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, sp) in sparsifiers.iter().enumerate() {
        for (j, se) in sp.iter().flat_map(|s| s.edges.iter().enumerate()) {
            sparse_to.insert((i, j), gg.add_edge(id[&se.u], id[&se.v], 1)?);
            origin.push(Origin::Sparse(i, j));
        }
    }
    let old_of: BTreeMap<NodeId, NodeId> = record.relocated.iter().map(|(&old, &new)| (new, old)).collect();
    let anchor_of = |leaf2: NodeId| record.clusters[record.cluster_of[&old_of[&leaf2]]].anchor;
    let active = active_demands(inst, routing);
    let mut leaf_node: BTreeMap<NodeId, (usize, usize)> = BTreeMap::new();
    let mut demands = Vec::new();
    let mut demand_to = BTreeMap::new();
    for &h in &active {
        let d2 = inst2.demand(h);
        let mut ends = [0usize; 2];
        for (k, t2) in [d2.s, d2.t].into_iter().enumerate() {
            ends[k] = if old_of.contains_key(&t2) {
                let n = gg.add_node();
                let e = gg.add_edge(n, id[&anchor_of(t2)], 1)?;
                origin.push(Origin::Leaf(t2));
                leaf_node.insert(t2, (n, e));
                n
            } else {
                *id.get(&t2)
                    .ok_or_else(|| Error::internal(format!("unmoved terminal {t2} lies outside the centre bag")))?
            };
        }
        demand_to.insert(h, demands.len());
        demands.push(Demand::new(ends[0], ends[1]));
    }
    let inst3 = MatchingInstance::new(gg, demands)?;
    let g3 = inst3.graph();

    // the moved flow, read as arcs of the oracle graph and leaf-graph
    // segments between separator nodes
    let hub_edges: BTreeSet<EdgeId> = record.hub_edges.iter().copied().collect();
    let mut pieces_of: Vec<(DemandId, Q, Vec<Piece>)> = Vec::new();
    for fp in &f2.paths {
        let nodes = path_nodes(&inst2, fp.demand, &fp.edges);
        let forward = if walk_nodes(g2, inst2.demand(fp.demand).s, &fp.edges).as_ref() == Some(&nodes) {
            fp.edges.clone()
        } else {
            reversed(&fp.edges)
        };
        let mut pieces = Vec::new();
        let mut open: Option<(usize, NodeId)> = None;
        for (idx, &e) in forward.iter().enumerate() {
            let (x, y) = (nodes[idx], nodes[idx + 1]);
            if e < record.base_edges {
                if let Some(&i) = edge_leaf.get(&e) {
                    if open.is_none() {
                        if !xbag.contains(&x) {
                            return Err(Error::internal(format!("leaf segment starts inside leaf {i} at {x}")));
                        }
                        open = Some((i, x));
                    }
                    if xbag.contains(&y) {
                        let (leaf, a) = open.take().expect("open segment");
                        pieces.push(Piece::Segment { leaf, a, b: y });
                    }
                } else if let Some(&e3) = base_to.get(&e) {
                    pieces.push(Piece::Arc(id[&x], id[&y], e3));
                } else {
                    return Err(Error::internal(format!("moved flow uses edge {e} outside the star")));
                }
            } else if !hub_edges.contains(&e) {
                let leaf = if old_of.contains_key(&x) { x } else { y };
                let (n, e3) = leaf_node[&leaf];
                let a = id[&anchor_of(leaf)];
                pieces.push(if x == leaf { Piece::Arc(n, a, e3) } else { Piece::Arc(a, n, e3) });
            }
        }
        pieces_of.push((fp.demand, fp.value.clone(), pieces));
    }

    // segment demand per separator pair, routed by one max-flow in the
    // sparsifier; each pair's flow is feasible there on its own
    let mut pair_demand: BTreeMap<(usize, NodeId, NodeId), Q> = BTreeMap::new();
    for (_, v, pieces) in &pieces_of {
        for pc in pieces {
            if let Piece::Segment { leaf, a, b } = *pc {
                *pair_demand.entry((leaf, a.min(b), a.max(b))).or_insert_with(Q::zero) += v;
            }
        }
    }
    let mut pair_flow: BTreeMap<(usize, NodeId, NodeId), (i64, Vec<(usize, i64)>)> = BTreeMap::new();
    for (&(leaf, lo, hi), d) in &pair_demand {
        let sp = sparsifiers[leaf]
            .as_ref()
            .ok_or_else(|| Error::internal(format!("segment in leaf {leaf} without a sparsifier")))?;
        let mut net = Dinic::<i64>::new(g.node_count());
        let arcs: Vec<_> = sp.edges.iter().map(|se| net.add_edge(se.u, se.v, 1)).collect();
        let f = net.max_flow(lo, hi);
        if qi(f) < *d {
            return Err(Error::internal(format!(
                "sparsifier of leaf {leaf} carries {f} between {lo} and {hi}, segments need {}",
                format_q(d)
            )));
        }
        let flows = arcs
            .iter()
            .enumerate()
            .map(|(j, &a)| (j, net.flow(a)))
            .filter(|&(_, x)| x != 0)
            .collect();
        pair_flow.insert((leaf, lo, hi), (f, flows));
    }
    let sigma = qu((p.max(1) * p.max(1)) as u64);
    let mut arcs_of: BTreeMap<DemandId, Vec<FlowArc<Q>>> = BTreeMap::new();
    for (h, v, pieces) in &pieces_of {
        let arcs = arcs_of.entry(*h).or_default();
        for pc in pieces {
            match *pc {
                Piece::Arc(from, to, tag) => arcs.push(FlowArc { from, to, tag, amount: v.clone() }),
                Piece::Segment { leaf, a, b } => {
                    let (lo, hi) = (a.min(b), a.max(b));
                    let (f, flows) = &pair_flow[&(leaf, lo, hi)];
                    let sp = sparsifiers[leaf].as_ref().expect("checked above");
                    for &(j, x) in flows {
                        let se = &sp.edges[j];
                        let along = (x > 0) == (a == lo);
                        let (from, to) = if along { (id[&se.u], id[&se.v]) } else { (id[&se.v], id[&se.u]) };
                        arcs.push(FlowArc {
                            from,
                            to,
                            tag: sparse_to[&(leaf, j)],
                            amount: v * qi(x.abs()) / qi(*f),
                        });
                    }
                }
            }
        }
    }
    let mut paths = Vec::new();
    for (h, arcs) in &arcs_of {
        let j = demand_to[h];
        let d3 = inst3.demand(j);
        for (walk, amount) in decompose(g3.node_count(), arcs, d3.s, d3.t)? {
            paths.push(FlowPath {
                demand: j,
                edges: walk.iter().map(|&a| arcs[a].tag).collect(),
                value: amount / &sigma,
            });
        }
    }
    let f3 = FractionalRouting::new(paths).merged();
    f3.validate(&inst3)
        .map_err(|e| Error::internal(format!("oracle-graph flow infeasible: {e}")))?;

    // 4. oracle, then embed back into the moved graph
    let r3 = oracle.call(&inst3, &f3)?;
    let mut moved_paths = Vec::new();
    for rp in &r3.paths {
        let d3 = inst3.demand(rp.demand);
        let nodes = oriented_nodes(g3, d3, &rp.edges).expect("oracle output validated");
        let forward = if walk_nodes(g3, d3.s, &rp.edges).as_ref() == Some(&nodes) {
            rp.edges.clone()
        } else {
            reversed(&rp.edges)
        };
        let mut walk = Vec::new();
        for (idx, &e3) in forward.iter().enumerate() {
            let x = nodes[idx];
            match origin[e3] {
                Origin::Base(e) => walk.push(e),
                Origin::Sparse(i, j) => {
                    let se = &sparsifiers[i].as_ref().expect("sparse edge").edges[j];
                    if x == id[&se.u] {
                        walk.extend(se.path.iter().copied());
                    } else {
                        walk.extend(reversed(&se.path));
                    }
                }
                Origin::Leaf(leaf2) => {
                    let hub = record.hub_edges[record.cluster_of[&old_of[&leaf2]]];
                    let le = inst2.leaf_edge(leaf2);
                    if x == leaf_node[&leaf2].0 {
                        walk.extend([le, hub]);
                    } else {
                        walk.extend([hub, le]);
                    }
                }
            }
        }
        let h = active[rp.demand];
        moved_paths.push(RoutedPath {
            demand: h,
            edges: shortcut(g2, inst2.demand(h).s, &walk),
        });
    }
    let embedded = IntegralRouting {
        paths: moved_paths,
        bound: None,
    };

    // 5. keep one path per hub and loads within (β+1)·c, then lift
    let hub_ok = restrict_to_hub_capacity(&record, &embedded);
    let limit = &oracle.beta + Q::one();
    let mut load = vec![0u64; g2.edge_count()];
    let mut kept = Vec::new();
    for rp in hub_ok.paths {
        if rp.edges.iter().all(|&e| qu(load[e] + 1) <= &limit * qu(g2.cap(e))) {
            for &e in &rp.edges {
                load[e] += 1;
            }
            kept.push(rp);
        }
    }
    let lifted = lift_routing(
        &record,
        &IntegralRouting {
            paths: kept,
            bound: Some(limit),
        },
    )?;
    let bound = &oracle.beta + qi(3);
    lifted.validate_on(g, inst.demands(), Some(&bound))?;
    Ok(IntegralRouting {
        paths: lifted.paths,
        bound: Some(bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::routing::congestion_of;
    use crate::rounding::default_small_graph_oracle;

    fn set(xs: &[NodeId]) -> BTreeSet<NodeId> {
        xs.iter().copied().collect()
    }

    /// Centre bag {0,1,2}; two degenerate leaves hang off {0,1} and {1,2},
    /// each a 4-cycle through its separator with a pendant terminal.
    fn three_leaf_star() -> (MatchingInstance, FractionalRouting, TreeDecomposition) {
        let mut g = MultiGraph::new(3);
        g.add_edge(0, 1, 1).unwrap();
        g.add_edge(1, 2, 1).unwrap();
        // leaf A: 0-3-4-1, terminal 9 on 3, terminal 10 on 4
        let a3 = g.add_node();
        let a4 = g.add_node();
        let e03 = g.add_edge(0, a3, 1).unwrap();
        let e34 = g.add_edge(a3, a4, 1).unwrap();
        let e41 = g.add_edge(a4, 1, 1).unwrap();
        // leaf B: 1-5-6-2
        let b5 = g.add_node();
        let b6 = g.add_node();
        let e15 = g.add_edge(1, b5, 1).unwrap();
        let e56 = g.add_edge(b5, b6, 1).unwrap();
        let e62 = g.add_edge(b6, 2, 1).unwrap();
        // leaf C: pendant 7 on 2 with a second node 8
        let c7 = g.add_node();
        let c8 = g.add_node();
        let e27 = g.add_edge(2, c7, 1).unwrap();
        let e78 = g.add_edge(c7, c8, 1).unwrap();
        let ta = g.add_node();
        let la = g.add_edge(ta, a3, 1).unwrap();
        let tb = g.add_node();
        let lb = g.add_edge(tb, b6, 1).unwrap();
        let tc = g.add_node();
        let lc = g.add_edge(tc, c8, 1).unwrap();
        let td = g.add_node();
        let ld = g.add_edge(td, b5, 1).unwrap();
        let inst = MatchingInstance::new(g, vec![Demand::new(ta, tb), Demand::new(tc, td)]).unwrap();
        let f = FractionalRouting::new(vec![
            FlowPath { demand: 0, edges: vec![la, e34, e41, e15, e56, lb], value: q(1, 2) },
            FlowPath { demand: 0, edges: vec![la, e03, 0, 1, e62, lb], value: q(1, 2) },
            FlowPath { demand: 1, edges: vec![lc, e78, e27, 1, e15, ld], value: q(1, 2) },
        ]);
        let d = TreeDecomposition::new(
            vec![
                (set(&[0, 1, 2]), false),
                (set(&[0, 1, a3, a4, ta]), true),
                (set(&[1, 2, b5, b6, tb, td]), true),
                (set(&[2, c7, c8, tc]), true),
            ],
            vec![(0, 1), (0, 2), (0, 3)],
            0,
            1,
            2,
        );
        (inst, f, d)
    }

    #[test]
    fn star_both_modes() {
        let (inst, f, d) = three_leaf_star();
        f.validate(&inst).unwrap();
        assert!(crate::decomposition::validate(&d, inst.graph(), None).is_valid());
        let oracle = default_small_graph_oracle(3).unwrap();
        let (tw, rep) = base_case_with_report(&inst, &f, &d, 2, &oracle, Mode::Treewidth).unwrap();
        assert_eq!(rep.step, Step::Star);
        assert!(tw.routed() >= 1);
        assert!(congestion_of(&tw, inst.graph()).unwrap() <= qi(2));
        let gen = base_case(&inst, &f, &d, 2, &oracle, Mode::Generic).unwrap();
        gen.validate_on(inst.graph(), inst.demands(), Some(&qi(5))).unwrap();
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let (inst, f, _) = three_leaf_star();
        let path = TreeDecomposition::new(
            vec![(set(&[0, 1]), false), (set(&[1, 2]), false), (set(&[2, 3]), false)],
            vec![(0, 1), (1, 2)],
            0,
            1,
            1,
        );
        let oracle = default_small_graph_oracle(3).unwrap();
        assert!(matches!(
            base_case(&inst, &f, &path, 1, &oracle, Mode::Treewidth),
            Err(Error::InvalidInput(_))
        ));
    }
}
