#![allow(dead_code)]

use std::collections::BTreeSet;

use medp_core::decomposition::TreeDecomposition;
use medp_core::flow::solve_lp;
use medp_core::decomposition::flush_filter;
use medp_core::graph::{MultiGraph, NodeId, View};
use medp_core::instance::{normalize_to_matching, Demand, MatchingInstance, Normalized};
use medp_core::rational::{q, qu, Q};
use medp_core::routing::{FlowPath, FractionalRouting};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Same edges with capacities drawn from 1..=max_cap.
pub fn recap(g: &MultiGraph, max_cap: u64, rng: &mut ChaCha8Rng) -> MultiGraph {
    MultiGraph::from_edges(g.node_count(), g.edges().iter().map(|e| (e.u, e.v, rng.gen_range(1..=max_cap)))).unwrap()
}

pub struct Star {
    pub norm: Normalized,
    pub decomp: TreeDecomposition,
    pub center: BTreeSet<NodeId>,
    /// Flushed LP solution.
    pub flow: FractionalRouting,
}

/// Triangle {0,1,2} with 2-3 hanging leaf graphs, each attached to one or
/// two triangle nodes; pairs between leaf-graph nodes. The decomposition
/// is the star with degenerate leaves.
pub fn star_instance(seed: u64) -> Star {
    let mut r = rng(seed);
    let mut g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
    let mut leaves: Vec<(BTreeSet<NodeId>, BTreeSet<NodeId>)> = Vec::new();
    let mut inner_all = Vec::new();
    for _ in 0..r.gen_range(2..=3) {
        let mut sep: Vec<NodeId> = vec![0, 1, 2];
        sep.shuffle(&mut r);
        sep.truncate(r.gen_range(1..=2));
        let mut inner = Vec::new();
        for _ in 0..r.gen_range(2..=3) {
            let v = g.add_node();
            let pool: Vec<NodeId> = sep.iter().chain(inner.iter()).copied().collect();
            g.add_edge(v, *pool.choose(&mut r).unwrap(), 1).unwrap();
            if r.gen_bool(0.5) {
                g.add_edge(v, *sep.choose(&mut r).unwrap(), 1).unwrap();
            }
            inner.push(v);
        }
        inner_all.extend(inner.iter().copied());
        leaves.push((sep.into_iter().collect(), inner.into_iter().collect()));
    }
    let pairs: Vec<Demand> = (0..r.gen_range(2..=4))
        .map(|_| {
            let s = *inner_all.choose(&mut r).unwrap();
            let t = loop {
                let t = *inner_all.choose(&mut r).unwrap();
                if t != s {
                    break t;
                }
            };
            Demand::new(s, t)
        })
        .collect();
    let norm = normalize_to_matching(&g, &pairs).unwrap();
    let inst = &norm.instance;
    let mut bags = vec![([0, 1, 2].into_iter().collect::<BTreeSet<_>>(), false)];
    let mut tree_edges = Vec::new();
    for (sep, inner) in &leaves {
        let mut bag: BTreeSet<NodeId> = sep | inner;
        for t in inst.terminals() {
            let attach = inst.graph().edge(inst.leaf_edge(t)).other(t);
            if inner.contains(&attach) {
                bag.insert(t);
            }
        }
        tree_edges.push((0, bags.len()));
        bags.push((bag, true));
    }
    let decomp = TreeDecomposition::new(bags, tree_edges, 0, 1, 2);
    let lp = solve_lp(inst, &q(1, 20)).unwrap();
    let (flow, _) = flush_filter(&lp, &decomp, inst.graph(), inst.demands());
    Star {
        center: [0, 1, 2].into_iter().collect(),
        norm,
        decomp,
        flow,
    }
}

pub struct ThroughV {
    pub raw: MultiGraph,
    pub pairs: Vec<Demand>,
    pub inst: MatchingInstance,
    pub flow: FractionalRouting,
    pub v: NodeId,
}

/// Every flow path is a simple path through `v`: BFS s→v, then v→t
/// avoiding the first leg. Values are scaled so loads fit.
pub fn through_v_instance(g: &MultiGraph, pairs_wanted: usize, seed: u64) -> Option<ThroughV> {
    let mut r = rng(seed);
    let n = g.node_count();
    let v = r.gen_range(0..n);
    let full = View::full(g);
    let mut pairs = Vec::new();
    let mut legs = Vec::new();
    for _ in 0..pairs_wanted * 3 {
        if pairs.len() == pairs_wanted {
            break;
        }
        let s = r.gen_range(0..n);
        let t = r.gen_range(0..n);
        if s == t || s == v || t == v {
            continue;
        }
        let Some(a) = full.bfs_path(s, |x| x == v) else { continue };
        let used = medp_core::graph::walk_nodes(g, s, &a).unwrap();
        let keep: BTreeSet<NodeId> = (0..n).filter(|x| *x == v || !used.contains(x)).collect();
        let Some(b) = View::induced(g, &keep).bfs_path(v, |x| x == t) else { continue };
        pairs.push(Demand::new(s, t));
        legs.push([a, b].concat());
    }
    if pairs.is_empty() {
        return None;
    }
    let norm = normalize_to_matching(g, &pairs).unwrap();
    let inst = norm.instance.clone();
    let vals = [q(1, 3), q(1, 2), q(1, 1)];
    let mut paths: Vec<FlowPath> = legs
        .into_iter()
        .enumerate()
        .map(|(h, mid)| {
            let d = inst.demand(h);
            let mut edges = vec![inst.leaf_edge(d.s)];
            edges.extend(mid);
            edges.push(inst.leaf_edge(d.t));
            FlowPath {
                demand: h,
                edges,
                value: vals.choose(&mut r).unwrap().clone(),
            }
        })
        .collect();
    let f = FractionalRouting::new(paths.clone());
    let loads = f.edge_loads(inst.graph());
    let worst = (0..loads.len())
        .map(|e| &loads[e] / qu(inst.graph().cap(e)))
        .max()
        .unwrap_or_else(|| q(1, 1));
    if worst > q(1, 1) {
        for p in &mut paths {
            p.value = &p.value / &worst;
        }
    }
    Some(ThroughV {
        raw: g.clone(),
        pairs,
        inst,
        flow: FractionalRouting::new(paths),
        v,
    })
}

pub fn ratio(a: &Q, b: &Q) -> f64 {
    use num_traits::ToPrimitive;
    (a / b).to_f64().unwrap_or(f64::NAN)
}
