use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{edge_connectivity, Dinic};
use crate::graph::{reversed, shortcut, EdgeId, MultiGraph, NodeId, View};
use crate::instance::Demand;
use crate::routing::{IntegralRouting, RoutedPath};

/// Unit-edge multigraph with all degrees even. Edge `i` of `graph` is a
/// copy of source edge `origin[i]`; a source edge of capacity c has c
/// copies, plus one more if it lies in the T-join `duplicated`.
#[derive(Debug, Clone)]
pub struct Eulerian {
    pub graph: MultiGraph,
    pub origin: Vec<EdgeId>,
    pub duplicated: Vec<EdgeId>,
}

/// Makes every degree (counted with capacities) even by adding one copy of
/// each edge of a T-join for the odd nodes. The T-join pairs odd nodes of
/// a component in id order and XORs BFS paths between them; it need not be
/// minimum.
pub fn eulerianize(view: &View<'_>) -> Eulerian {
    let g = view.graph();
    let mut degree = vec![0u64; g.node_count()];
    for e in view.edges() {
        let ed = g.edge(e);
        degree[ed.u] += ed.cap;
        degree[ed.v] += ed.cap;
    }
    let mut join: BTreeSet<EdgeId> = BTreeSet::new();
    for comp in view.components() {
        let odd: Vec<NodeId> = comp.iter().copied().filter(|&v| degree[v] % 2 == 1).collect();
        for pair in odd.chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            let path = view.bfs_path(a, |x| x == b).expect("odd nodes share a component");
            for e in path {
                if !join.remove(&e) {
                    join.insert(e);
                }
            }
        }
    }
    let mut graph = MultiGraph::new(g.node_count());
    let mut origin = Vec::new();
    for e in view.edges() {
        let ed = g.edge(e);
        let copies = ed.cap + u64::from(join.contains(&e));
        for _ in 0..copies {
            graph.add_edge(ed.u, ed.v, 1).expect("edge of the source graph");
            origin.push(e);
        }
    }
    Eulerian {
        graph,
        origin,
        duplicated: join.into_iter().collect(),
    }
}

/// One edge of the sparsifier with the source-graph walk it stands for,
/// oriented from `u` to `v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SparseEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub path: Vec<EdgeId>,
}

/// Multigraph H on the terminal set whose edges embed into pairwise
/// edge-disjoint walks of the Eulerian graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sparsifier {
    pub terminals: BTreeSet<NodeId>,
    pub edges: Vec<SparseEdge>,
    pub duplicated: Vec<EdgeId>,
    pub sigma: usize,
    pub rho: usize,
}

impl Sparsifier {
    /// H as a unit-capacity multigraph over the source node ids; edge `i`
    /// is `edges[i]`.
    pub fn graph(&self, nodes: usize) -> MultiGraph {
        MultiGraph::from_edges(nodes, self.edges.iter().map(|e| (e.u, e.v, 1))).expect("sparsifier edges are valid")
    }
}

#[derive(Debug, Clone)]
struct Live {
    a: NodeId,
    b: NodeId,
    /// Source walk from a to b.
    path: Vec<EdgeId>,
}

fn connectivities(n: usize, edges: &[Live], alive: &[bool], pairs: &[(NodeId, NodeId)]) -> Vec<u64> {
    pairs
        .iter()
        .map(|&(s, t)| {
            let mut d = Dinic::<i64>::new(n);
            for (i, e) in edges.iter().enumerate() {
                if alive[i] {
                    d.add_edge(e.a, e.b, 1);
                }
            }
            d.max_flow(s, t) as u64
        })
        .collect()
}

/// Splits off every node outside `s` until only edges between terminals
/// remain. At each node, incident edge pairs are tried in lexicographic
/// edge order and the first pair preserving λ(a, b) for all terminal pairs
/// is taken. Splitting a pair of parallel edges yields a loop, which is
/// dropped.
pub fn split_off(eul: &Eulerian, s: &BTreeSet<NodeId>) -> Result<Sparsifier> {
    if s.is_empty() {
        return Err(Error::invalid("sparsifier needs a nonempty terminal set"));
    }
    let g = &eul.graph;
    let n = g.node_count();
    if let Some(v) = (0..n).find(|&v| g.degree(v) % 2 == 1) {
        return Err(Error::invalid(format!("node {v} has odd degree")));
    }
    let mut edges: Vec<Live> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(i, ed)| Live {
            a: ed.u,
            b: ed.v,
            path: vec![eul.origin[i]],
        })
        .collect();
    let mut alive = vec![true; edges.len()];
    let terms: Vec<NodeId> = s.iter().copied().collect();
    let mut pairs = Vec::new();
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            pairs.push((terms[i], terms[j]));
        }
    }
    let target = connectivities(n, &edges, &alive, &pairs);

    let inner: Vec<NodeId> = (0..n).filter(|v| !s.contains(v)).collect();
    for v in inner {
        loop {
            let inc: Vec<usize> = (0..edges.len())
                .filter(|&i| alive[i] && (edges[i].a == v || edges[i].b == v))
                .collect();
            if inc.is_empty() {
                break;
            }
            let mut done = false;
            'search: for x in 0..inc.len() {
                for y in x + 1..inc.len() {
                    let (e1, e2) = (inc[x], inc[y]);
                    let u = other(&edges[e1], v);
                    let w = other(&edges[e2], v);
                    alive[e1] = false;
                    alive[e2] = false;
                    let mut path = oriented(&edges[e1], u);
                    path.extend(oriented(&edges[e2], v));
                    edges.push(Live { a: u, b: w, path });
                    alive.push(u != w);
                    if pairs.is_empty() || connectivities(n, &edges, &alive, &pairs) >= target {
                        done = true;
                        break 'search;
                    }
                    edges.pop();
                    alive.pop();
                    alive[e1] = true;
                    alive[e2] = true;
                }
            }
            if !done {
                let dump: Vec<(NodeId, NodeId)> = inc.iter().map(|&i| (edges[i].a, edges[i].b)).collect();
                return Err(Error::internal(format!(
                    "no admissible split at node {v}; incident edges {dump:?}"
                )));
            }
        }
    }
    let k = s.len();
    Ok(Sparsifier {
        terminals: s.clone(),
        edges: edges
            .into_iter()
            .zip(alive)
            .filter(|(_, on)| *on)
            .map(|(e, _)| SparseEdge {
                u: e.a,
                v: e.b,
                path: e.path,
            })
            .collect(),
        duplicated: eul.duplicated.clone(),
        sigma: k * k,
        rho: 2,
    })
}

fn other(e: &Live, v: NodeId) -> NodeId {
    if e.a == v {
        e.b
    } else {
        e.a
    }
}

/// Walk of `e` starting at `from`.
fn oriented(e: &Live, from: NodeId) -> Vec<EdgeId> {
    if e.a == from {
        e.path.clone()
    } else {
        reversed(&e.path)
    }
}

/// Sparsifier for `s` in the subgraph `view`.
pub fn build_sparsifier(view: &View<'_>, s: &BTreeSet<NodeId>) -> Result<Sparsifier> {
    split_off(&eulerianize(view), s)
}

/// Replaces every H edge of every path by its embedded walk and shortcuts
/// the result. `demands` are the pairs the routing serves, on H's nodes.
pub fn embed_routing(
    sparsifier: &Sparsifier,
    routing: &IntegralRouting,
    demands: &[Demand],
    source: &MultiGraph,
) -> Result<IntegralRouting> {
    let mut out = Vec::new();
    for p in &routing.paths {
        let d = *demands
            .get(p.demand)
            .ok_or_else(|| Error::invalid(format!("unknown demand {}", p.demand)))?;
        let mut cur = d.s;
        let mut walk = Vec::new();
        for &h in &p.edges {
            let e = sparsifier
                .edges
                .get(h)
                .ok_or_else(|| Error::invalid(format!("path uses missing sparsifier edge {h}")))?;
            if e.u == cur {
                walk.extend(e.path.iter().copied());
                cur = e.v;
            } else if e.v == cur {
                walk.extend(reversed(&e.path));
                cur = e.u;
            } else {
                return Err(Error::invalid(format!("sparsifier edge {h} does not continue the path at {cur}")));
            }
        }
        if cur != d.t {
            return Err(Error::invalid(format!("path of demand {} does not end at {}", p.demand, d.t)));
        }
        out.push(RoutedPath {
            demand: p.demand,
            edges: shortcut(source, d.s, &walk),
        });
    }
    Ok(IntegralRouting {
        paths: out,
        bound: None,
    })
}

/// λ between every pair of `s` in `view`, keyed by ordered pair.
pub fn pairwise_connectivity(view: &View<'_>, s: &BTreeSet<NodeId>) -> BTreeMap<(NodeId, NodeId), u64> {
    let terms: Vec<NodeId> = s.iter().copied().collect();
    let mut out = BTreeMap::new();
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            out.insert((terms[i], terms[j]), edge_connectivity(view, terms[i], terms[j]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_gets_both_edges_doubled() {
        let g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1)]).unwrap();
        let e = eulerianize(&View::full(&g));
        assert_eq!(e.duplicated, vec![0, 1]);
        assert!((0..3).all(|v| e.graph.degree(v) % 2 == 0));
    }

    #[test]
    fn cycle_is_already_eulerian() {
        let g = MultiGraph::from_edges(4, (0..4).map(|i| (i, (i + 1) % 4, 1))).unwrap();
        assert!(eulerianize(&View::full(&g)).duplicated.is_empty());
    }

    #[test]
    fn triangle_split_at_middle() {
        // u=0, m=1, w=2; edges u-m, m-w, u-w
        let g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        let s = BTreeSet::from([0, 2]);
        let sp = build_sparsifier(&View::full(&g), &s).unwrap();
        assert_eq!(sp.edges.len(), 2);
        assert!(sp.edges.iter().all(|e| (e.u.min(e.v), e.u.max(e.v)) == (0, 2)));
        let h = sp.graph(3);
        assert_eq!(edge_connectivity(&View::full(&h), 0, 2), 2);
        assert_eq!(edge_connectivity(&View::full(&g), 0, 2), 2);
    }

    #[test]
    fn all_terminals_is_identity() {
        let g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        let sp = build_sparsifier(&View::full(&g), &BTreeSet::from([0, 1, 2])).unwrap();
        assert_eq!(sp.edges.len(), 3);
        assert!(sp.edges.iter().all(|e| e.path.len() == 1));
    }

    #[test]
    fn embed_one_edge() {
        let g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        let sp = build_sparsifier(&View::full(&g), &BTreeSet::from([0, 2])).unwrap();
        let routing = IntegralRouting {
            paths: vec![RoutedPath { demand: 0, edges: vec![0] }],
            bound: None,
        };
        let out = embed_routing(&sp, &routing, &[Demand::new(0, 2)], &g).unwrap();
        assert!(crate::graph::is_simple_path(&g, 0, 2, &out.paths[0].edges));
    }
}
