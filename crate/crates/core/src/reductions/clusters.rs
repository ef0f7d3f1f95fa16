use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{decompose, Dinic, FlowArc};
use crate::graph::{EdgeId, NodeId, View};
use crate::rational::{qi, Q};

/// A group of terminals with a spanning subtree and an exit path to R.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub id: usize,
    pub terminals: BTreeSet<NodeId>,
    /// Edges of the subtree T_i spanning the terminals.
    pub tree: Vec<EdgeId>,
    #[serde(with = "crate::rational::serde_q")]
    pub weight: Q,
    /// Root r of its BFS tree when this is the leftover cluster holding
    /// the root; such a cluster exits trivially at r.
    pub root: Option<NodeId>,
    /// Start s_i of the exit path (a terminal, or r for a root cluster).
    pub source: NodeId,
    /// End r_i ∈ R of the exit path.
    pub anchor: NodeId,
    /// Exit path P_i from `source` to `anchor`.
    pub exit: Vec<EdgeId>,
}

impl Cluster {
    /// Path inside T_i from terminal `s` to `source`.
    pub fn tree_segment(&self, view: &View<'_>, s: NodeId) -> Result<Vec<EdgeId>> {
        let t = View::from_edges(view.graph(), self.tree.iter().copied());
        if s == self.source {
            return Ok(Vec::new());
        }
        t.bfs_path(s, |x| x == self.source)
            .ok_or_else(|| Error::internal(format!("cluster {} tree does not join {s} to {}", self.id, self.source)))
    }
}

struct Forest {
    parent_edge: Vec<Option<EdgeId>>,
    parent: Vec<Option<NodeId>>,
    depth: Vec<usize>,
    root_of: Vec<Option<NodeId>>,
}

/// Multi-source BFS from R; edges explored in id order, roots in id order.
fn bfs_forest(view: &View<'_>, r: &BTreeSet<NodeId>) -> Forest {
    let g = view.graph();
    let n = g.node_count();
    let mut f = Forest {
        parent_edge: vec![None; n],
        parent: vec![None; n],
        depth: vec![0; n],
        root_of: vec![None; n],
    };
    let mut queue = VecDeque::new();
    for &x in r {
        if view.has_node(x) {
            f.root_of[x] = Some(x);
            queue.push_back(x);
        }
    }
    while let Some(x) = queue.pop_front() {
        for e in view.incident(x) {
            let y = g.edge(e).other(x);
            if view.has_node(y) && f.root_of[y].is_none() {
                f.root_of[y] = f.root_of[x];
                f.parent[y] = Some(x);
                f.parent_edge[y] = Some(e);
                f.depth[y] = f.depth[x] + 1;
                queue.push_back(y);
            }
        }
    }
    f
}

/// Partitions the terminals `s` into clusters of weight in [1, 2] (one
/// leftover cluster per BFS tree may be lighter and holds the tree root),
/// following the deepest-heavy-subtree scheme on a BFS forest from `r`.
/// Exit paths are left empty; see [`cluster_paths`].
pub fn cluster_terminals(
    view: &View<'_>,
    s: &BTreeSet<NodeId>,
    r: &BTreeSet<NodeId>,
    x: &BTreeMap<NodeId, Q>,
) -> Result<Vec<Cluster>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let forest = bfs_forest(view, r);
    let mut by_root: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for &t in s {
        match forest.root_of.get(t).copied().flatten() {
            Some(root) => {
                by_root.entry(root).or_default().insert(t);
            }
            None => return Err(Error::invalid(format!("terminal {t} cannot reach R"))),
        }
    }
    let weight = |v: NodeId| x.get(&v).cloned().unwrap_or_else(Q::zero);
    let mut clusters = Vec::new();
    for (root, terms) in by_root {
        cluster_tree(view, &forest, root, terms, &weight, &mut clusters);
    }
    Ok(clusters)
}

fn cluster_tree(
    view: &View<'_>,
    forest: &Forest,
    root: NodeId,
    mut terms: BTreeSet<NodeId>,
    weight: &dyn Fn(NodeId) -> Q,
    out: &mut Vec<Cluster>,
) {
    let n = view.graph().node_count();
    let mut alive: BTreeSet<NodeId> = (0..n).filter(|&v| forest.root_of[v] == Some(root)).collect();
    let two = qi(2);
    loop {
        // children lists and subtree weights over the live tree
        let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for &v in &alive {
            if let Some(p) = forest.parent[v] {
                children.entry(p).or_default().push(v);
            }
        }
        let mut order: Vec<NodeId> = alive.iter().copied().collect();
        order.sort_by_key(|&v| std::cmp::Reverse(forest.depth[v]));
        let mut sub: BTreeMap<NodeId, Q> = BTreeMap::new();
        for &v in &order {
            let mut w = if terms.contains(&v) { weight(v) } else { Q::zero() };
            for c in children.get(&v).into_iter().flatten() {
                w += &sub[c];
            }
            sub.insert(v, w);
        }
        let total = sub[&root].clone();
        if total <= two {
            if !terms.is_empty() {
                let tree = alive.iter().filter_map(|&v| forest.parent_edge[v]).collect();
                out.push(Cluster {
                    id: out.len(),
                    weight: total,
                    terminals: std::mem::take(&mut terms),
                    tree,
                    root: Some(root),
                    source: root,
                    anchor: root,
                    exit: Vec::new(),
                });
            }
            return;
        }
        let v = alive
            .iter()
            .copied()
            .filter(|u| sub[u] >= Q::one())
            .max_by_key(|&u| (forest.depth[u], std::cmp::Reverse(u)))
            .expect("root subtree is heavy");
        let kids = children.get(&v).cloned().unwrap_or_default();
        let kid_sum: Q = kids.iter().map(|c| &sub[c]).sum();
        let (taken_tops, include_v) = if kid_sum < Q::one() {
            (kids.clone(), true)
        } else {
            let mut acc = Q::zero();
            let mut prefix = Vec::new();
            for &c in &kids {
                acc += &sub[&c];
                prefix.push(c);
                if acc >= Q::one() {
                    break;
                }
            }
            (prefix, false)
        };
        // nodes of the removed subtrees
        let mut removed = BTreeSet::new();
        let mut stack = taken_tops.clone();
        while let Some(u) = stack.pop() {
            removed.insert(u);
            stack.extend(children.get(&u).into_iter().flatten().copied());
        }
        let mut tree: Vec<EdgeId> = removed.iter().filter_map(|&u| forest.parent_edge[u]).collect();
        tree.sort_unstable();
        let mut members: BTreeSet<NodeId> = removed.intersection(&terms).copied().collect();
        if include_v && terms.contains(&v) {
            members.insert(v);
        }
        let w: Q = members.iter().map(|&u| weight(u)).sum();
        for u in &members {
            terms.remove(u);
        }
        for u in &removed {
            alive.remove(u);
        }
        let source = *members.iter().next().unwrap_or(&v);
        out.push(Cluster {
            id: out.len(),
            terminals: members,
            tree,
            weight: w,
            root: None,
            source,
            anchor: source,
            exit: Vec::new(),
        });
    }
}

/// Computes capacity-respecting exit paths from every non-root cluster to
/// `r` by one integral max-flow (one unit per cluster). Root clusters keep
/// their trivial path.
pub fn cluster_paths(view: &View<'_>, mut clusters: Vec<Cluster>, r: &BTreeSet<NodeId>) -> Result<Vec<Cluster>> {
    let g = view.graph();
    let n = g.node_count();
    let open: Vec<usize> = (0..clusters.len()).filter(|&i| clusters[i].root.is_none()).collect();
    if open.is_empty() {
        return Ok(clusters);
    }
    let src = n + open.len();
    let snk = src + 1;
    let mut d = Dinic::<i64>::new(snk + 1);
    let mut edge_arcs = Vec::new();
    for e in view.edges() {
        let ed = g.edge(e);
        edge_arcs.push((e, d.add_edge(ed.u, ed.v, ed.cap as i64)));
    }
    let mut side_arcs = Vec::new();
    for (j, &i) in open.iter().enumerate() {
        side_arcs.push((src, n + j, d.add_arc(src, n + j, 1)));
        for &t in &clusters[i].terminals {
            side_arcs.push((n + j, t, d.add_arc(n + j, t, 1)));
        }
    }
    for &x in r {
        if view.has_node(x) {
            side_arcs.push((x, snk, d.add_arc(x, snk, open.len() as i64)));
        }
    }
    let value = d.max_flow(src, snk);
    if value < open.len() as i64 {
        return Err(Error::internal(format!(
            "only {value} of {} clusters reach R disjointly",
            open.len()
        )));
    }
    let mut arcs = Vec::new();
    for &(e, a) in &edge_arcs {
        let f = d.flow(a);
        let ed = g.edge(e);
        if f > 0 {
            arcs.push(FlowArc { from: ed.u, to: ed.v, tag: e, amount: f });
        } else if f < 0 {
            arcs.push(FlowArc { from: ed.v, to: ed.u, tag: e, amount: -f });
        }
    }
    for &(from, to, a) in &side_arcs {
        let f = d.flow(a);
        if f > 0 {
            arcs.push(FlowArc { from, to, tag: usize::MAX, amount: f });
        }
    }
    for (walk, amount) in decompose(snk + 1, &arcs, src, snk)? {
        debug_assert_eq!(amount, 1);
        let j = arcs[walk[0]].to - n;
        let c = &mut clusters[open[j]];
        c.source = arcs[walk[1]].to;
        c.anchor = arcs[*walk.last().expect("walk")].from;
        c.exit = walk[2..walk.len() - 1].iter().map(|&a| arcs[a].tag).collect();
    }
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MultiGraph;
    use crate::rational::q;

    fn weights(pairs: &[(NodeId, Q)]) -> BTreeMap<NodeId, Q> {
        pairs.iter().cloned().collect()
    }

    #[test]
    fn single_terminal() {
        let g = MultiGraph::from_edges(2, [(0, 1, 1)]).unwrap();
        let v = View::full(&g);
        let cs = cluster_terminals(&v, &BTreeSet::from([1]), &BTreeSet::from([0]), &weights(&[(1, qi(1))])).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].weight, qi(1));
        assert_eq!(cs[0].root, Some(0));
    }

    #[test]
    fn light_path_is_one_cluster() {
        // r=0, terminals 1..=4 at x = 1/2: total 2, so the scheme stops at once
        let g = MultiGraph::from_edges(5, (0..4).map(|i| (i, i + 1, 1))).unwrap();
        let x = weights(&(1..=4).map(|i| (i, q(1, 2))).collect::<Vec<_>>());
        let cs = cluster_terminals(&View::full(&g), &(1..=4).collect(), &BTreeSet::from([0]), &x).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].weight, qi(2));
    }

    #[test]
    fn heavier_path_splits_at_deepest_heavy_node() {
        let g = MultiGraph::from_edges(6, (0..5).map(|i| (i, i + 1, 1))).unwrap();
        let x = weights(&(1..=5).map(|i| (i, q(1, 2))).collect::<Vec<_>>());
        let cs = cluster_terminals(&View::full(&g), &(1..=5).collect(), &BTreeSet::from([0]), &x).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].terminals, BTreeSet::from([4, 5]));
        assert_eq!(cs[0].weight, qi(1));
        assert_eq!(cs[0].tree, vec![4]);
        assert_eq!(cs[1].weight, q(3, 2));
        assert_eq!(cs[1].root, Some(0));
    }

    #[test]
    fn star_of_unit_terminals() {
        let g = MultiGraph::from_edges(6, (1..6).map(|i| (0, i, 1))).unwrap();
        let x = weights(&(1..6).map(|i| (i, qi(1))).collect::<Vec<_>>());
        let r = BTreeSet::from([0]);
        let cs = cluster_terminals(&View::full(&g), &(1..6).collect(), &r, &x).unwrap();
        assert!(cs.len() >= 3);
        assert!(cs.iter().all(|c| c.weight <= qi(2)));
        assert!(cs.iter().filter(|c| c.root.is_none()).all(|c| c.weight >= qi(1)));
        let cs = cluster_paths(&View::full(&g), cs, &r).unwrap();
        for c in &cs {
            if c.root.is_none() {
                assert_eq!(c.exit.len(), 1);
                assert_eq!(c.anchor, 0);
            }
        }
    }

    #[test]
    fn exit_paths_respect_capacity() {
        // two heavy clusters behind a cap-2 edge
        let g = MultiGraph::from_edges(5, [(0, 1, 2), (1, 2, 1), (1, 3, 1), (3, 4, 1)]).unwrap();
        let x = weights(&[(2, qi(1)), (3, qi(1)), (4, qi(1))]);
        let r = BTreeSet::from([0]);
        let v = View::full(&g);
        let cs = cluster_terminals(&v, &BTreeSet::from([2, 3, 4]), &r, &x).unwrap();
        let cs = cluster_paths(&v, cs, &r).unwrap();
        let mut load = vec![0u64; g.edge_count()];
        for c in &cs {
            for &e in &c.exit {
                load[e] += 1;
            }
            assert!(crate::graph::is_simple_path(&g, c.source, c.anchor, &c.exit));
        }
        assert!(load.iter().enumerate().all(|(e, &l)| l <= g.cap(e)));
    }
}
