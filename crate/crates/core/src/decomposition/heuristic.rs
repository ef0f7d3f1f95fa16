use std::collections::BTreeSet;

use crate::decomposition::{BagId, TreeDecomposition};
use crate::error::{Error, Result};
use crate::graph::{MultiGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Elimination {
    #[default]
    MinDegree,
    MinFill,
}

/// Tree decomposition from a greedy elimination order. Always valid; the
/// width is an upper bound only. Bags contained in a neighbour are merged
/// away, and components are chained together with empty separators.
pub fn build_decomposition_heuristic(graph: &MultiGraph, mode: Elimination) -> TreeDecomposition {
    let n = graph.node_count();
    if n == 0 {
        return TreeDecomposition::new(vec![(BTreeSet::new(), false)], vec![], 0, 0, 0);
    }
    let mut adj: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    for e in graph.edges() {
        adj[e.u].insert(e.v);
        adj[e.v].insert(e.u);
    }
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut bag_of = vec![BTreeSet::new(); n];
    for _ in 0..n {
        let score = |v: NodeId| -> usize {
            match mode {
                Elimination::MinDegree => adj[v].len(),
                Elimination::MinFill => {
                    let nb: Vec<NodeId> = adj[v].iter().copied().collect();
                    let mut fill = 0;
                    for i in 0..nb.len() {
                        for j in i + 1..nb.len() {
                            if !adj[nb[i]].contains(&nb[j]) {
                                fill += 1;
                            }
                        }
                    }
                    fill
                }
            }
        };
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (score(v), adj[v].len(), v))
            .expect("a live node remains");
        let nb: Vec<NodeId> = adj[v].iter().copied().collect();
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                adj[nb[i]].insert(nb[j]);
                adj[nb[j]].insert(nb[i]);
            }
        }
        for &u in &nb {
            adj[u].remove(&v);
        }
        let mut bag: BTreeSet<NodeId> = nb.into_iter().collect();
        bag.insert(v);
        bag_of[v] = bag;
        alive[v] = false;
        order.push(v);
    }
    let mut position = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    // parent of v's bag: the bag of the earliest-eliminated later neighbour
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    for &v in &order {
        parent[v] = bag_of[v]
            .iter()
            .copied()
            .filter(|&u| u != v)
            .min_by_key(|&u| position[u]);
    }
    // chain the forest roots
    let roots: Vec<NodeId> = order.iter().copied().filter(|&v| parent[v].is_none()).collect();
    for w in roots.windows(2) {
        parent[w[0]] = Some(w[1]);
    }

    // merge bags contained in their parent's bag
    let mut rep: Vec<NodeId> = (0..n).collect();
    for &v in order.iter().rev() {
        if let Some(p) = parent[v] {
            let pr = rep[p];
            if bag_of[v].is_subset(&bag_of[pr]) {
                rep[v] = pr;
            }
        }
    }
    let kept: Vec<NodeId> = order.iter().copied().filter(|&v| rep[v] == v).collect();
    let mut id = vec![usize::MAX; n];
    for (i, &v) in kept.iter().enumerate() {
        id[v] = i;
    }
    let mut edges = Vec::new();
    for &v in &kept {
        if let Some(p) = parent[v] {
            edges.push((id[rep[p]], id[v]));
        }
    }
    let root = id[*roots.last().expect("at least one root")];
    let bags: Vec<(BTreeSet<NodeId>, bool)> = kept.iter().map(|&v| (bag_of[v].clone(), false)).collect();
    let mut d = TreeDecomposition::new(bags, edges, root, 0, 0);
    let width = (0..d.tree_edges.len()).map(|e| d.separator(e).len()).max().unwrap_or(0);
    d.k = width;
    d.p = width;
    d
}

/// Adds a bag {attach, leaf} for every `(leaf, attach)` pair, hung below the
/// lowest-id bag containing `attach`.
pub fn attach_leaves(decomp: &TreeDecomposition, leaves: &[(NodeId, NodeId)]) -> Result<TreeDecomposition> {
    let mut d = decomp.clone();
    for &(leaf, attach) in leaves {
        let host: BagId = (0..decomp.bags.len())
            .find(|&b| decomp.bags[b].nodes.contains(&attach))
            .ok_or_else(|| Error::invalid(format!("node {attach} is in no bag")))?;
        let id = d.bags.len();
        d.bags.push(super::Bag {
            id,
            nodes: BTreeSet::from([attach, leaf]),
            degenerate: false,
        });
        d.tree_edges.push((host, id));
    }
    if !leaves.is_empty() {
        d.k = d.k.max(1);
        d.p = d.p.max(d.k);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::validate;

    #[test]
    fn tree_has_width_one() {
        let g = MultiGraph::from_edges(6, [(0, 1, 1), (1, 2, 1), (1, 3, 1), (3, 4, 1), (3, 5, 1)]).unwrap();
        for mode in [Elimination::MinDegree, Elimination::MinFill] {
            let d = build_decomposition_heuristic(&g, mode);
            let r = validate(&d, &g, None);
            assert!(r.is_valid(), "{:?}", r.violations);
            assert_eq!(d.k, 1);
        }
    }

    #[test]
    fn grid_width_bounded() {
        let side = 4;
        let mut edges = Vec::new();
        for r in 0..side {
            for c in 0..side {
                let v = r * side + c;
                if c + 1 < side {
                    edges.push((v, v + 1, 1));
                }
                if r + 1 < side {
                    edges.push((v, v + side, 1));
                }
            }
        }
        let g = MultiGraph::from_edges(side * side, edges).unwrap();
        let d = build_decomposition_heuristic(&g, Elimination::MinFill);
        assert!(validate(&d, &g, None).is_valid());
        assert!(d.k <= 4, "width {}", d.k);
    }

    #[test]
    fn disconnected_graph_and_leaves() {
        let mut g = MultiGraph::from_edges(4, [(0, 1, 1), (2, 3, 1)]).unwrap();
        let d = build_decomposition_heuristic(&g, Elimination::MinDegree);
        assert!(validate(&d, &g, None).is_valid());
        let leaf = g.add_node();
        g.add_edge(leaf, 2, 1).unwrap();
        let d2 = attach_leaves(&d, &[(leaf, 2)]).unwrap();
        assert!(validate(&d2, &g, None).is_valid());
    }
}
