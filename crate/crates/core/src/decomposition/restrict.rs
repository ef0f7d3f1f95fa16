use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::decomposition::{Bag, BagId, TreeDecomposition};
use crate::error::{Error, Result};
use crate::graph::{NodeId, View};

/// Restriction of `decomp` to the node set `u` (which must induce a
/// connected subgraph of `view`). Returns the new decomposition and, for
/// each new bag, the id of the bag it came from.
///
/// Bags are intersected with `u` and emptied bags dropped. Because G[U] is
/// connected, the surviving bags already form a subtree, so no tree edges
/// need to be added. The root is the surviving bag closest to `anchor`
/// (the old root when `anchor` is `None`).
pub fn restrict_with_origin(
    decomp: &TreeDecomposition,
    view: &View<'_>,
    u: &BTreeSet<NodeId>,
    anchor: Option<BagId>,
) -> Result<(TreeDecomposition, Vec<BagId>)> {
    if u.is_empty() {
        return Err(Error::invalid("cannot restrict to an empty node set"));
    }
    if let Some(x) = u.iter().find(|&&x| !view.has_node(x)) {
        return Err(Error::invalid(format!("node {x} of U is not in the graph")));
    }
    let mut sub = view.clone();
    for e in view.edges().collect::<Vec<_>>() {
        let ed = view.graph().edge(e);
        if !(u.contains(&ed.u) && u.contains(&ed.v)) {
            sub.remove_edge(e);
        }
    }
    let comps: Vec<_> = sub.components().into_iter().filter(|c| c.iter().all(|x| u.contains(x))).collect();
    if comps.len() != 1 {
        return Err(Error::invalid(format!("G[U] has {} components", comps.len())));
    }

    let mut origin = Vec::new();
    let mut new_id = BTreeMap::new();
    let mut bags = Vec::new();
    for b in &decomp.bags {
        let nodes: BTreeSet<NodeId> = b.nodes.intersection(u).copied().collect();
        if nodes.is_empty() {
            continue;
        }
        new_id.insert(b.id, bags.len());
        origin.push(b.id);
        bags.push(Bag {
            id: bags.len(),
            nodes,
            degenerate: b.degenerate,
        });
    }
    let tree_edges: Vec<(BagId, BagId)> = decomp
        .tree_edges
        .iter()
        .filter_map(|(a, b)| Some((*new_id.get(a)?, *new_id.get(b)?)))
        .collect();
    if tree_edges.len() + 1 != bags.len() {
        return Err(Error::invalid(
            "surviving bags do not form a subtree; decomposition does not fit the graph",
        ));
    }

    // nearest surviving bag to the anchor, by BFS over the old tree
    let start = anchor.unwrap_or(decomp.root);
    let inc = decomp.incidence();
    let mut seen = vec![false; decomp.bags.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut root = None;
    while let Some(b) = queue.pop_front() {
        if let Some(&nb) = new_id.get(&b) {
            root = Some(nb);
            break;
        }
        let mut next: Vec<BagId> = inc[b]
            .iter()
            .map(|&e| {
                let (x, y) = decomp.tree_edges[e];
                if x == b {
                    y
                } else {
                    x
                }
            })
            .collect();
        next.sort_unstable();
        for c in next {
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    let root = root.ok_or_else(|| Error::internal("no surviving bag reachable from the anchor"))?;
    Ok((
        TreeDecomposition {
            bags,
            tree_edges,
            root,
            k: decomp.k,
            p: decomp.p,
        },
        origin,
    ))
}

pub fn restrict(decomp: &TreeDecomposition, view: &View<'_>, u: &BTreeSet<NodeId>) -> Result<TreeDecomposition> {
    restrict_with_origin(decomp, view, u, None).map(|(d, _)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::validate_on;
    use crate::graph::MultiGraph;

    fn set(xs: &[NodeId]) -> BTreeSet<NodeId> {
        xs.iter().copied().collect()
    }

    fn path_decomp() -> (MultiGraph, TreeDecomposition) {
        let g = MultiGraph::from_edges(5, (0..4).map(|i| (i, i + 1, 1))).unwrap();
        let d = TreeDecomposition::new(
            (0..4).map(|i| (set(&[i, i + 1]), false)).collect(),
            vec![(0, 1), (1, 2), (2, 3)],
            0,
            1,
            1,
        );
        (g, d)
    }

    #[test]
    fn identity_on_all_nodes() {
        let (g, d) = path_decomp();
        let r = restrict(&d, &View::full(&g), &set(&[0, 1, 2, 3, 4])).unwrap();
        assert_eq!(r, d);
    }

    #[test]
    fn interior_of_one_bag() {
        let (g, d) = path_decomp();
        let r = restrict(&d, &View::full(&g), &set(&[0])).unwrap();
        assert_eq!(r.bag_count(), 1);
        // node 3 sits in bags 2 and 3
        let r = restrict(&d, &View::full(&g), &set(&[3])).unwrap();
        assert_eq!(r.bag_count(), 2);
        let u = set(&[3, 4]);
        let (r, origin) = restrict_with_origin(&d, &View::full(&g), &u, Some(0)).unwrap();
        assert_eq!(origin, vec![2, 3]);
        assert_eq!(r.root, 0);
        let view = View::induced(&g, &u);
        assert!(validate_on(&r, &view, None).is_valid());
    }

    #[test]
    fn rejects_disconnected_u() {
        let (g, d) = path_decomp();
        assert!(matches!(
            restrict(&d, &View::full(&g), &set(&[0, 4])),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn nested_restriction_agrees() {
        let (g, d) = path_decomp();
        let full = View::full(&g);
        let outer = restrict(&d, &full, &set(&[1, 2, 3])).unwrap();
        let twice = restrict(&outer, &full, &set(&[2, 3])).unwrap();
        let once = restrict(&d, &full, &set(&[2, 3])).unwrap();
        let bags = |t: &TreeDecomposition| t.bags.iter().map(|b| b.nodes.clone()).collect::<Vec<_>>();
        assert_eq!(bags(&twice), bags(&once));
    }
}
