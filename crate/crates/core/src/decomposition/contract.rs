use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::Serialize;

use crate::decomposition::{Bag, BagId, TreeDecomposition, TreeEdgeId};
use crate::error::{Error, Result};
use crate::graph::{walk_nodes, MultiGraph, NodeId};
use crate::instance::Demand;
use crate::rational::Q;
use crate::routing::FractionalRouting;

/// A degenerate leaf created by contraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NewLeaf {
    pub bag: BagId,
    pub separator: BTreeSet<NodeId>,
    pub nodes: BTreeSet<NodeId>,
}

/// Contracts every maximal subtree hanging (away from the root) below a
/// non-degenerate tree edge whose separator has exactly `k` nodes into a
/// single degenerate leaf. The result is a (k-1, p)-degenerate
/// decomposition.
pub fn contract_to_degenerate(decomp: &TreeDecomposition, k: usize) -> Result<(TreeDecomposition, Vec<NewLeaf>)> {
    if k == 0 {
        return Err(Error::invalid("cannot contract with k = 0"));
    }
    let (parent, order) = decomp.rooted();
    let n = decomp.bags.len();
    let mut edge_to_parent: Vec<Option<TreeEdgeId>> = vec![None; n];
    for (i, &(a, b)) in decomp.tree_edges.iter().enumerate() {
        if parent[b] == Some(a) {
            edge_to_parent[b] = Some(i);
        } else if parent[a] == Some(b) {
            edge_to_parent[a] = Some(i);
        }
    }
    // owner[b] = top bag of the contracted subtree containing b, if any
    let mut owner: Vec<Option<BagId>> = vec![None; n];
    for &b in &order {
        if let Some(pb) = parent[b] {
            if let Some(top) = owner[pb] {
                owner[b] = Some(top);
                continue;
            }
            let e = edge_to_parent[b].expect("edge to parent");
            if !decomp.touches_degenerate(e) && decomp.separator(e).len() == k {
                owner[b] = Some(b);
            }
        }
    }

    let mut new_id = vec![usize::MAX; n];
    let mut bags: Vec<Bag> = Vec::new();
    for &b in &order {
        match owner[b] {
            None => {
                new_id[b] = bags.len();
                bags.push(Bag {
                    id: bags.len(),
                    nodes: decomp.bags[b].nodes.clone(),
                    degenerate: decomp.bags[b].degenerate,
                });
            }
            Some(top) if top == b => {
                new_id[b] = bags.len();
                bags.push(Bag {
                    id: bags.len(),
                    nodes: decomp.bags[b].nodes.clone(),
                    degenerate: true,
                });
            }
            Some(top) => {
                new_id[b] = new_id[top];
                let merged = &mut bags[new_id[top]].nodes;
                merged.extend(decomp.bags[b].nodes.iter().copied());
            }
        }
    }
    let mut tree_edges = Vec::new();
    let mut leaves = Vec::new();
    for &b in &order {
        if let Some(pb) = parent[b] {
            if owner[b].is_none() || owner[b] == Some(b) {
                tree_edges.push((new_id[pb], new_id[b]));
            }
            if owner[b] == Some(b) {
                leaves.push(NewLeaf {
                    bag: new_id[b],
                    separator: decomp.separator(edge_to_parent[b].expect("edge to parent")),
                    nodes: bags[new_id[b]].nodes.clone(),
                });
            }
        }
    }
    let out = TreeDecomposition {
        bags,
        tree_edges,
        root: new_id[decomp.root],
        k: k - 1,
        p: decomp.p,
    };
    Ok((out, leaves))
}

/// Drops every flow path with an endpoint inside some degenerate leaf L
/// (a node of L outside S_L) that never meets S_L. Returns the remaining
/// routing and the dropped value.
pub fn flush_filter(
    routing: &FractionalRouting,
    decomp: &TreeDecomposition,
    graph: &MultiGraph,
    demands: &[Demand],
) -> (FractionalRouting, Q) {
    let leaves: Vec<(BTreeSet<NodeId>, BTreeSet<NodeId>)> = decomp
        .degenerate_leaves()
        .into_iter()
        .map(|b| {
            let sep = decomp.leaf_separator(b);
            let interior = decomp.bags[b].nodes.difference(&sep).copied().collect();
            (interior, sep)
        })
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Q::zero();
    for p in &routing.paths {
        let d = demands[p.demand];
        let nodes: BTreeSet<NodeId> = walk_nodes(graph, d.s, &p.edges)
            .or_else(|| walk_nodes(graph, d.t, &p.edges))
            .unwrap_or_default()
            .into_iter()
            .collect();
        let bad = leaves.iter().any(|(interior, sep)| {
            (interior.contains(&d.s) || interior.contains(&d.t)) && nodes.is_disjoint(sep)
        });
        if bad {
            dropped += &p.value;
        } else {
            kept.push(p.clone());
        }
    }
    (FractionalRouting::new(kept), dropped)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    SingleGraph { bag: BagId },
    DegeneratePair { tree_edge: TreeEdgeId },
    DegenerateStar { center: BagId },
    HasWidthKEdge { tree_edge: TreeEdgeId },
    General,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShapeReport {
    pub shape: Shape,
    pub k: usize,
}

pub fn classify_shape(decomp: &TreeDecomposition) -> ShapeReport {
    let n = decomp.bags.len();
    let shape = if n == 1 {
        Shape::SingleGraph { bag: 0 }
    } else if n == 2 && decomp.bags.iter().all(|b| b.degenerate) {
        Shape::DegeneratePair { tree_edge: 0 }
    } else if let Some(center) = star_center(decomp) {
        Shape::DegenerateStar { center }
    } else if let Some(e) = (0..decomp.tree_edges.len())
        .find(|&e| !decomp.touches_degenerate(e) && decomp.separator(e).len() == decomp.k)
    {
        Shape::HasWidthKEdge { tree_edge: e }
    } else {
        Shape::General
    };
    ShapeReport { shape, k: decomp.k }
}

/// Centre of a star whose leaves are all degenerate.
fn star_center(decomp: &TreeDecomposition) -> Option<BagId> {
    let n = decomp.bags.len();
    let mut degree: BTreeMap<BagId, usize> = BTreeMap::new();
    for &(a, b) in &decomp.tree_edges {
        *degree.entry(a).or_default() += 1;
        *degree.entry(b).or_default() += 1;
    }
    let candidates: Vec<BagId> = (0..n)
        .filter(|&b| degree.get(&b).copied().unwrap_or(0) == n - 1)
        .filter(|&b| (0..n).all(|l| l == b || decomp.bags[l].degenerate))
        .collect();
    // with two bags prefer a non-degenerate centre
    candidates
        .iter()
        .copied()
        .find(|&b| !decomp.bags[b].degenerate)
        .or_else(|| candidates.first().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::validate;
    use crate::rational::{q, qi};
    use crate::routing::FlowPath;

    fn set(xs: &[NodeId]) -> BTreeSet<NodeId> {
        xs.iter().copied().collect()
    }

    #[test]
    fn no_size_k_separator_is_identity() {
        let d = TreeDecomposition::new(vec![(set(&[0, 1]), false), (set(&[1, 2]), false)], vec![(0, 1)], 0, 2, 2);
        let (c, leaves) = contract_to_degenerate(&d, 2).unwrap();
        assert!(leaves.is_empty());
        assert_eq!(c.bags, d.bags);
        assert_eq!(c.k, 1);
        assert!(contract_to_degenerate(&d, 0).is_err());
    }

    #[test]
    fn path_with_one_size_k_edge() {
        // bags {0,1,2} - {1,2,3} - {3,4}
        let g = MultiGraph::from_edges(5, [(0, 1, 1), (1, 2, 1), (0, 2, 1), (2, 3, 1), (1, 3, 1), (3, 4, 1)]).unwrap();
        let d = TreeDecomposition::new(
            vec![(set(&[0, 1, 2]), false), (set(&[1, 2, 3]), false), (set(&[3, 4]), false)],
            vec![(0, 1), (1, 2)],
            0,
            2,
            2,
        );
        assert!(validate(&d, &g, None).is_valid());
        let (c, leaves) = contract_to_degenerate(&d, 2).unwrap();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].separator, set(&[1, 2]));
        assert_eq!(leaves[0].nodes, set(&[1, 2, 3, 4]));
        assert_eq!(c.bag_count(), 2);
        let r = validate(&c, &g, None);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(c.k, 1);
    }

    #[test]
    fn nested_separators_only_outermost() {
        // {0,1,2} - {1,2,3} - {2,3,4}: both separators have size 2
        let g = MultiGraph::from_edges(5, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (2, 4, 1)]).unwrap();
        let d = TreeDecomposition::new(
            vec![(set(&[0, 1, 2]), false), (set(&[1, 2, 3]), false), (set(&[2, 3, 4]), false)],
            vec![(0, 1), (1, 2)],
            0,
            2,
            2,
        );
        let (c, leaves) = contract_to_degenerate(&d, 2).unwrap();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].nodes, set(&[1, 2, 3, 4]));
        assert!(validate(&c, &g, None).is_valid());
    }

    #[test]
    fn flush_drops_paths_avoiding_the_separator() {
        // bags {0,1} - {1,2} - {2,3,4}, the last degenerate with S_L = {2}
        let g = MultiGraph::from_edges(5, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (2, 4, 1), (3, 4, 1)]).unwrap();
        let d = TreeDecomposition::new(
            vec![(set(&[0, 1]), false), (set(&[1, 2]), false), (set(&[2, 3, 4]), true)],
            vec![(0, 1), (1, 2)],
            0,
            1,
            1,
        );
        assert!(validate(&d, &g, None).is_valid());
        let demands = [Demand::new(3, 4), Demand::new(0, 3)];
        let r = FractionalRouting::new(vec![
            FlowPath { demand: 0, edges: vec![4], value: q(1, 3) },
            FlowPath { demand: 0, edges: vec![2, 3], value: q(1, 2) },
            FlowPath { demand: 1, edges: vec![0, 1, 2], value: q(1, 4) },
        ]);
        let (kept, dropped) = flush_filter(&r, &d, &g, &demands);
        assert_eq!(dropped, q(1, 3));
        assert_eq!(kept.value(), q(3, 4));
        let (again, more) = flush_filter(&kept, &d, &g, &demands);
        assert_eq!(again, kept);
        assert_eq!(more, qi(0));
    }

    #[test]
    fn shapes() {
        let one = TreeDecomposition::new(vec![(set(&[0]), false)], vec![], 0, 1, 1);
        assert_eq!(classify_shape(&one).shape, Shape::SingleGraph { bag: 0 });
        let pair = TreeDecomposition::new(vec![(set(&[0, 1]), true), (set(&[1, 2]), true)], vec![(0, 1)], 0, 1, 1);
        assert_eq!(classify_shape(&pair).shape, Shape::DegeneratePair { tree_edge: 0 });
        let star = TreeDecomposition::new(
            vec![(set(&[0, 1, 2]), false), (set(&[0, 3]), true), (set(&[1, 4]), true), (set(&[2, 5]), true)],
            vec![(0, 1), (0, 2), (0, 3)],
            0,
            1,
            1,
        );
        assert_eq!(classify_shape(&star).shape, Shape::DegenerateStar { center: 0 });
        let path = TreeDecomposition::new(
            vec![(set(&[0, 1]), false), (set(&[1, 2]), false), (set(&[2, 3]), false)],
            vec![(0, 1), (1, 2)],
            0,
            1,
            1,
        );
        assert_eq!(classify_shape(&path).shape, Shape::HasWidthKEdge { tree_edge: 0 });
        let mut loose = path.clone();
        loose.k = 2;
        loose.p = 2;
        assert_eq!(classify_shape(&loose).shape, Shape::General);
    }
}
