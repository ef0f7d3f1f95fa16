//! Tree decompositions with degenerate leaves, their validation, restriction
//! to node subsets, degenerate-leaf contraction and flush filtering.

mod contract;
mod heuristic;
mod restrict;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MultiGraph, NodeId, View};

pub use contract::{classify_shape, contract_to_degenerate, flush_filter, NewLeaf, Shape, ShapeReport};
pub use heuristic::{attach_leaves, build_decomposition_heuristic, Elimination};
pub use restrict::{restrict, restrict_with_origin};

pub type BagId = usize;
pub type TreeEdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bag {
    pub id: BagId,
    pub nodes: BTreeSet<NodeId>,
    pub degenerate: bool,
}

/// Rooted bag tree. Bag ids equal their index in `bags`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<Bag>,
    pub tree_edges: Vec<(BagId, BagId)>,
    pub root: BagId,
    pub k: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NotATree { detail: String },
    UnknownNode { bag: BagId, node: NodeId },
    NodeMissing { node: NodeId },
    OccurrenceDisconnected { node: NodeId },
    EdgeUncovered { edge: usize, u: NodeId, v: NodeId },
    WidthExceeded { tree_edge: TreeEdgeId, size: usize, bound: usize },
    DegenerateNotLeaf { bag: BagId },
    KExceedsP { k: usize, p: usize },
    ClassRejected { bag: BagId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotATree { detail } => write!(f, "bag graph is not a tree: {detail}"),
            Violation::UnknownNode { bag, node } => write!(f, "bag {bag} holds node {node} outside the graph"),
            Violation::NodeMissing { node } => write!(f, "node {node} is in no bag"),
            Violation::OccurrenceDisconnected { node } => {
                write!(f, "bags containing node {node} do not form a subtree")
            }
            Violation::EdgeUncovered { edge, u, v } => write!(f, "edge {edge} ({u},{v}) lies in no bag"),
            Violation::WidthExceeded { tree_edge, size, bound } => {
                write!(f, "tree edge {tree_edge} has separator of size {size} > {bound}")
            }
            Violation::DegenerateNotLeaf { bag } => write!(f, "degenerate bag {bag} is not a leaf"),
            Violation::KExceedsP { k, p } => write!(f, "k = {k} exceeds p = {p}"),
            Violation::ClassRejected { bag } => write!(f, "augmented graph of bag {bag} is outside the class"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Largest separator not incident to a degenerate leaf.
    pub width: usize,
    /// Largest separator incident to a degenerate leaf.
    pub degenerate_width: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Decomposition(self.violations))
        }
    }
}

/// Membership test for the base class, applied to the augmented graph of a
/// bag (nodes relabelled to `0..|X|` in increasing id order).
pub type ClassCheck<'a> = &'a dyn Fn(&MultiGraph) -> bool;

impl TreeDecomposition {
    pub fn new(bags: Vec<(BTreeSet<NodeId>, bool)>, tree_edges: Vec<(BagId, BagId)>, root: BagId, k: usize, p: usize) -> Self {
        TreeDecomposition {
            bags: bags
                .into_iter()
                .enumerate()
                .map(|(id, (nodes, degenerate))| Bag { id, nodes, degenerate })
                .collect(),
            tree_edges,
            root,
            k,
            p,
        }
    }

    pub fn bag_count(&self) -> usize {
        self.bags.len()
    }

    pub fn bag(&self, b: BagId) -> &BTreeSet<NodeId> {
        &self.bags[b].nodes
    }

    pub fn is_degenerate(&self, b: BagId) -> bool {
        self.bags[b].degenerate
    }

    /// Incident tree edges per bag.
    pub fn incidence(&self) -> Vec<Vec<TreeEdgeId>> {
        let mut inc = vec![Vec::new(); self.bags.len()];
        for (i, &(a, b)) in self.tree_edges.iter().enumerate() {
            if a < inc.len() && b < inc.len() {
                inc[a].push(i);
                inc[b].push(i);
            }
        }
        inc
    }

    pub fn neighbors(&self, b: BagId) -> Vec<BagId> {
        self.tree_edges
            .iter()
            .filter_map(|&(x, y)| {
                if x == b {
                    Some(y)
                } else if y == b {
                    Some(x)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn separator(&self, e: TreeEdgeId) -> BTreeSet<NodeId> {
        let (a, b) = self.tree_edges[e];
        self.bags[a].nodes.intersection(&self.bags[b].nodes).copied().collect()
    }

    pub fn touches_degenerate(&self, e: TreeEdgeId) -> bool {
        let (a, b) = self.tree_edges[e];
        self.bags[a].degenerate || self.bags[b].degenerate
    }

    /// Separator S_L of a degenerate leaf: its intersection with the unique
    /// neighbour, or empty for a lone bag.
    pub fn leaf_separator(&self, b: BagId) -> BTreeSet<NodeId> {
        match self.neighbors(b).as_slice() {
            [n] => self.bags[b].nodes.intersection(&self.bags[*n].nodes).copied().collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn degenerate_leaves(&self) -> Vec<BagId> {
        (0..self.bags.len()).filter(|&b| self.bags[b].degenerate).collect()
    }

    pub fn node_set(&self) -> BTreeSet<NodeId> {
        self.bags.iter().flat_map(|b| b.nodes.iter().copied()).collect()
    }

    /// Parent bag of every bag when rooted at `root` (None for the root and
    /// for bags unreachable from it), plus the BFS order.
    pub fn rooted(&self) -> (Vec<Option<BagId>>, Vec<BagId>) {
        let n = self.bags.len();
        let inc = self.incidence();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        if self.root >= n {
            return (parent, order);
        }
        seen[self.root] = true;
        let mut queue = VecDeque::from([self.root]);
        while let Some(b) = queue.pop_front() {
            order.push(b);
            for &e in &inc[b] {
                let (x, y) = self.tree_edges[e];
                let c = if x == b { y } else { x };
                if !seen[c] {
                    seen[c] = true;
                    parent[c] = Some(b);
                    queue.push_back(c);
                }
            }
        }
        (parent, order)
    }

    /// G[[X]]: the subgraph induced by bag `b` plus a clique on every
    /// separator it shares with a neighbouring bag.
    pub fn augmented_graph(&self, graph: &MultiGraph, b: BagId) -> MultiGraph {
        let nodes: Vec<NodeId> = self.bags[b].nodes.iter().copied().collect();
        let local: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut g = MultiGraph::new(nodes.len());
        for ed in graph.edges() {
            if let (Some(&a), Some(&c)) = (local.get(&ed.u), local.get(&ed.v)) {
                g.add_edge(a, c, ed.cap).expect("edge between bag nodes");
            }
        }
        let mut clique_pairs = BTreeSet::new();
        for nb in self.neighbors(b) {
            let sep: Vec<NodeId> = self.bags[b].nodes.intersection(&self.bags[nb].nodes).copied().collect();
            for i in 0..sep.len() {
                for j in i + 1..sep.len() {
                    clique_pairs.insert((local[&sep[i]], local[&sep[j]]));
                }
            }
        }
        for (a, c) in clique_pairs {
            g.add_edge(a, c, 1).expect("clique edge");
        }
        g
    }

    pub fn to_json(&self) -> DecompositionJson {
        DecompositionJson {
            bags: self.bags.clone(),
            tree_edges: self.tree_edges.iter().map(|&(a, b)| [a, b]).collect(),
            root: self.root,
            k: self.k,
            p: self.p,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: DecompositionJson = serde_json::from_str(text)?;
        raw.into_decomposition()
    }
}

/// Wire format: `{"bags": [{"id", "nodes", "degenerate"}], "tree_edges":
/// [[a, b]], "root", "k", "p"}`. Bag ids may be any distinct integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub bags: Vec<Bag>,
    pub tree_edges: Vec<[BagId; 2]>,
    pub root: BagId,
    pub k: usize,
    pub p: usize,
}

impl DecompositionJson {
    pub fn into_decomposition(self) -> Result<TreeDecomposition> {
        let mut index = BTreeMap::new();
        for (i, b) in self.bags.iter().enumerate() {
            if index.insert(b.id, i).is_some() {
                return Err(Error::invalid(format!("duplicate bag id {}", b.id)));
            }
        }
        let lookup = |id: BagId| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::invalid(format!("unknown bag id {id}")))
        };
        let tree_edges = self
            .tree_edges
            .iter()
            .map(|&[a, b]| Ok((lookup(a)?, lookup(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let root = lookup(self.root)?;
        let bags = self
            .bags
            .into_iter()
            .enumerate()
            .map(|(id, b)| Bag {
                id,
                nodes: b.nodes,
                degenerate: b.degenerate,
            })
            .collect();
        Ok(TreeDecomposition {
            bags,
            tree_edges,
            root,
            k: self.k,
            p: self.p,
        })
    }
}

/// Checks tree shape, occurrence connectivity, edge coverage and width
/// bounds against the whole graph.
pub fn validate(decomp: &TreeDecomposition, graph: &MultiGraph, class_check: Option<ClassCheck<'_>>) -> ValidationReport {
    validate_on(decomp, &View::full(graph), class_check)
}

/// As [`validate`], against the nodes and edges of `view` only.
pub fn validate_on(decomp: &TreeDecomposition, view: &View<'_>, class_check: Option<ClassCheck<'_>>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let v = &mut report.violations;
    let n = decomp.bags.len();

    if n == 0 {
        v.push(Violation::NotATree {
            detail: "no bags".into(),
        });
        return report;
    }
    if decomp.bags.iter().enumerate().any(|(i, b)| b.id != i) {
        v.push(Violation::NotATree {
            detail: "bag ids are not dense".into(),
        });
        return report;
    }
    if decomp.tree_edges.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
        v.push(Violation::NotATree {
            detail: "tree edge with an invalid endpoint".into(),
        });
        return report;
    }
    if decomp.root >= n {
        v.push(Violation::NotATree {
            detail: format!("root {} is not a bag", decomp.root),
        });
        return report;
    }
    let (_, order) = decomp.rooted();
    if decomp.tree_edges.len() + 1 != n || order.len() != n {
        v.push(Violation::NotATree {
            detail: format!("{} bags, {} edges, {} reachable", n, decomp.tree_edges.len(), order.len()),
        });
        return report;
    }
    if decomp.k > decomp.p {
        v.push(Violation::KExceedsP {
            k: decomp.k,
            p: decomp.p,
        });
    }

    let g = view.graph();
    let mut holders: BTreeMap<NodeId, Vec<BagId>> = BTreeMap::new();
    for b in &decomp.bags {
        for &x in &b.nodes {
            if !view.has_node(x) {
                v.push(Violation::UnknownNode { bag: b.id, node: x });
            } else {
                holders.entry(x).or_default().push(b.id);
            }
        }
    }
    let inc = decomp.incidence();
    for x in view.nodes() {
        let Some(hs) = holders.get(&x) else {
            v.push(Violation::NodeMissing { node: x });
            continue;
        };
        // connectivity of the holder set inside the tree
        let set: BTreeSet<BagId> = hs.iter().copied().collect();
        let mut seen = BTreeSet::from([hs[0]]);
        let mut queue = VecDeque::from([hs[0]]);
        while let Some(b) = queue.pop_front() {
            for &e in &inc[b] {
                let (p, q) = decomp.tree_edges[e];
                let c = if p == b { q } else { p };
                if set.contains(&c) && seen.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        if seen.len() != set.len() {
            v.push(Violation::OccurrenceDisconnected { node: x });
        }
    }
    for e in view.edges() {
        let ed = g.edge(e);
        let covered = holders
            .get(&ed.u)
            .is_some_and(|hs| hs.iter().any(|&b| decomp.bags[b].nodes.contains(&ed.v)));
        if !covered {
            v.push(Violation::EdgeUncovered { edge: e, u: ed.u, v: ed.v });
        }
    }
    for b in 0..n {
        if decomp.bags[b].degenerate && inc[b].len() > 1 {
            v.push(Violation::DegenerateNotLeaf { bag: b });
        }
    }
    for e in 0..decomp.tree_edges.len() {
        let size = decomp.separator(e).len();
        if decomp.touches_degenerate(e) {
            report.degenerate_width = report.degenerate_width.max(size);
            if size > decomp.p {
                v.push(Violation::WidthExceeded {
                    tree_edge: e,
                    size,
                    bound: decomp.p,
                });
            }
        } else {
            report.width = report.width.max(size);
            if size > decomp.k {
                v.push(Violation::WidthExceeded {
                    tree_edge: e,
                    size,
                    bound: decomp.k,
                });
            }
        }
    }
    if let Some(check) = class_check {
        for b in 0..n {
            if !decomp.bags[b].degenerate && !check(&decomp.augmented_graph(g, b)) {
                v.push(Violation::ClassRejected { bag: b });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[NodeId]) -> BTreeSet<NodeId> {
        xs.iter().copied().collect()
    }

    #[test]
    fn triangle_with_two_bags_misses_an_edge() {
        let g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1), (2, 0, 1)]).unwrap();
        let d = TreeDecomposition::new(vec![(set(&[0, 1]), false), (set(&[1, 2]), false)], vec![(0, 1)], 0, 1, 1);
        let r = validate(&d, &g, None);
        assert_eq!(r.violations, vec![Violation::EdgeUncovered { edge: 2, u: 2, v: 0 }]);
    }

    #[test]
    fn path_decomposition_is_valid_with_k1() {
        let g = MultiGraph::from_edges(3, [(0, 1, 1), (1, 2, 1)]).unwrap();
        let d = TreeDecomposition::new(vec![(set(&[0, 1]), false), (set(&[1, 2]), false)], vec![(0, 1)], 0, 1, 1);
        let r = validate(&d, &g, None);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(r.width, 1);
    }

    #[test]
    fn detects_structural_problems() {
        let g = MultiGraph::from_edges(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        // node 1 in bags 0 and 2 but not in the middle bag
        let d = TreeDecomposition::new(
            vec![(set(&[0, 1]), true), (set(&[2, 3]), false), (set(&[1, 2]), false)],
            vec![(0, 1), (1, 2)],
            0,
            2,
            1,
        );
        let r = validate(&d, &g, Some(&|h: &MultiGraph| h.node_count() <= 1));
        assert!(r.violations.contains(&Violation::OccurrenceDisconnected { node: 1 }));
        assert!(r.violations.contains(&Violation::KExceedsP { k: 2, p: 1 }));
        assert!(r.violations.contains(&Violation::ClassRejected { bag: 1 }));
        assert!(!r.violations.iter().any(|x| matches!(x, Violation::DegenerateNotLeaf { .. })));

        let cyc = TreeDecomposition::new(vec![(set(&[0, 1, 2, 3]), false)], vec![(0, 0)], 0, 1, 1);
        assert!(matches!(validate(&cyc, &g, None).violations[0], Violation::NotATree { .. }));
    }

    #[test]
    fn augmented_graph_adds_separator_cliques() {
        let g = MultiGraph::from_edges(4, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)]).unwrap();
        let d = TreeDecomposition::new(vec![(set(&[0, 1, 2]), false), (set(&[1, 2, 3]), false)], vec![(0, 1)], 0, 2, 2);
        let a = d.augmented_graph(&g, 0);
        assert_eq!(a.node_count(), 3);
        assert_eq!(a.edge_count(), 3);
        assert!(validate(&d, &g, None).is_valid());
    }

    #[test]
    fn json_round_trip_with_sparse_ids() {
        let text = r#"{"bags":[{"id":10,"nodes":[0,1],"degenerate":false},{"id":4,"nodes":[1,2],"degenerate":true}],"tree_edges":[[10,4]],"root":10,"k":1,"p":1}"#;
        let d = TreeDecomposition::from_json(text).unwrap();
        assert_eq!(d.tree_edges, vec![(0, 1)]);
        assert!(d.is_degenerate(1));
        let back = serde_json::to_string(&d.to_json()).unwrap();
        let again = TreeDecomposition::from_json(&back).unwrap();
        assert_eq!(again, d);
    }
}
