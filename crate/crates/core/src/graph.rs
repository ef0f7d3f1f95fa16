//! Undirected capacitated multigraphs, edge-masked views and path helpers.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub cap: u64,
}

impl Edge {
    pub fn other(&self, x: NodeId) -> NodeId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn touches(&self, x: NodeId) -> bool {
        self.u == x || self.v == x
    }
}

/// Undirected multigraph with dense node and edge ids. Parallel edges are
/// allowed, self-loops are not, and every capacity is at least 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MultiGraph {
    nodes: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<EdgeId>>,
}

impl MultiGraph {
    pub fn new(nodes: usize) -> Self {
        MultiGraph {
            nodes,
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn from_edges(nodes: usize, edges: impl IntoIterator<Item = (NodeId, NodeId, u64)>) -> Result<Self> {
        let mut g = MultiGraph::new(nodes);
        for (u, v, c) in edges {
            g.add_edge(u, v, c)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self) -> NodeId {
        self.adj.push(Vec::new());
        self.nodes += 1;
        self.nodes - 1
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId, cap: u64) -> Result<EdgeId> {
        if u >= self.nodes || v >= self.nodes {
            return Err(Error::invalid(format!(
                "edge ({u},{v}) references a node outside 0..{}",
                self.nodes
            )));
        }
        if u == v {
            return Err(Error::invalid(format!("self-loop at node {u}")));
        }
        if cap == 0 {
            return Err(Error::invalid(format!("edge ({u},{v}) has zero capacity")));
        }
        let id = self.edges.len();
        self.edges.push(Edge { u, v, cap });
        self.adj[u].push(id);
        self.adj[v].push(id);
        Ok(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cap(&self, e: EdgeId) -> u64 {
        self.edges[e].cap
    }

    /// Incident edge ids in increasing order.
    pub fn incident(&self, v: NodeId) -> &[EdgeId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn has_node(&self, v: NodeId) -> bool {
        v < self.nodes
    }

    pub fn has_edge(&self, e: EdgeId) -> bool {
        e < self.edges.len()
    }

    /// Full rescan of the adjacency index against the edge records.
    pub fn adjacency_consistent(&self) -> bool {
        let mut rebuilt = vec![Vec::new(); self.nodes];
        for (id, e) in self.edges.iter().enumerate() {
            if e.u >= self.nodes || e.v >= self.nodes || e.u == e.v || e.cap == 0 {
                return false;
            }
            rebuilt[e.u].push(id);
            rebuilt[e.v].push(id);
        }
        rebuilt == self.adj
    }

    pub fn is_connected(&self) -> bool {
        View::full(self).components().len() <= 1
    }
}

/// A subgraph given by node and edge masks over a parent graph. Edge ids
/// and node ids are those of the parent.
#[derive(Debug, Clone)]
pub struct View<'g> {
    graph: &'g MultiGraph,
    node_on: Vec<bool>,
    edge_on: Vec<bool>,
}

impl<'g> View<'g> {
    pub fn full(graph: &'g MultiGraph) -> Self {
        View {
            graph,
            node_on: vec![true; graph.node_count()],
            edge_on: vec![true; graph.edge_count()],
        }
    }

    /// Induced subgraph on `nodes`.
    pub fn induced(graph: &'g MultiGraph, nodes: &BTreeSet<NodeId>) -> Self {
        let mut node_on = vec![false; graph.node_count()];
        for &v in nodes {
            node_on[v] = true;
        }
        let edge_on = graph
            .edges()
            .iter()
            .map(|e| node_on[e.u] && node_on[e.v])
            .collect();
        View {
            graph,
            node_on,
            edge_on,
        }
    }

    /// Subgraph formed by `edges` and their endpoints.
    pub fn from_edges(graph: &'g MultiGraph, edges: impl IntoIterator<Item = EdgeId>) -> Self {
        let mut node_on = vec![false; graph.node_count()];
        let mut edge_on = vec![false; graph.edge_count()];
        for e in edges {
            edge_on[e] = true;
            let ed = graph.edge(e);
            node_on[ed.u] = true;
            node_on[ed.v] = true;
        }
        View {
            graph,
            node_on,
            edge_on,
        }
    }

    pub fn graph(&self) -> &'g MultiGraph {
        self.graph
    }

    pub fn has_node(&self, v: NodeId) -> bool {
        v < self.node_on.len() && self.node_on[v]
    }

    pub fn has_edge(&self, e: EdgeId) -> bool {
        e < self.edge_on.len() && self.edge_on[e]
    }

    pub fn add_node(&mut self, v: NodeId) {
        self.node_on[v] = true;
    }

    pub fn remove_edge(&mut self, e: EdgeId) {
        self.edge_on[e] = false;
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_on.len()).filter(move |&v| self.node_on[v])
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edge_on.len()).filter(move |&e| self.edge_on[e])
    }

    pub fn incident(&self, v: NodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.graph
            .incident(v)
            .iter()
            .copied()
            .filter(move |&e| self.edge_on[e])
    }

    pub fn node_set(&self) -> BTreeSet<NodeId> {
        self.nodes().collect()
    }

    /// Connected components (node sets), ordered by smallest member.
    pub fn components(&self) -> Vec<BTreeSet<NodeId>> {
        let mut seen = vec![false; self.node_on.len()];
        let mut out = Vec::new();
        for s in self.nodes() {
            if seen[s] {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([s]);
            seen[s] = true;
            while let Some(x) = queue.pop_front() {
                comp.insert(x);
                for e in self.incident(x) {
                    let y = self.graph.edge(e).other(x);
                    if self.node_on[y] && !seen[y] {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// BFS shortest path (hop count) from `from` to the nearest node
    /// satisfying `is_target`, exploring edges in increasing id order.
    pub fn bfs_path(&self, from: NodeId, is_target: impl Fn(NodeId) -> bool) -> Option<Vec<EdgeId>> {
        if is_target(from) {
            return Some(Vec::new());
        }
        let mut pred: Vec<Option<EdgeId>> = vec![None; self.node_on.len()];
        let mut seen = vec![false; self.node_on.len()];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(x) = queue.pop_front() {
            for e in self.incident(x) {
                let y = self.graph.edge(e).other(x);
                if seen[y] || !self.node_on[y] {
                    continue;
                }
                seen[y] = true;
                pred[y] = Some(e);
                if is_target(y) {
                    let mut path = Vec::new();
                    let mut cur = y;
                    while cur != from {
                        let pe = pred[cur].expect("bfs predecessor");
                        path.push(pe);
                        cur = self.graph.edge(pe).other(cur);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(y);
            }
        }
        None
    }
}

/// Node sequence of the walk that starts at `start` and follows `edges`,
/// or `None` if some edge is not incident to the current node.
pub fn walk_nodes(graph: &MultiGraph, start: NodeId, edges: &[EdgeId]) -> Option<Vec<NodeId>> {
    let mut nodes = Vec::with_capacity(edges.len() + 1);
    nodes.push(start);
    let mut cur = start;
    for &e in edges {
        if !graph.has_edge(e) {
            return None;
        }
        let ed = graph.edge(e);
        if !ed.touches(cur) {
            return None;
        }
        cur = ed.other(cur);
        nodes.push(cur);
    }
    Some(nodes)
}

/// True if `edges` is a node-simple walk from `a` to `b`.
pub fn is_simple_path(graph: &MultiGraph, a: NodeId, b: NodeId, edges: &[EdgeId]) -> bool {
    match walk_nodes(graph, a, edges) {
        Some(nodes) => {
            let distinct: BTreeSet<_> = nodes.iter().collect();
            distinct.len() == nodes.len() && nodes.last() == Some(&b)
        }
        None => false,
    }
}

/// Removes every cycle from the walk starting at `start`, yielding a
/// node-simple path with the same endpoints whose edges are a sub-multiset
/// of the input.
pub fn shortcut(graph: &MultiGraph, start: NodeId, edges: &[EdgeId]) -> Vec<EdgeId> {
    let mut pos_of: std::collections::BTreeMap<NodeId, usize> = Default::default();
    let mut path: Vec<EdgeId> = Vec::with_capacity(edges.len());
    let mut nodes = vec![start];
    pos_of.insert(start, 0);
    let mut cur = start;
    for &e in edges {
        let next = graph.edge(e).other(cur);
        if let Some(&p) = pos_of.get(&next) {
            for &dropped in &nodes[p + 1..] {
                pos_of.remove(&dropped);
            }
            nodes.truncate(p + 1);
            path.truncate(p);
        } else {
            path.push(e);
            nodes.push(next);
            pos_of.insert(next, nodes.len() - 1);
        }
        cur = next;
    }
    path
}

/// Reversed edge sequence (the same walk traversed backwards).
pub fn reversed(edges: &[EdgeId]) -> Vec<EdgeId> {
    edges.iter().rev().copied().collect()
}
