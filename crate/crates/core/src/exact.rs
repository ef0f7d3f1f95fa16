//! Brute-force ground truth at desk scale: exact integral MEDP under a
//! congestion cap, and the exact LP optimum over all simple paths.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, MultiGraph, NodeId};
use crate::instance::Demand;
use crate::rational::{qu, Q};
use crate::routing::{IntegralRouting, RoutedPath};

pub const MAX_EXACT_NODES: usize = 14;
pub const MAX_EXACT_DEMANDS: usize = 5;
pub const MAX_LP_PATHS: usize = 5000;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub paths_enumerated: u64,
}

#[derive(Debug, Clone)]
pub struct ExactResult {
    pub value: usize,
    pub routing: IntegralRouting,
    pub stats: SearchStats,
}

struct Search<'a> {
    graph: &'a MultiGraph,
    pairs: &'a [Demand],
    residual: Vec<u64>,
    stats: SearchStats,
}

impl Search<'_> {
    /// Is there any t-path for `d` over edges with residual capacity?
    fn reachable(&self, d: Demand) -> bool {
        let mut seen = vec![false; self.graph.node_count()];
        let mut stack = vec![d.s];
        seen[d.s] = true;
        while let Some(x) = stack.pop() {
            if x == d.t {
                return true;
            }
            for &e in self.graph.incident(x) {
                let y = self.graph.edge(e).other(x);
                if self.residual[e] > 0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        false
    }

    /// Assigns paths to `subset[i..]`; `chosen` collects them.
    fn assign(&mut self, subset: &[usize], i: usize, chosen: &mut Vec<Vec<EdgeId>>) -> bool {
        self.stats.nodes_expanded += 1;
        if i == subset.len() {
            return true;
        }
        if subset[i..].iter().any(|&h| !self.reachable(self.pairs[h])) {
            return false;
        }
        let d = self.pairs[subset[i]];
        let mut on_path = vec![false; self.graph.node_count()];
        on_path[d.s] = true;
        let mut edges = Vec::new();
        self.dfs(d.s, d.t, &mut on_path, &mut edges, subset, i, chosen)
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &mut self,
        x: NodeId,
        t: NodeId,
        on_path: &mut Vec<bool>,
        edges: &mut Vec<EdgeId>,
        subset: &[usize],
        i: usize,
        chosen: &mut Vec<Vec<EdgeId>>,
    ) -> bool {
        if x == t {
            self.stats.paths_enumerated += 1;
            chosen.push(edges.clone());
            if self.assign(subset, i + 1, chosen) {
                return true;
            }
            chosen.pop();
            return false;
        }
        let mut next: Vec<(NodeId, EdgeId)> = self
            .graph
            .incident(x)
            .iter()
            .map(|&e| (self.graph.edge(e).other(x), e))
            .collect();
        next.sort_unstable();
        for (y, e) in next {
            if on_path[y] || self.residual[e] == 0 {
                continue;
            }
            on_path[y] = true;
            self.residual[e] -= 1;
            edges.push(e);
            let found = self.dfs(y, t, on_path, edges, subset, i, chosen);
            edges.pop();
            self.residual[e] += 1;
            on_path[y] = false;
            if found {
                return true;
            }
        }
        false
    }
}

fn subsets_of_size(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            if n - v < size - cur.len() {
                break;
            }
            cur.push(v);
            rec(v + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}

/// Largest set of pairs routable with at most `cap * c_e` paths on every
/// edge. Refuses graphs with more than 14 nodes or 5 pairs.
pub fn exact_medp(graph: &MultiGraph, pairs: &[Demand], congestion_cap: u64) -> Result<ExactResult> {
    if graph.node_count() > MAX_EXACT_NODES || pairs.len() > MAX_EXACT_DEMANDS {
        return Err(Error::GuardExceeded(format!(
            "exact search limited to {MAX_EXACT_NODES} nodes and {MAX_EXACT_DEMANDS} pairs (got {} and {})",
            graph.node_count(),
            pairs.len()
        )));
    }
    if let Some(d) = pairs.iter().find(|d| !graph.has_node(d.s) || !graph.has_node(d.t) || d.s == d.t) {
        return Err(Error::invalid(format!("bad pair ({}, {})", d.s, d.t)));
    }
    let mut search = Search {
        graph,
        pairs,
        residual: graph.edges().iter().map(|e| e.cap * congestion_cap).collect(),
        stats: SearchStats::default(),
    };
    for size in (1..=pairs.len()).rev() {
        for subset in subsets_of_size(pairs.len(), size) {
            let mut chosen = Vec::new();
            if search.assign(&subset, 0, &mut chosen) {
                let paths = subset
                    .iter()
                    .zip(chosen)
                    .map(|(&h, edges)| RoutedPath { demand: h, edges })
                    .collect();
                return Ok(ExactResult {
                    value: size,
                    routing: IntegralRouting {
                        paths,
                        bound: Some(qu(congestion_cap)),
                    },
                    stats: search.stats,
                });
            }
        }
    }
    Ok(ExactResult {
        value: 0,
        routing: IntegralRouting {
            paths: Vec::new(),
            bound: Some(qu(congestion_cap)),
        },
        stats: search.stats,
    })
}

/// Every simple s-t path, in DFS order with neighbours by increasing id.
pub fn simple_paths(graph: &MultiGraph, s: NodeId, t: NodeId, limit: usize) -> Result<Vec<Vec<EdgeId>>> {
    fn rec(
        g: &MultiGraph,
        x: NodeId,
        t: NodeId,
        on: &mut Vec<bool>,
        cur: &mut Vec<EdgeId>,
        out: &mut Vec<Vec<EdgeId>>,
        limit: usize,
    ) -> bool {
        if x == t {
            out.push(cur.clone());
            return out.len() <= limit;
        }
        let mut next: Vec<(NodeId, EdgeId)> = g.incident(x).iter().map(|&e| (g.edge(e).other(x), e)).collect();
        next.sort_unstable();
        for (y, e) in next {
            if on[y] {
                continue;
            }
            on[y] = true;
            cur.push(e);
            let ok = rec(g, y, t, on, cur, out, limit);
            cur.pop();
            on[y] = false;
            if !ok {
                return false;
            }
        }
        true
    }
    let mut on = vec![false; graph.node_count()];
    on[s] = true;
    let mut out = Vec::new();
    if !rec(graph, s, t, &mut on, &mut Vec::new(), &mut out, limit) {
        return Err(Error::GuardExceeded(format!("more than {limit} simple paths")));
    }
    Ok(out)
}

/// Exact optimum of the path LP (max Σ x_P, per-pair total ≤ 1, edge loads
/// ≤ c_e) over all simple paths, by revised simplex with Bland's rule.
pub fn exact_lp_small(graph: &MultiGraph, pairs: &[Demand]) -> Result<Q> {
    let mut columns: Vec<(usize, Vec<EdgeId>)> = Vec::new();
    for (h, d) in pairs.iter().enumerate() {
        if !graph.has_node(d.s) || !graph.has_node(d.t) || d.s == d.t {
            return Err(Error::invalid(format!("bad pair ({}, {})", d.s, d.t)));
        }
        let remaining = MAX_LP_PATHS - columns.len();
        let paths = simple_paths(graph, d.s, d.t, remaining)
            .map_err(|_| Error::GuardExceeded(format!("more than {MAX_LP_PATHS} simple paths in total")))?;
        columns.extend(paths.into_iter().map(|p| (h, p)));
    }
    // rows: one per pair, then one per edge used by some path
    let mut edge_row: BTreeMap<EdgeId, usize> = BTreeMap::new();
    for (_, p) in &columns {
        for &e in p {
            let next = pairs.len() + edge_row.len();
            edge_row.entry(e).or_insert(next);
        }
    }
    let rows = pairs.len() + edge_row.len();
    let mut rhs = vec![Q::one(); rows];
    for (&e, &r) in &edge_row {
        rhs[r] = qu(graph.cap(e));
    }
    let col_rows: Vec<Vec<usize>> = columns
        .iter()
        .map(|(h, p)| {
            let mut r = vec![*h];
            r.extend(p.iter().map(|e| edge_row[e]));
            r
        })
        .collect();
    Ok(simplex_packing(&col_rows, rhs))
}

/// max 1·x subject to A x ≤ b, x ≥ 0, where column j of A is the 0/1
/// indicator of `cols[j]` and b ≥ 0. Slack variable for row i has index
/// `cols.len() + i`.
fn simplex_packing(cols: &[Vec<usize>], b: Vec<Q>) -> Q {
    let m = b.len();
    let n = cols.len();
    let mut binv: Vec<Vec<Q>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect();
    let mut basis: Vec<usize> = (0..m).map(|i| n + i).collect();
    let mut xb = b;
    loop {
        // duals y = c_B^T B^-1
        let mut y = vec![Q::zero(); m];
        for (i, &bv) in basis.iter().enumerate() {
            if bv < n {
                for (yk, bk) in y.iter_mut().zip(&binv[i]) {
                    *yk += bk;
                }
            }
        }
        let entering = (0..n + m).find(|&j| {
            let reduced = if j < n {
                Q::one() - cols[j].iter().map(|&r| &y[r]).sum::<Q>()
            } else {
                -y[j - n].clone()
            };
            reduced.is_positive()
        });
        let Some(j) = entering else { break };
        // u = B^-1 a_j
        let u: Vec<Q> = (0..m)
            .map(|i| {
                if j < n {
                    cols[j].iter().map(|&r| &binv[i][r]).sum()
                } else {
                    binv[i][j - n].clone()
                }
            })
            .collect();
        let mut leave: Option<(usize, Q)> = None;
        for i in 0..m {
            if u[i].is_positive() {
                let ratio = &xb[i] / &u[i];
                let better = match &leave {
                    None => true,
                    Some((l, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, theta) = leave.expect("packing LP is bounded");
        for i in 0..m {
            if i != r && !u[i].is_zero() {
                let f = u[i].clone();
                xb[i] -= &f * &theta;
                let pivot_row = binv[r].clone();
                for (x, p) in binv[i].iter_mut().zip(&pivot_row) {
                    *x -= &f * p / &u[r];
                }
            }
        }
        let ur = u[r].clone();
        xb[r] = theta;
        for x in binv[r].iter_mut() {
            *x /= &ur;
        }
        basis[r] = j;
    }
    basis
        .iter()
        .zip(&xb)
        .filter(|(&bv, _)| bv < n)
        .map(|(_, x)| x)
        .sum()
}
