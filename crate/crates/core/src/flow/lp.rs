//! Approximate solver for the multicommodity-flow LP
//! max Σ z_h  s.t.  z_h ≤ 1, edge loads ≤ c_e,
//! using Garg–Könemann multiplicative length updates.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, MultiGraph, NodeId};
use crate::instance::MatchingInstance;
use crate::rational::{q, qu, Q};
use crate::routing::{FlowPath, FractionalRouting};

#[derive(Debug, Clone)]
pub struct LpStats {
    pub iterations: usize,
    /// Best dual upper bound seen (floating point).
    pub upper_bound: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, NodeId);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // min-heap on distance, then node id
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Dijkstra from `s`; among equal-length paths the predecessor edge with
/// the lowest id wins.
fn shortest_path(g: &MultiGraph, len: &[f64], s: NodeId, t: NodeId) -> Option<(f64, Vec<EdgeId>)> {
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<EdgeId>> = vec![None; n];
    let mut done = vec![false; n];
    dist[s] = 0.0;
    let mut heap = BinaryHeap::from([HeapItem(0.0, s)]);
    while let Some(HeapItem(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == t {
            break;
        }
        for &e in g.incident(u) {
            let v = g.edge(e).other(u);
            if done[v] {
                continue;
            }
            let nd = d + len[e];
            if nd < dist[v] || (nd == dist[v] && pred[v].is_some_and(|p| e < p)) {
                dist[v] = nd;
                pred[v] = Some(e);
                heap.push(HeapItem(nd, v));
            }
        }
    }
    if !done[t] {
        return None;
    }
    let mut path = Vec::new();
    let mut cur = t;
    while cur != s {
        let e = pred[cur]?;
        path.push(e);
        cur = g.edge(e).other(cur);
    }
    path.reverse();
    Some((dist[t], path))
}

/// Solves the LP to within a factor (1 - epsilon) of optimal.
pub fn solve_lp(inst: &MatchingInstance, epsilon: &Q) -> Result<FractionalRouting> {
    solve_lp_with_stats(inst, epsilon).map(|(r, _)| r)
}

pub fn solve_lp_with_stats(inst: &MatchingInstance, epsilon: &Q) -> Result<(FractionalRouting, LpStats)> {
    if !(epsilon > &Q::zero() && epsilon <= &q(1, 4)) {
        return Err(Error::invalid("epsilon must lie in (0, 1/4]"));
    }
    let eps = epsilon.to_f64().unwrap_or(0.25);
    let g = inst.graph();
    let m = g.edge_count();
    let k = inst.demand_count();
    if k == 0 {
        return Ok((
            FractionalRouting::default(),
            LpStats {
                iterations: 0,
                upper_bound: 0.0,
            },
        ));
    }

    // resources: graph edges, then one unit resource per demand
    let caps: Vec<f64> = g.edges().iter().map(|e| e.cap as f64).chain(std::iter::repeat(1.0).take(k)).collect();
    let r = caps.len();
    let step = eps / 3.0;
    // Lengths are kept relative to δ; `log_offset` records rescaling so
    // that the classical stopping rule D(l) ≥ 1 stays available.
    let log_inv_delta = ((1.0 + step) * r as f64).ln() / step - (1.0 + step).ln();
    let mut len: Vec<f64> = caps.iter().map(|c| 1.0 / c).collect();
    let mut log_offset = 0.0f64;

    let mut counts: BTreeMap<(usize, Vec<EdgeId>), u64> = BTreeMap::new();
    let mut load = vec![0u64; r];
    let mut routed = 0u64;
    let mut best_upper = f64::INFINITY;
    let mut iterations = 0usize;

    loop {
        // shortest augmenting path over all demands
        let mut best: Option<(f64, usize, Vec<EdgeId>)> = None;
        for h in 0..k {
            let d = inst.demand(h);
            if let Some((dl, path)) = shortest_path(g, &len[..m], d.s, d.t) {
                let total = dl + len[m + h];
                if best.as_ref().is_none_or(|b| total < b.0) {
                    best = Some((total, h, path));
                }
            }
        }
        let Some((alpha, h, path)) = best else { break };

        let dual: f64 = len.iter().zip(&caps).map(|(l, c)| l * c).sum::<f64>();
        best_upper = best_upper.min(dual / alpha);
        if routed > 0 {
            let overload = load
                .iter()
                .zip(&caps)
                .map(|(&l, &c)| l as f64 / c)
                .fold(0.0f64, f64::max);
            let primal = routed as f64 / overload;
            if primal >= (1.0 - 0.9 * eps) * best_upper {
                break;
            }
        }
        if dual.ln() + log_offset >= log_inv_delta {
            break;
        }

        // every resource on a path has capacity ≥ 1, so one unit fits
        for &e in &path {
            load[e] += 1;
            len[e] *= 1.0 + step / caps[e];
        }
        load[m + h] += 1;
        len[m + h] *= 1.0 + step;
        *counts.entry((h, path)).or_insert(0) += 1;
        routed += 1;
        iterations += 1;

        let max_len = len.iter().copied().fold(0.0f64, f64::max);
        if max_len > 1e200 {
            len.iter_mut().for_each(|l| *l *= 1e-200);
            log_offset += 200.0 * std::f64::consts::LN_10;
        }
    }

    // exact scaling by the largest overload makes the flow feasible
    let overload = load
        .iter()
        .zip(&caps)
        .map(|(&l, &c)| Q::new(BigInt::from(l), BigInt::from(c as u64)))
        .max()
        .unwrap_or_else(Q::zero);
    let mut paths = Vec::with_capacity(counts.len());
    if !overload.is_zero() {
        for ((h, edges), c) in counts {
            paths.push(FlowPath {
                demand: h,
                edges,
                value: qu(c) / &overload,
            });
        }
    }
    let routing = FractionalRouting::new(paths);
    routing.validate(inst).map_err(|e| Error::internal(format!("LP output infeasible: {e}")))?;
    Ok((
        routing,
        LpStats {
            iterations,
            upper_bound: best_upper,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{normalize_to_matching, Demand};
    use crate::rational::qi;

    #[test]
    fn single_demand_capped_at_one() {
        let g = MultiGraph::from_edges(2, [(0, 1, 5)]).unwrap();
        let n = normalize_to_matching(&g, &[Demand::new(0, 1)]).unwrap();
        let r = solve_lp(&n.instance, &q(1, 20)).unwrap();
        assert_eq!(r.value(), qi(1));
    }

    #[test]
    fn shared_bridge_near_one() {
        // 0,1 on the left of bridge 2-3, demands (0,3) and (1,3)
        let g = MultiGraph::from_edges(4, [(0, 2, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        let n = normalize_to_matching(&g, &[Demand::new(0, 3), Demand::new(1, 3)]).unwrap();
        let r = solve_lp(&n.instance, &q(1, 20)).unwrap();
        assert!(r.value() >= q(19, 20) && r.value() <= qi(1));
    }

    #[test]
    fn star_pairs_are_disjoint() {
        let g = MultiGraph::from_edges(5, (1..5).map(|i| (0, i, 1))).unwrap();
        let n = normalize_to_matching(&g, &[Demand::new(1, 2), Demand::new(3, 4)]).unwrap();
        let r = solve_lp(&n.instance, &q(1, 20)).unwrap();
        assert_eq!(r.value(), qi(2));
    }

    #[test]
    fn rejects_bad_epsilon_and_handles_empty() {
        let g = MultiGraph::from_edges(2, [(0, 1, 1)]).unwrap();
        let n = normalize_to_matching(&g, &[Demand::new(0, 1)]).unwrap();
        assert!(solve_lp(&n.instance, &q(1, 2)).is_err());
        assert!(solve_lp(&n.instance, &qi(0)).is_err());
        let e = normalize_to_matching(&g, &[]).unwrap();
        assert_eq!(solve_lp(&e.instance, &q(1, 10)).unwrap().value(), qi(0));
    }
}
