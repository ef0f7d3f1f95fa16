use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::decomposition::{
    classify_shape, contract_to_degenerate, flush_filter, restrict_with_origin, validate_on, Shape, TreeDecomposition,
};
use crate::error::{Error, Result};
use crate::flow::{centralize_cut, route_supplies_or_cut, CutCertificate, SupplyOutcome};
use crate::graph::{NodeId, View};
use crate::instance::MatchingInstance;
use crate::rational::{floor_int, format_q, q, qi, qu, serde_q, serde_q_opt, Q};
use crate::routing::{marginals_of, FractionalRouting, IntegralRouting};
use crate::rounding::base::base_case_with_report;
use crate::rounding::oracle::OracleProfile;
use crate::rounding::router::{path_nodes, reroute_to_set};
use crate::rounding::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    /// No flow left.
    Empty,
    /// G[W] is disconnected; one child per component.
    Split,
    Single,
    Pair,
    Star,
    /// No tree edge with a separator of size k; same input at k - 1.
    LowerK,
    /// Supplies x/6 reach the separator; rerouted into it.
    Reroute,
    /// Supplies x/6 blocked by a cut U.
    Cut,
}

/// One recursion node. Values are fractional flow values at that node.
#[derive(Debug, Clone, Serialize)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub step: Step,
    pub mode: Mode,
    pub k: usize,
    pub p: usize,
    /// Value factor used in γ: the oracle's α in generic mode, 12(p+1) in
    /// treewidth mode.
    #[serde(with = "serde_q")]
    pub alpha: Q,
    /// Congestion of the base-case router.
    #[serde(with = "serde_q")]
    pub beta: Q,
    pub nodes: usize,
    #[serde(with = "serde_q")]
    pub input: Q,
    #[serde(with = "serde_q")]
    pub dropped_cut: Q,
    #[serde(with = "serde_q")]
    pub dropped_flush: Q,
    #[serde(with = "serde_q_opt")]
    pub cut_capacity: Option<Q>,
    #[serde(with = "serde_q_opt")]
    pub f_u: Option<Q>,
    #[serde(with = "serde_q_opt")]
    pub f_ubar: Option<Q>,
    #[serde(with = "serde_q_opt")]
    pub f_u_prime: Option<Q>,
    pub arm: Option<u8>,
    pub restarts: usize,
    pub routed: usize,
    #[serde(with = "serde_q")]
    pub gamma: Q,
    /// Floor promised by the step itself (base case or reroute bound).
    #[serde(with = "serde_q_opt")]
    pub local_floor: Option<Q>,
    pub satisfied: bool,
    pub local_ok: Option<bool>,
    /// 2·c(U) <= val(f_U), checked when arm 1 is taken.
    pub charging: Option<bool>,
    /// 3·val(f'_U) + val(f_Ū) >= input, checked when arm 1 is taken.
    pub chain: Option<bool>,
    /// Input = kept + crossing + flush drops, and crossing <= c(U).
    pub conservation: Option<bool>,
}

impl NodeRecord {
    /// Every check recorded at this node holds.
    pub fn holds(&self) -> bool {
        self.satisfied
            && self.local_ok != Some(false)
            && self.charging != Some(false)
            && self.chain != Some(false)
            && self.conservation != Some(false)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
#[serde(transparent)]
pub struct GuaranteeLedger {
    pub records: Vec<NodeRecord>,
}

impl GuaranteeLedger {
    pub fn all_hold(&self) -> bool {
        self.records.iter().all(NodeRecord::holds)
    }

    pub fn violations(&self) -> Vec<&NodeRecord> {
        self.records.iter().filter(|r| !r.holds()).collect()
    }

    pub fn root(&self) -> Option<&NodeRecord> {
        self.records.first()
    }

    /// Appends another ledger, shifting its ids past ours.
    pub fn absorb(&mut self, other: GuaranteeLedger) {
        let shift = self.records.len();
        for mut r in other.records {
            r.id += shift;
            r.parent = r.parent.map(|x| x + shift);
            self.records.push(r);
        }
    }
}

pub enum DegenerateOutcome {
    /// Arm 1: the (k-1, p)-decomposition and the flow kept by flushing.
    Contracted {
        decomp: TreeDecomposition,
        routing: FractionalRouting,
        dropped: Q,
    },
    /// Arm 2: pairs routed inside the new leaves.
    Routed(IntegralRouting),
    /// A new leaf could not send x(v)/6 to its separator; the violated
    /// component of the cut, strictly inside U.
    Restart(CutCertificate),
}

fn empty() -> IntegralRouting {
    IntegralRouting {
        paths: Vec::new(),
        bound: Some(qi(2)),
    }
}

fn inside(inst: &MatchingInstance, f: &FractionalRouting, nodes: &BTreeSet<NodeId>) -> FractionalRouting {
    FractionalRouting::new(
        f.paths
            .iter()
            .filter(|p| path_nodes(inst, p.demand, &p.edges).iter().all(|v| nodes.contains(v)))
            .cloned()
            .collect(),
    )
}

fn positive_marginals(inst: &MatchingInstance, f: &FractionalRouting) -> BTreeMap<NodeId, Q> {
    marginals_of(f, inst).into_iter().filter(|(_, x)| x > &Q::zero()).collect()
}

/// Contracts the size-k separators of `decomp_u` into new degenerate
/// leaves. If flushing keeps at least half of `f_u`, returns the new
/// decomposition and the kept flow. Otherwise routes the dropped flow
/// inside each new leaf L by rerouting into S_L, after checking that its
/// terminals can send x(v)/6 to S_L within G[L] minus the S_L edges.
pub fn degenerate_or_route(
    inst: &MatchingInstance,
    u: &BTreeSet<NodeId>,
    f_u: &FractionalRouting,
    decomp_u: &TreeDecomposition,
    k: usize,
) -> Result<DegenerateOutcome> {
    let g = inst.graph();
    let (dc, leaves) = contract_to_degenerate(decomp_u, k)?;
    let (kept, dropped) = flush_filter(f_u, &dc, g, inst.demands());
    if qi(2) * kept.value() >= f_u.value() {
        return Ok(DegenerateOutcome::Contracted {
            decomp: dc,
            routing: kept,
            dropped,
        });
    }
    let mut out = empty();
    for leaf in &leaves {
        if !leaf.nodes.is_subset(u) {
            return Err(Error::invalid("new leaf leaves U"));
        }
        let interior: BTreeSet<NodeId> = leaf.nodes.difference(&leaf.separator).copied().collect();
        let fl = FractionalRouting::new(
            f_u.paths
                .iter()
                .filter(|p| {
                    let d = inst.demand(p.demand);
                    let nodes = path_nodes(inst, p.demand, &p.edges);
                    (interior.contains(&d.s) || interior.contains(&d.t))
                        && nodes.iter().all(|v| !leaf.separator.contains(v))
                })
                .cloned()
                .collect(),
        );
        if fl.value().is_zero() {
            continue;
        }
        let mut gl = View::induced(g, &leaf.nodes);
        for e in gl.edges().collect::<Vec<_>>() {
            let ed = g.edge(e);
            if leaf.separator.contains(&ed.u) && leaf.separator.contains(&ed.v) {
                gl.remove_edge(e);
            }
        }
        let x = positive_marginals(inst, &fl);
        let sixth = q(1, 6);
        match route_supplies_or_cut(&gl, &x, &leaf.separator, &sixth)? {
            SupplyOutcome::Feasible(flow) => {
                out.paths
                    .extend(reroute_to_set(inst, &fl, &flow, &qi(6), &leaf.separator)?.paths);
            }
            SupplyOutcome::Cut(cut) => {
                let scaled: BTreeMap<NodeId, Q> = x.iter().map(|(&v, a)| (v, a * &sixth)).collect();
                let mut comps = centralize_cut(&gl, &cut.nodes, &scaled)?;
                return Ok(DegenerateOutcome::Restart(comps.swap_remove(0)));
            }
        }
    }
    out.paths.sort_by_key(|p| p.demand);
    Ok(DegenerateOutcome::Routed(out))
}

struct Ctx<'a> {
    inst: &'a MatchingInstance,
    p: usize,
    oracle: &'a OracleProfile,
    mode: Mode,
    alpha: Q,
    beta: Q,
    records: Vec<NodeRecord>,
}

impl Ctx<'_> {
    fn gamma(&self, val: &Q, k: usize) -> Q {
        let p = qu(self.p.max(1) as u64);
        val / (qi(216) * &self.alpha * &p * &p * qi(3).pow(k as i32))
    }

    fn solve(
        &mut self,
        parent: Option<usize>,
        w: &BTreeSet<NodeId>,
        f: FractionalRouting,
        d: TreeDecomposition,
        k: usize,
    ) -> Result<IntegralRouting> {
        let val = f.value();
        let id = self.records.len();
        self.records.push(NodeRecord {
            id,
            parent,
            step: Step::Empty,
            mode: self.mode,
            k,
            p: self.p,
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            nodes: w.len(),
            gamma: self.gamma(&val, k),
            input: val,
            dropped_cut: Q::zero(),
            dropped_flush: Q::zero(),
            cut_capacity: None,
            f_u: None,
            f_ubar: None,
            f_u_prime: None,
            arm: None,
            restarts: 0,
            routed: 0,
            local_floor: None,
            satisfied: true,
            local_ok: None,
            charging: None,
            chain: None,
            conservation: None,
        });
        let out = self.step(id, w, f, d, k)?;
        let r = &mut self.records[id];
        r.routed = out.routed();
        let routed = qu(out.routed() as u64);
        r.satisfied = routed >= Q::from_integer(floor_int(&r.gamma));
        r.local_ok = r.local_floor.as_ref().map(|fl| &routed >= fl);
        Ok(out)
    }

    fn step(
        &mut self,
        id: usize,
        w: &BTreeSet<NodeId>,
        f: FractionalRouting,
        mut d: TreeDecomposition,
        k: usize,
    ) -> Result<IntegralRouting> {
        let inst = self.inst;
        let g = inst.graph();
        let val = f.value();
        if val.is_zero() {
            return Ok(empty());
        }
        d.k = k;
        let view = View::induced(g, w);
        let comps = view.components();
        if comps.len() > 1 {
            self.records[id].step = Step::Split;
            let mut out = empty();
            let mut kept = Q::zero();
            for c in comps {
                let (dc, _) = restrict_with_origin(&d, &view, &c, None)?;
                let (fc, dropped) = flush_filter(&inside(inst, &f, &c), &dc, g, inst.demands());
                self.records[id].dropped_flush += dropped;
                kept += fc.value();
                out.paths.extend(self.solve(Some(id), &c, fc, dc, k)?.paths);
            }
            let r = &mut self.records[id];
            r.conservation = Some(kept + &r.dropped_flush == val);
            return Ok(out);
        }
        match classify_shape(&d).shape {
            Shape::SingleGraph { .. } | Shape::DegeneratePair { .. } | Shape::DegenerateStar { .. } => {
                let (out, rep) = base_case_with_report(inst, &f, &d, self.p, self.oracle, self.mode)?;
                let r = &mut self.records[id];
                r.step = rep.step;
                r.local_floor = Some(rep.local_floor);
                return Ok(out);
            }
            _ => {}
        }
        let Some(e) = (0..d.tree_edges.len()).find(|&e| !d.touches_degenerate(e) && d.separator(e).len() == k) else {
            if k == 0 {
                return Err(Error::internal("connected graph with k = 0 is not a base shape"));
            }
            self.records[id].step = Step::LowerK;
            return self.solve(Some(id), w, f, d, k - 1);
        };
        let ve = d.separator(e);
        let x = positive_marginals(inst, &f);
        let sixth = q(1, 6);
        match route_supplies_or_cut(&view, &x, &ve, &sixth)? {
            SupplyOutcome::Feasible(flow) => {
                let r = &mut self.records[id];
                r.step = Step::Reroute;
                r.local_floor = Some(Q::from_integer(floor_int(&(&val / qi(216 * k as i64)))));
                reroute_to_set(inst, &f, &flow, &qi(6), &ve)
            }
            SupplyOutcome::Cut(cut) => {
                self.records[id].step = Step::Cut;
                let scaled: BTreeMap<NodeId, Q> = x.iter().map(|(&v, a)| (v, a * &sixth)).collect();
                let u = centralize_cut(&view, &cut.nodes, &scaled)?.swap_remove(0).nodes;
                let anchor = d.tree_edges[e].0;
                self.cut_step(id, w, &view, f, d, k, anchor, u)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn cut_step(
        &mut self,
        id: usize,
        w: &BTreeSet<NodeId>,
        view: &View<'_>,
        f: FractionalRouting,
        d: TreeDecomposition,
        k: usize,
        anchor: usize,
        mut u: BTreeSet<NodeId>,
    ) -> Result<IntegralRouting> {
        let inst = self.inst;
        let g = inst.graph();
        let val = f.value();
        loop {
            let mut fu = Vec::new();
            let mut fub = Vec::new();
            let mut crossing = Q::zero();
            for p in &f.paths {
                let nodes = path_nodes(inst, p.demand, &p.edges);
                let ins = nodes.iter().filter(|v| u.contains(v)).count();
                if ins == nodes.len() {
                    fu.push(p.clone());
                } else if ins == 0 {
                    fub.push(p.clone());
                } else {
                    crossing += &p.value;
                }
            }
            let cap_u: Q = view
                .edges()
                .filter(|&e| u.contains(&g.edge(e).u) != u.contains(&g.edge(e).v))
                .map(|e| qu(g.cap(e)))
                .sum();
            let (mut du, _) = restrict_with_origin(&d, view, &u, Some(anchor))?;
            du.k = k;
            let (fu, drop_u) = flush_filter(&FractionalRouting::new(fu), &du, g, inst.demands());
            let outcome = degenerate_or_route(inst, &u, &fu, &du, k)?;
            if let DegenerateOutcome::Restart(c) = outcome {
                if c.nodes.len() >= u.len() {
                    return Err(Error::internal("restart cut does not shrink U"));
                }
                self.records[id].restarts += 1;
                u = c.nodes;
                continue;
            }
            let fub = FractionalRouting::new(fub);
            let val_u = fu.value();
            let val_ub = fub.value();
            {
                let r = &mut self.records[id];
                r.dropped_cut = crossing.clone();
                r.dropped_flush += drop_u;
                r.cut_capacity = Some(cap_u.clone());
                r.f_u = Some(val_u.clone());
                r.f_ubar = Some(val_ub.clone());
            }
            let mut out = match outcome {
                DegenerateOutcome::Contracted { decomp, routing, .. } => {
                    let vp = routing.value();
                    let r = &mut self.records[id];
                    r.arm = Some(1);
                    r.f_u_prime = Some(vp.clone());
                    r.charging = Some(qi(2) * &cap_u <= val_u);
                    r.chain = Some(qi(3) * &vp + &val_ub >= val);
                    self.solve(Some(id), &u, routing, decomp, k - 1)?
                }
                DegenerateOutcome::Routed(routed) => {
                    let r = &mut self.records[id];
                    r.arm = Some(2);
                    r.local_floor = Some(Q::from_integer(floor_int(&(&val_u / qi(432 * k as i64)))));
                    routed
                }
                DegenerateOutcome::Restart(_) => unreachable!(),
            };
            let rest: BTreeSet<NodeId> = w.difference(&u).copied().collect();
            let mut kept_ub = Q::zero();
            if !rest.is_empty() {
                for c in View::induced(g, &rest).components() {
                    let (dc, _) = restrict_with_origin(&d, view, &c, None)?;
                    let (fc, dropped) = flush_filter(&inside(inst, &fub, &c), &dc, g, inst.demands());
                    self.records[id].dropped_flush += dropped;
                    kept_ub += fc.value();
                    out.paths.extend(self.solve(Some(id), &c, fc, dc, k)?.paths);
                }
            }
            let r = &mut self.records[id];
            r.conservation =
                Some(val_u + kept_ub + &r.dropped_flush + &crossing == val && crossing <= cap_u);
            out.paths.sort_by_key(|p| p.demand);
            return Ok(out);
        }
    }
}

/// Rounds a flush fractional routing on a (k, p)-degenerate decomposition
/// to an integral routing. Every recursion node is recorded in the ledger
/// with its claimed bound γ = val / (216·α·p²·3^k).
///
/// Congestion is at most 2 in treewidth mode and β + 3 in generic mode.
pub fn ksum_round(
    inst: &MatchingInstance,
    routing: &FractionalRouting,
    decomp: &TreeDecomposition,
    k: usize,
    p: usize,
    oracle: &OracleProfile,
    mode: Mode,
) -> Result<(IntegralRouting, GuaranteeLedger)> {
    if k > p {
        return Err(Error::invalid(format!("k = {k} exceeds p = {p}")));
    }
    let g = inst.graph();
    let mut d = decomp.clone();
    d.k = k;
    d.p = p;
    let w = d.node_set();
    validate_on(&d, &View::induced(g, &w), None).into_result()?;
    routing.validate(inst)?;
    if routing
        .paths
        .iter()
        .any(|fp| !path_nodes(inst, fp.demand, &fp.edges).iter().all(|v| w.contains(v)))
    {
        return Err(Error::invalid("a flow path leaves the decomposed subgraph"));
    }
    let (_, dropped) = flush_filter(routing, &d, g, inst.demands());
    if !dropped.is_zero() {
        return Err(Error::invalid(format!(
            "routing is not flush: {} of its value avoids a leaf separator",
            format_q(&dropped)
        )));
    }
    let (alpha, beta, bound) = match mode {
        Mode::Treewidth => (qi(12) * qu(p as u64 + 1), qi(2), qi(2)),
        Mode::Generic => (
            oracle.alpha.clone(),
            oracle.beta.clone(),
            (&oracle.beta + qi(3)).max(qi(2)),
        ),
    };
    let mut ctx = Ctx {
        inst,
        p,
        oracle,
        mode,
        alpha,
        beta,
        records: Vec::new(),
    };
    let result = ctx.solve(None, &w, routing.clone(), d, k);
    let ledger = GuaranteeLedger { records: ctx.records };
    let mut out = match result {
        Ok(out) => out,
        Err(Error::Guarantee(msg)) => {
            let dump = serde_json::to_string(&ledger).unwrap_or_default();
            return Err(Error::Guarantee(format!("{msg}; ledger so far: {dump}")));
        }
        Err(e) => return Err(e),
    };
    out.validate_on(g, inst.demands(), Some(&bound))?;
    out.bound = Some(bound);
    debug_assert!(ledger.records.iter().all(|r| r.input <= routing.value() || r.input.is_one()));
    Ok((out, ledger))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MultiGraph;
    use crate::instance::Demand;
    use crate::rounding::default_small_graph_oracle;
    use crate::routing::FlowPath;

    fn set(xs: &[NodeId]) -> BTreeSet<NodeId> {
        xs.iter().copied().collect()
    }

    /// Path 0-1-2-3 with leaves 4 on 0 and 5 on 3; bags {0,1},{1,2},{2,3}
    /// plus leaf bags.
    fn path_instance() -> (MatchingInstance, FractionalRouting, TreeDecomposition) {
        let g = MultiGraph::from_edges(6, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (4, 0, 1), (5, 3, 1)]).unwrap();
        let inst = MatchingInstance::new(g, vec![Demand::new(4, 5)]).unwrap();
        let f = FractionalRouting::new(vec![FlowPath {
            demand: 0,
            edges: vec![3, 0, 1, 2, 4],
            value: qi(1),
        }]);
        let d = TreeDecomposition::new(
            vec![
                (set(&[0, 1]), false),
                (set(&[1, 2]), false),
                (set(&[2, 3]), false),
                (set(&[0, 4]), false),
                (set(&[3, 5]), false),
            ],
            vec![(0, 1), (1, 2), (0, 3), (2, 4)],
            0,
            1,
            1,
        );
        (inst, f, d)
    }

    #[test]
    fn path_routes_its_pair() {
        let (inst, f, d) = path_instance();
        let oracle = default_small_graph_oracle(2).unwrap();
        for mode in [Mode::Treewidth, Mode::Generic] {
            let (r, ledger) = ksum_round(&inst, &f, &d, 1, 1, &oracle, mode).unwrap();
            assert!(ledger.all_hold(), "{:?}", ledger.violations());
            assert!(r.routed() <= 1);
            assert_eq!(ledger.root().unwrap().input, qi(1));
        }
    }

    #[test]
    fn zero_flow_is_empty() {
        let (inst, _, d) = path_instance();
        let oracle = default_small_graph_oracle(2).unwrap();
        let (r, ledger) = ksum_round(&inst, &FractionalRouting::default(), &d, 1, 1, &oracle, Mode::Treewidth).unwrap();
        assert_eq!(r.routed(), 0);
        assert_eq!(ledger.records.len(), 1);
        assert_eq!(ledger.records[0].step, Step::Empty);
    }

    #[test]
    fn k_above_p_is_rejected() {
        let (inst, f, d) = path_instance();
        let oracle = default_small_graph_oracle(2).unwrap();
        assert!(ksum_round(&inst, &f, &d, 2, 1, &oracle, Mode::Treewidth).is_err());
    }

    #[test]
    fn no_size_k_separator_takes_arm_one() {
        let (inst, f, d) = path_instance();
        let u = set(&[0, 1, 2, 3, 4, 5]);
        let mut d2 = d.clone();
        d2.k = 2;
        match degenerate_or_route(&inst, &u, &f, &d2, 2).unwrap() {
            DegenerateOutcome::Contracted { routing, dropped, .. } => {
                assert_eq!(routing, f);
                assert!(dropped.is_zero());
            }
            _ => panic!("expected arm 1"),
        }
    }
}
