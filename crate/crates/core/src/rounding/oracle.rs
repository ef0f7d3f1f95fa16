use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::instance::MatchingInstance;
use crate::rational::{format_q, qi, qu, Q};
use crate::routing::{FractionalRouting, IntegralRouting, RoutedPath};
use crate::rounding::router::{path_nodes, route_through_best};

pub type OracleFn = dyn Fn(&MatchingInstance, &FractionalRouting) -> Result<IntegralRouting> + Send + Sync;

/// An (α, β)-oracle for the base graph class: routes at least val/α pairs
/// with congestion at most β. [`OracleProfile::call`] checks both on every
/// call.
#[derive(Clone)]
pub struct OracleProfile {
    pub id: String,
    pub alpha: Q,
    pub beta: Q,
    route: Arc<OracleFn>,
}

impl fmt::Debug for OracleProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OracleProfile")
            .field("id", &self.id)
            .field("alpha", &format_q(&self.alpha))
            .field("beta", &format_q(&self.beta))
            .finish()
    }
}

impl OracleProfile {
    pub fn new(
        id: impl Into<String>,
        alpha: Q,
        beta: Q,
        route: impl Fn(&MatchingInstance, &FractionalRouting) -> Result<IntegralRouting> + Send + Sync + 'static,
    ) -> Self {
        OracleProfile {
            id: id.into(),
            alpha,
            beta,
            route: Arc::new(route),
        }
    }

    pub fn call(&self, inst: &MatchingInstance, routing: &FractionalRouting) -> Result<IntegralRouting> {
        let mut out = (self.route)(inst, routing)?;
        out.validate_on(inst.graph(), inst.demands(), Some(&self.beta))
            .map_err(|e| Error::Guarantee(format!("oracle {} returned a bad routing: {e}", self.id)))?;
        let val = routing.value();
        if qu(out.routed() as u64) * &self.alpha < val {
            return Err(Error::Guarantee(format!(
                "oracle {} routed {} pairs on fractional value {} (alpha {}); {} nodes, {} edges, {} demands",
                self.id,
                out.routed(),
                format_q(&val),
                format_q(&self.alpha),
                inst.graph().node_count(),
                inst.graph().edge_count(),
                inst.demand_count()
            )));
        }
        out.bound = Some(self.beta.clone());
        Ok(out)
    }
}

/// Oracle for graphs with at most `q` non-terminal nodes. Flow paths that
/// are a single terminal-terminal edge are routed directly; the rest go
/// through the non-terminal node carrying the most flow, which carries at
/// least 1/q of it. Declared α = 12q, β = 2.
pub fn default_small_graph_oracle(q: usize) -> Result<OracleProfile> {
    if q == 0 {
        return Err(Error::invalid("small-graph oracle needs q >= 1"));
    }
    let route = move |inst: &MatchingInstance, routing: &FractionalRouting| -> Result<IntegralRouting> {
        let g = inst.graph();
        let core: BTreeSet<_> = (0..g.node_count()).filter(|&v| !inst.is_terminal(v)).collect();
        if core.len() > q {
            return Err(Error::invalid(format!(
                "small-graph oracle takes at most {q} non-terminal nodes, got {}",
                core.len()
            )));
        }
        let mut direct = Vec::new();
        let mut rest = Vec::new();
        let mut done = BTreeSet::new();
        for p in &routing.paths {
            if path_nodes(inst, p.demand, &p.edges).iter().any(|v| core.contains(v)) {
                rest.push(p.clone());
            } else if done.insert(p.demand) {
                direct.push(RoutedPath {
                    demand: p.demand,
                    edges: p.edges.clone(),
                });
            }
        }
        let (mut out, _) = route_through_best(inst, &FractionalRouting::new(rest), &core)?;
        out.paths.extend(direct);
        out.paths.sort_by_key(|p| p.demand);
        Ok(out)
    };
    Ok(OracleProfile::new(format!("small:{q}"), qi(12) * qu(q as u64), qi(2), route))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MultiGraph;
    use crate::instance::Demand;
    use crate::routing::FlowPath;

    #[test]
    fn triangle_one_demand() {
        // triangle 0,1,2 with leaves 3 on 0 and 4 on 1
        let g = MultiGraph::from_edges(5, [(0, 1, 1), (1, 2, 1), (0, 2, 1), (3, 0, 1), (4, 1, 1)]).unwrap();
        let inst = MatchingInstance::new(g, vec![Demand::new(3, 4)]).unwrap();
        let f = FractionalRouting::new(vec![
            FlowPath { demand: 0, edges: vec![3, 0, 4], value: crate::rational::q(1, 2) },
            FlowPath { demand: 0, edges: vec![3, 2, 1, 4], value: crate::rational::q(1, 2) },
        ]);
        let oracle = default_small_graph_oracle(3).unwrap();
        let r = oracle.call(&inst, &f).unwrap();
        assert_eq!(r.routed(), 1);
        assert_eq!(oracle.alpha, qi(36));
    }

    #[test]
    fn too_many_core_nodes() {
        let g = MultiGraph::from_edges(5, [(0, 1, 1), (1, 2, 1), (3, 0, 1), (4, 2, 1)]).unwrap();
        let inst = MatchingInstance::new(g, vec![Demand::new(3, 4)]).unwrap();
        let oracle = default_small_graph_oracle(2).unwrap();
        assert!(matches!(
            oracle.call(&inst, &FractionalRouting::default()),
            Err(Error::InvalidInput(_))
        ));
        assert!(default_small_graph_oracle(0).is_err());
    }

    #[test]
    fn broken_oracle_is_caught() {
        let g = MultiGraph::from_edges(4, [(0, 1, 1), (2, 0, 1), (3, 1, 1)]).unwrap();
        let inst = MatchingInstance::new(g, vec![Demand::new(2, 3)]).unwrap();
        let f = FractionalRouting::new(vec![FlowPath { demand: 0, edges: vec![1, 0, 2], value: qi(1) }]);
        let lazy = OracleProfile::new("lazy", qi(1), qi(1), |_, _| Ok(IntegralRouting::default()));
        assert!(matches!(lazy.call(&inst, &f), Err(Error::Guarantee(_))));
    }
}
