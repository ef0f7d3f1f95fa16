//! Max-flow, supply routing with cut certificates, and the LP solver.

mod lp;
pub mod maxflow;
mod network;

pub use lp::{solve_lp, solve_lp_with_stats, LpStats};
pub use maxflow::{decompose, Dinic, FlowArc};
pub use network::{
    centralize_cut, decompose_flow, edge_connectivity, route_supplies_or_cut, CutCertificate, FlowNetwork, MaxFlow,
    SupplyFlow, SupplyOutcome, SupplyPath,
};
