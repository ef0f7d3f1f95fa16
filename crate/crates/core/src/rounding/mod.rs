//! Integral routing: the single-node router, rerouting into a small node
//! set, base cases, and the recursion over (k, p)-degenerate
//! decompositions.

mod base;
mod ksum;
mod oracle;
mod router;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use base::{base_case, BaseReport};
pub use ksum::{degenerate_or_route, ksum_round, DegenerateOutcome, GuaranteeLedger, NodeRecord, Step};
pub use oracle::{default_small_graph_oracle, OracleFn, OracleProfile};
pub use router::{reroute_to_set, route_through_best, route_through_node, through_flow};

/// Treewidth mode routes base cases through one node of a small bag;
/// generic mode hands them to the oracle after moving terminals and
/// sparsifying the leaf graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Treewidth,
    Generic,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "treewidth" => Ok(Mode::Treewidth),
            "generic" => Ok(Mode::Generic),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}
