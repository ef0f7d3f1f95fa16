//! Approximation algorithms for maximum edge-disjoint paths: an LP
//! relaxation solver and a recursive rounding procedure over tree
//! decompositions with degenerate leaves, plus exact oracles and instance
//! generators for checking it.

pub mod decomposition;
pub mod error;
pub mod exact;
pub mod flow;
pub mod generators;
pub mod graph;
pub mod instance;
pub mod rational;
pub mod pipeline;
pub mod reductions;
pub mod rounding;
pub mod routing;

pub use error::{Error, Result};
pub use graph::{EdgeId, MultiGraph, NodeId, View};
pub use instance::{Demand, Instance, MatchingInstance};
pub use rational::Q;
pub use routing::{FractionalRouting, IntegralRouting};
