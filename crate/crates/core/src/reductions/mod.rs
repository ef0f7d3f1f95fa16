//! Moving terminals onto pendant hubs, and integer sparsifiers built by
//! splitting off, each with a transform back to the original graph.

mod clusters;
mod moving;
mod sparsifier;

pub use clusters::{cluster_paths, cluster_terminals, Cluster};
pub use moving::{
    lift_routing, marginal_mass, move_terminals, move_terminals_within, restrict_to_hub_capacity, TransformRecord,
};
pub use sparsifier::{
    build_sparsifier, embed_routing, eulerianize, pairwise_connectivity, split_off, Eulerian, SparseEdge, Sparsifier,
};
