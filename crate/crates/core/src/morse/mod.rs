//! Recurrent components, the Morse graph, order retractions, basins, and the
//! lattice of forward-reachable regions.

mod bitset;
mod graph;
mod lattice;
mod pipeline;
mod retraction;
mod scc;

pub use bitset::BitSet;
pub use graph::{covering_pairs, Condensation, MorseGraph, MorseNode};
pub use lattice::{
    birkhoff_correspondence, forward_closure, is_forward_invariant, join_irreducibles,
    posets_isomorphic, reachable_region, JoinIrreducibles, RegionLattice, DEFAULT_LATTICE_CAP,
};
pub use pipeline::{adaptive_morse_pipeline, LevelSummary, PipelineOptions, PipelineResult, RefineRule};
pub use retraction::{
    basin_cells, basins, is_order_retraction, order_retraction, CellLabel, Retraction, Role,
};
pub use scc::tarjan as strongly_connected_components;
