//! Scene-graph ingestion, cleaning, rule-template thread generation,
//! logic-chain validation, splitting, and training-mix sampling.

mod chain;
mod generate;
mod mix;
mod scene_graph;
mod split;
mod stats;

pub use chain::{validate_logic_chain, ChainError, ChainLink, RelationshipChain, RuleCode, Violation};
pub use generate::{generate_gnd_threads, generate_ref_threads, TemplateError, TemplateSet};
pub use mix::{mix_groups, Group, MixError, MixStream, MixedItem};
pub use scene_graph::{
    clean_scene_graph, read_scene_graphs, read_scene_graphs_file, SceneGraph, SceneGraphError,
    SceneObject, SceneRelationship, DEFAULT_CLEAN_IOU,
};
pub use split::{split_dataset, Holdout, Split, SplitError};
pub use stats::{compute_statistics, Statistics, StatsRow};

/// Stable 64-bit FNV-1a, used to derive per-image seeds.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
