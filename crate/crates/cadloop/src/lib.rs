//! File formats, the remote editor, external tools, on-disk corpora and
//! datasets, and the `cadloop` command line, on top of `cadloop-core`.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod external;
pub mod formats;
pub mod meshio;
pub mod remote;

/// Per-target seed component derived from a target id.
pub fn id_seed(id: &str) -> u64 {
    cadloop_core::rollout::id_hash(id)
}
