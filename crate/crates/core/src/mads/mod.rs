//! Mesh adaptive direct search with block evaluation of candidates.

pub mod directions;
pub mod engine;
pub mod executor;
pub mod incumbents;
pub mod mesh;

pub use engine::{Block, Candidate, Mads, MadsConfig, Phase, ScaledProblem, SearchKind, SearchRecord};
pub use executor::{evaluate_block, Executor};
pub use incumbents::Incumbents;
pub use mesh::{IterationOutcome, MeshState, Scaling, MIN_MESH_SIZE};
