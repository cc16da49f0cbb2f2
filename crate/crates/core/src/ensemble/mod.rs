//! Ensemble storage: raw grids, the binary file format, the synthetic
//! generator, brick partitions and mean aggregates.
//!
//! Everything here is immutable once built, so a single [`EnsembleStore`] can
//! be shared by any number of worker threads.

mod grid;
mod io;
mod meantree;
mod partition;
mod store;
mod synth;

pub use grid::{Dims, EnsembleGrid, VariableMeta};
pub use io::{load_ensemble, read_ensemble, save_ensemble, write_ensemble, FORMAT_MAGIC, FORMAT_VERSION};
pub use meantree::{build_mean_tree, MeanLevel, MeanTree};
pub use partition::{
    partition_by_edge, partition_grid, refine_brick, BrickHierarchy, BrickPartition, HierarchyNode,
    Refinement, VoxelRange,
};
pub use store::{EnsembleStore, LevelView};
pub use synth::{gen_synthetic, ClusterSpec, SyntheticSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("size mismatch: header declares {expected} values but payload holds {actual}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error(
        "non-finite value {value} at byte offset {offset} (variable {variable}, member {member}, voxel {voxel}) and no missing-value sentinel declared"
    )]
    NonFinite { offset: u64, variable: usize, member: usize, voxel: usize, value: f32 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("synthetic spec parse error at line {line}: {message}")]
    SpecParse { line: usize, message: String },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("index {index:?} out of range for level {level} with dims {dims:?}")]
    OutOfRange { level: usize, index: [usize; 3], dims: [usize; 3] },
    #[error("level {level} beyond mean-tree depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("missing data at level {level}, index {index:?}")]
    Missing { level: usize, index: [usize; 3] },
    #[error("brick is a single voxel; finest level reached")]
    FinestLevel,
}
