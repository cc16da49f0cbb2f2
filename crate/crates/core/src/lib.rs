//! Sampled maximum point-to-point dependence between regions of 3D ensemble
//! fields, and the focus+context chord-diagram geometry used to explore it.
//!
//! The crate is organised bottom-up:
//!
//! * [`ensemble`] loads or generates ensemble grids, partitions them into
//!   bricks and builds mean aggregates.
//! * [`estimators`] computes Pearson correlation and the Kraskov k-NN mutual
//!   information estimator, for single pairs and parallel batches.
//! * [`sampling`] estimates the maximum correlation between two bricks from a
//!   small number of samples (random, Halton, plastic or Bayesian optimal
//!   sampling) and benchmarks these strategies.
//! * [`layout`] turns estimates into chord diagrams, bundled edges, matrices
//!   and SVG documents.
//! * [`pipeline`] wires the pieces together for the CLI, the HTTP service and
//!   the browser demo.

pub mod ensemble;
pub mod estimators;
pub mod layout;
pub mod pipeline;
pub mod sampling;

mod par;

pub use ensemble::{Dims, EnsembleGrid, EnsembleStore, VariableMeta, VoxelRange};
pub use estimators::MeasureKind;
pub use layout::DiagramModel;
pub use sampling::{MaxEstimate, Strategy, StrategyConfig};
