//! Diagram geometry: z-order placement, octree chord trees, bundled edges,
//! context/focus chord layouts, matrices and SVG export.

pub mod bspline;
mod diagram;
mod matrix;
mod octree;
mod svg;
pub mod zorder;

pub use bspline::{clamped_knots, de_boor, sample_bspline};
pub use diagram::{
    build_context_diagram, build_focus_diagram, bundle_edge, color_for, rank_key, BundledEdge, DiagramEdge, DiagramMode,
    DiagramModel, DiagramNode, DiagramParams, EdgeInput, EdgeStatus, Filters, NodeInput, Selection, Side,
};
pub use matrix::{build_matrix, MatrixCell, MatrixModel};
pub use octree::{build_octree, ChordTree, TreeNode};
pub use svg::{export_svg, Palette};
pub use zorder::{zorder_index, ZOrderMap};

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LayoutError {
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("self edges are drawn as node highlights, not chords")]
    SelfEdge,
    #[error("viewport size must be positive")]
    ZeroViewport,
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
}

/// Screen position of polar (angle, radius): 12 o'clock at angle 0,
/// clockwise, y pointing down.
pub fn polar_to_xy(angle: f64, radius: f64) -> [f64; 2] {
    [radius * angle.sin(), -radius * angle.cos()]
}
