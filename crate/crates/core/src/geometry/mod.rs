//! Polytopic workspace geometry.
//!
//! Sets are kept in half-space form `{x : p_j · x + g_j >= 0}`. Vertex enumeration is
//! brute force over n-subsets of facet planes, which limits vertex-based operations
//! (representative points, volumes, adjacency) to dimension three or lower.

mod lp;
mod partition;
mod polytope;

pub use partition::{facet_distance, AxisCut, Facet, Partition, Region, VOLUME_REL_TOL};
pub use polytope::{affine_dimension, HPolytope, Hyperplane, ValidationReport};

use thiserror::Error;

/// Feasibility tolerance for vertex and membership tests.
pub const FEAS_TOL: f64 = 1e-9;
/// Vertices closer than this (max-norm) are merged.
pub const DEDUP_TOL: f64 = 1e-7;
/// Singular values above this count toward the affine dimension of a face.
pub const ADJACENCY_SV_TOL: f64 = 1e-8;
pub const MAX_VERTEX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("vertex enumeration supports dimension at most 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("polytope is not full-dimensional (Chebyshev radius {0:e})")]
    Degenerate(f64),
    #[error("no vertices found")]
    NoVertices,
    #[error("cut x[{axis}] = {value} does not lie strictly inside the workspace")]
    CutOutside { axis: usize, value: f64 },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("linear program failed: {0}")]
    Lp(String),
}
