use thiserror::Error;

use crate::quadrature::QuadratureError;

/// Errors raised while loading or validating a Delzant polytope.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("failed to parse polytope document: {0}")]
    Parse(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("polytope must have positive dimension and at least dim+1 facets")]
    TooFewFacets,
    #[error("facet {facet} has a non-primitive normal {normal:?}")]
    NonPrimitiveNormal { facet: usize, normal: Vec<i64> },
    #[error("region is unbounded (recession direction {direction:?})")]
    Unbounded { direction: Vec<String> },
    #[error("region is empty or not full-dimensional")]
    Degenerate,
    #[error("facet {facet} is redundant")]
    RedundantFacet { facet: usize },
    #[error("vertex {vertex:?} is not simple: {tight} facets are tight")]
    NotSimple { vertex: Vec<String>, tight: usize },
    #[error("vertex {vertex:?} fails unimodularity: facets {facets:?} have determinant {det}")]
    NonUnimodularVertex {
        vertex: Vec<String>,
        facets: Vec<usize>,
        det: String,
    },
    #[error("point is not a vertex of the polytope")]
    NotAVertex,
    #[error("shift changes the combinatorial type ({expected} vertices expected, found {found})")]
    CombinatorialChange { expected: usize, found: usize },
    #[error("unimodular map is not invertible over the integers (det {det})")]
    NotUnimodular { det: i64 },
}

/// Crate-wide error type for the numerical engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("point {point:?} lies outside the polytope")]
    OutsidePolytope { point: Vec<f64> },
    #[error("point {point:?} lies on the boundary; {what} is undefined there")]
    BoundaryPoint { point: Vec<f64>, what: &'static str },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{k:?} is not a lattice point of the level-{level} dilate")]
    NotLatticePoint { k: Vec<i64>, level: u32 },
    #[error("optimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
        trace: Vec<f64>,
    },
    #[error("ill-conditioned fit: condition number {condition:e} exceeds {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
