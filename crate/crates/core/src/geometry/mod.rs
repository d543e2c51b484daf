//! Convex targets, projections, and the affine-hull minimizer.

mod affine;
mod target;

use thiserror::Error;

pub use affine::{affine_minimizer, AffineSolveResult, GRAM_RELATIVE_TOL};
pub use target::{ConvexTarget, DYKSTRA_TOL, MAX_DYKSTRA_ITERS, MEMBERSHIP_TOL};

/// Vector of discounted cumulative measurements, one entry per dimension.
pub type MeasurementVec = nalgebra::DVector<f64>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("affine minimizer needs at least one point")]
    EmptyPointSet,
    #[error("Dykstra projection did not converge within {iterations} sweeps (is the intersection empty?)")]
    DykstraNonConvergence { iterations: usize },
    #[error("invalid target at `{field}`: {reason}")]
    InvalidTarget { field: String, reason: String },
}
