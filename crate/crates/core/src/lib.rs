//! Numerical schemes for sweeping processes and reflected stochastic
//! differential equations driven by moving prox-regular sets.
//!
//! The crate is organised bottom-up:
//!
//! * [`cones`]: small dense convex solvers (cone projection, min-norm point,
//!   polyhedron projection) that return optimality certificates.
//! * [`geometry`]: the [`MovingSet`](geometry::MovingSet) abstraction, the
//!   concrete set catalogue and pointwise prox-regularity / admissibility
//!   certificates.
//! * [`skorohod`]: the catching-up scheme for the deterministic Skorohod
//!   problem together with its verifiers and the half-line oracle.
//! * [`sde`]: seeded Brownian paths with bridge refinement, the projected
//!   Euler scheme and Monte Carlo studies.
//! * [`crowd`]: the non-overlapping disk model stepped by projection onto
//!   the linearized feasible polyhedron.

pub mod cones;
pub mod crowd;
mod error;
pub mod geometry;
mod grid;
pub mod sde;
pub mod skorohod;

pub use error::{Error, ErrorClass, Result};
pub use grid::TimeGrid;

/// Points and vectors of the ambient space.
pub type Point = nalgebra::DVector<f64>;

/// Builds a [`Point`] from a slice.
pub fn point(coords: &[f64]) -> Point {
    Point::from_column_slice(coords)
}
