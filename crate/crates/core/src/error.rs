use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The point to project lies outside the tube where the projection is
    /// guaranteed to be single-valued.
    #[error(
        "step too large: distance {distance:.3e} to the set exceeds the projection limit {limit:.3e}; reduce the time step"
    )]
    StepTooLarge { distance: f64, limit: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("polyhedron is infeasible (multiplier norm {multiplier_norm:.3e})")]
    InfeasiblePolyhedron { multiplier_norm: f64 },

    #[error("geometric degeneracy: {0}")]
    Degenerate(String),

    /// The origin lies in the convex hull of the active unit normals, so no
    /// finite reverse-triangle constant exists.
    #[error("R_rho fails: distance from the origin to the hull of normals is {distance:.3e}")]
    ReverseTriangleFails { distance: f64 },

    #[error("admissibility failure: {0}")]
    Admissibility(String),

    #[error("error at node {node}: {source}")]
    AtNode { node: usize, source: Box<Error> },
}

/// Coarse classification used for process exit codes and discard counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    StepTooLarge,
    Solver,
}

impl Error {
    /// Attaches the time node at which the error occurred.
    pub fn at_node(self, node: usize) -> Error {
        match self {
            Error::AtNode { .. } => self,
            other => Error::AtNode {
                node,
                source: Box::new(other),
            },
        }
    }

    pub fn node(&self) -> Option<usize> {
        match self {
            Error::AtNode { node, .. } => Some(*node),
            _ => None,
        }
    }

    /// The error without any node annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtNode { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::StepTooLarge { .. } => ErrorClass::StepTooLarge,
            Error::InvalidSet(_) | Error::Config(_) => ErrorClass::Config,
            _ => ErrorClass::Solver,
        }
    }

    pub fn is_step_too_large(&self) -> bool {
        self.class() == ErrorClass::StepTooLarge
    }
}
