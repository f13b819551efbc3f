//! Moving prox-regular sets and pointwise certificates for them.

mod checks;
mod constraints;
mod sets;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

pub use checks::{
    gamma_estimate, good_direction, hausdorff_estimate, hypomonotonicity_check,
    proximal_normal_test, GoodDirection, HypomonotonicityReport, HypomonotonicityViolation,
};
pub use constraints::{active_constraints, ActiveSet, ConstraintSet, Radius, SmoothConstraint};
pub use sets::{
    dilate, project_ball_exterior, project_halfspace, BallExterior, Dilated, HalfSpace,
    Unconstrained,
};

/// Default absolute boundary tolerance, in length units.
pub const DEFAULT_BOUNDARY_TOLERANCE: f64 = 1e-8;

/// Projections are refused at or beyond this fraction of the prox constant.
pub const TUBE_FRACTION: f64 = 0.9;

/// A closed set `C(t)` moving with time.
///
/// Implementors provide the distance and the nearest-point map; `project`
/// adds the guard that keeps queries inside the tube where the projection is
/// single-valued.
pub trait MovingSet: Send + Sync {
    fn dim(&self) -> usize;

    fn distance(&self, t: f64, x: &Point) -> f64;

    /// A nearest point of `C(t)` to `z`, with no tube check.
    fn nearest(&self, t: f64, z: &Point) -> Result<Point>;

    /// Prox-regularity constant; `f64::INFINITY` for convex sets.
    fn prox_constant(&self) -> f64;

    /// Monotone function bounding the Hausdorff variation, when known.
    fn variation(&self, _t: f64) -> Option<f64> {
        None
    }

    fn boundary_tolerance(&self) -> f64 {
        DEFAULT_BOUNDARY_TOLERANCE
    }

    /// Distance from `z` beyond which [`MovingSet::project`] refuses.
    fn projection_limit(&self) -> f64 {
        TUBE_FRACTION * self.prox_constant()
    }

    fn project(&self, t: f64, z: &Point) -> Result<Point> {
        let distance = self.distance(t, z);
        let limit = self.projection_limit();
        if distance >= limit {
            return Err(Error::StepTooLarge { distance, limit });
        }
        self.nearest(t, z)
    }

    fn contains(&self, t: f64, x: &Point) -> bool {
        self.distance(t, x) <= self.boundary_tolerance()
    }
}

impl<S: MovingSet + ?Sized> MovingSet for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn distance(&self, t: f64, x: &Point) -> f64 {
        (**self).distance(t, x)
    }
    fn nearest(&self, t: f64, z: &Point) -> Result<Point> {
        (**self).nearest(t, z)
    }
    fn prox_constant(&self) -> f64 {
        (**self).prox_constant()
    }
    fn variation(&self, t: f64) -> Option<f64> {
        (**self).variation(t)
    }
    fn boundary_tolerance(&self) -> f64 {
        (**self).boundary_tolerance()
    }
    fn projection_limit(&self) -> f64 {
        (**self).projection_limit()
    }
    fn project(&self, t: f64, z: &Point) -> Result<Point> {
        (**self).project(t, z)
    }
}

macro_rules! forward_moving_set {
    ($ptr:ty) => {
        impl MovingSet for $ptr {
            fn dim(&self) -> usize {
                (**self).dim()
            }
            fn distance(&self, t: f64, x: &Point) -> f64 {
                (**self).distance(t, x)
            }
            fn nearest(&self, t: f64, z: &Point) -> Result<Point> {
                (**self).nearest(t, z)
            }
            fn prox_constant(&self) -> f64 {
                (**self).prox_constant()
            }
            fn variation(&self, t: f64) -> Option<f64> {
                (**self).variation(t)
            }
            fn boundary_tolerance(&self) -> f64 {
                (**self).boundary_tolerance()
            }
            fn projection_limit(&self) -> f64 {
                (**self).projection_limit()
            }
            fn project(&self, t: f64, z: &Point) -> Result<Point> {
                (**self).project(t, z)
            }
        }
    };
}

forward_moving_set!(Box<dyn MovingSet>);
forward_moving_set!(Arc<dyn MovingSet>);

/// Axis-aligned sampling box. Estimators never infer one on their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let w = Window { lower, upper };
        w.validate()?;
        Ok(w)
    }

    /// The box `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Result<Self> {
        Window::new(vec![-half; dim], vec![half; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::Config("sampling window bounds have mismatched lengths".into()));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::Config("sampling window needs finite lower < upper".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::from_iterator(
            self.dim(),
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(&l, &u)| rng.random_range(l..u)),
        )
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| v >= l && v <= u)
    }
}
