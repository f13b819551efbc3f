use super::{MovingSet, DEFAULT_BOUNDARY_TOLERANCE, TUBE_FRACTION};
use crate::{Error, Point, Result};

/// Projection onto `{ y : <a, y> >= b }`.
pub fn project_halfspace(a: &Point, b: f64, z: &Point) -> Result<Point> {
    let nn = a.norm_squared();
    if nn == 0.0 {
        return Err(Error::InvalidSet("half-space normal is the zero vector".into()));
    }
    let gap = b - a.dot(z);
    if gap <= 0.0 {
        return Ok(z.clone());
    }
    Ok(z + a * (gap / nn))
}

/// Projection onto the exterior `{ y : |y - c| >= r }` of a ball.
///
/// The center itself is sent along the first coordinate axis.
pub fn project_ball_exterior(center: &Point, radius: f64, z: &Point) -> Point {
    debug_assert!(radius > 0.0);
    let offset = z - center;
    let norm = offset.norm();
    if norm >= radius {
        return z.clone();
    }
    if norm == 0.0 {
        let mut y = center.clone();
        y[0] += radius;
        return y;
    }
    center + offset * (radius / norm)
}

/// The moving half-space `{ y : <a, y> >= b0 + rate * t }`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    normal: Point,
    offset: f64,
    rate: f64,
    tolerance: f64,
}

impl HalfSpace {
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        HalfSpace::moving(normal, offset, 0.0)
    }

    pub fn moving(normal: Point, offset: f64, rate: f64) -> Result<Self> {
        if normal.norm() == 0.0 {
            return Err(Error::InvalidSet("half-space normal is the zero vector".into()));
        }
        if !(offset.is_finite() && rate.is_finite()) {
            return Err(Error::InvalidSet("half-space offset and rate must be finite".into()));
        }
        Ok(HalfSpace {
            normal,
            offset,
            rate,
            tolerance: DEFAULT_BOUNDARY_TOLERANCE,
        })
    }

    /// `[a, inf)` on the real line.
    pub fn half_line(a: f64) -> Self {
        HalfSpace::new(Point::from_element(1, 1.0), a).expect("unit normal")
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn normal(&self) -> &Point {
        &self.normal
    }

    pub fn offset_at(&self, t: f64) -> f64 {
        self.offset + self.rate * t
    }
}

impl MovingSet for HalfSpace {
    fn dim(&self) -> usize {
        self.normal.len()
    }

    fn distance(&self, t: f64, x: &Point) -> f64 {
        ((self.offset_at(t) - self.normal.dot(x)) / self.normal.norm()).max(0.0)
    }

    fn nearest(&self, t: f64, z: &Point) -> Result<Point> {
        project_halfspace(&self.normal, self.offset_at(t), z)
    }

    fn prox_constant(&self) -> f64 {
        f64::INFINITY
    }

    fn variation(&self, t: f64) -> Option<f64> {
        Some(self.rate.abs() * t / self.normal.norm())
    }

    fn boundary_tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// `{ y : |y - c| >= r }`, which is `r`-prox-regular.
#[derive(Debug, Clone, PartialEq)]
pub struct BallExterior {
    center: Point,
    radius: f64,
    tolerance: f64,
}

impl BallExterior {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!("ball radius must be positive, got {radius}")));
        }
        Ok(BallExterior {
            center,
            radius,
            tolerance: DEFAULT_BOUNDARY_TOLERANCE,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl MovingSet for BallExterior {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn distance(&self, _t: f64, x: &Point) -> f64 {
        (self.radius - (x - &self.center).norm()).max(0.0)
    }

    fn nearest(&self, _t: f64, z: &Point) -> Result<Point> {
        Ok(project_ball_exterior(&self.center, self.radius, z))
    }

    fn prox_constant(&self) -> f64 {
        self.radius
    }

    fn variation(&self, _t: f64) -> Option<f64> {
        Some(0.0)
    }

    fn boundary_tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// The whole space; projection is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unconstrained {
    pub dim: usize,
}

impl MovingSet for Unconstrained {
    fn dim(&self) -> usize {
        self.dim
    }

    fn distance(&self, _t: f64, _x: &Point) -> f64 {
        0.0
    }

    fn nearest(&self, _t: f64, z: &Point) -> Result<Point> {
        Ok(z.clone())
    }

    fn prox_constant(&self) -> f64 {
        f64::INFINITY
    }

    fn variation(&self, _t: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// The dilation `C + eps B` of an `eta`-prox-regular set, which is
/// `eta / 8`-prox-regular for `eps < eta / 8`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dilated<S> {
    base: S,
    eps: f64,
}

pub fn dilate<S: MovingSet>(base: S, eps: f64) -> Result<Dilated<S>> {
    let eta = base.prox_constant();
    if !(eps > 0.0) {
        return Err(Error::InvalidSet(format!("dilation radius must be positive, got {eps}")));
    }
    if eps >= eta / 8.0 {
        return Err(Error::InvalidSet(format!(
            "dilation radius {eps} must be below eta/8 = {}",
            eta / 8.0
        )));
    }
    Ok(Dilated { base, eps })
}

impl<S> Dilated<S> {
    pub fn base(&self) -> &S {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.eps
    }
}

impl<S: MovingSet> MovingSet for Dilated<S> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn distance(&self, t: f64, x: &Point) -> f64 {
        (self.base.distance(t, x) - self.eps).max(0.0)
    }

    fn nearest(&self, t: f64, z: &Point) -> Result<Point> {
        if self.base.distance(t, z) <= self.eps {
            return Ok(z.clone());
        }
        let y = self.base.nearest(t, z)?;
        let away = z - &y;
        let norm = away.norm();
        Ok(y + away * (self.eps / norm))
    }

    fn prox_constant(&self) -> f64 {
        self.base.prox_constant() / 8.0
    }

    fn variation(&self, t: f64) -> Option<f64> {
        self.base.variation(t)
    }

    fn boundary_tolerance(&self) -> f64 {
        self.base.boundary_tolerance()
    }

    /// The one-step construction only needs the base projection to be
    /// single-valued, so the guard is the base tube shifted by `eps`.
    fn projection_limit(&self) -> f64 {
        TUBE_FRACTION * self.base.prox_constant() - self.eps
    }
}
