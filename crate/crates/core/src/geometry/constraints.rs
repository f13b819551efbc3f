use serde::{Deserialize, Serialize};

use super::{MovingSet, DEFAULT_BOUNDARY_TOLERANCE};
use crate::cones::{polyhedron_project, Polyhedron};
use crate::{Error, Point, Result};

/// Disk radius, constant or affine in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Radius {
    Constant(f64),
    Linear { initial: f64, rate: f64 },
}

impl Radius {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Radius::Constant(r) => r,
            Radius::Linear { initial, rate } => initial + rate * t,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Radius::Constant(_) => 0.0,
            Radius::Linear { rate, .. } => rate.abs(),
        }
    }

    /// Smallest radius over `[0, horizon]`.
    pub fn min_over(&self, horizon: f64) -> f64 {
        self.at(0.0).min(self.at(horizon))
    }
}

impl From<f64> for Radius {
    fn from(r: f64) -> Self {
        Radius::Constant(r)
    }
}

/// Built-in constraint catalogue; each entry is a convex function `g` with
/// the feasible side `{ g(t, x) >= 0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothConstraint {
    /// `<a, x> - offset - rate t`.
    Affine {
        normal: Vec<f64>,
        offset: f64,
        #[serde(default)]
        rate: f64,
    },
    /// `|q_i - q_j| - r_i(t) - r_j(t)` over planar disk centers stored as
    /// consecutive coordinate pairs.
    DiskContact { i: usize, j: usize, ri: Radius, rj: Radius },
    /// `<n, q_disk> - offset - r(t)` for a unit wall normal `n`.
    WallDistance {
        disk: usize,
        normal: [f64; 2],
        offset: f64,
        radius: Radius,
    },
    /// `|x - c| - r`.
    BallExterior { center: Vec<f64>, radius: f64 },
}

fn block(x: &Point, i: usize) -> [f64; 2] {
    [x[2 * i], x[2 * i + 1]]
}

impl SmoothConstraint {
    pub fn value(&self, t: f64, x: &Point) -> f64 {
        match self {
            SmoothConstraint::Affine { normal, offset, rate } => {
                normal.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() - offset - rate * t
            }
            SmoothConstraint::DiskContact { i, j, ri, rj } => {
                let (a, b) = (block(x, *i), block(x, *j));
                (a[0] - b[0]).hypot(a[1] - b[1]) - ri.at(t) - rj.at(t)
            }
            SmoothConstraint::WallDistance {
                disk,
                normal,
                offset,
                radius,
            } => {
                let q = block(x, *disk);
                normal[0] * q[0] + normal[1] * q[1] - offset - radius.at(t)
            }
            SmoothConstraint::BallExterior { center, radius } => {
                center
                    .iter()
                    .zip(x.iter())
                    .map(|(c, v)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt()
                    - radius
            }
        }
    }

    pub fn gradient(&self, _t: f64, x: &Point) -> Result<Point> {
        let mut g = Point::zeros(x.len());
        match self {
            SmoothConstraint::Affine { normal, .. } => {
                g.iter_mut().zip(normal).for_each(|(gi, a)| *gi = *a);
            }
            SmoothConstraint::DiskContact { i, j, .. } => {
                let (a, b) = (block(x, *i), block(x, *j));
                let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
                let d = dx.hypot(dy);
                if d == 0.0 {
                    return Err(Error::Degenerate(format!(
                        "disks {i} and {j} have coincident centers"
                    )));
                }
                let e = [dx / d, dy / d];
                g[2 * i] = e[0];
                g[2 * i + 1] = e[1];
                g[2 * j] = -e[0];
                g[2 * j + 1] = -e[1];
            }
            SmoothConstraint::WallDistance { disk, normal, .. } => {
                g[2 * disk] = normal[0];
                g[2 * disk + 1] = normal[1];
            }
            SmoothConstraint::BallExterior { center, .. } => {
                let c = Point::from_column_slice(center);
                let w = x - c;
                let d = w.norm();
                if d == 0.0 {
                    return Err(Error::Degenerate("point at the ball center".into()));
                }
                g = w / d;
            }
        }
        Ok(g)
    }

    /// `dg/dt`, the constraint's time derivative.
    pub fn time_derivative(&self, _t: f64, _x: &Point) -> f64 {
        match self {
            SmoothConstraint::Affine { rate, .. } => -rate,
            SmoothConstraint::DiskContact { ri, rj, .. } => -(radius_rate(ri) + radius_rate(rj)),
            SmoothConstraint::WallDistance { radius, .. } => -radius_rate(radius),
            SmoothConstraint::BallExterior { .. } => 0.0,
        }
    }

    pub fn time_derivative_bound(&self) -> f64 {
        match self {
            SmoothConstraint::Affine { rate, .. } => rate.abs(),
            SmoothConstraint::DiskContact { ri, rj, .. } => ri.lipschitz() + rj.lipschitz(),
            SmoothConstraint::WallDistance { radius, .. } => radius.lipschitz(),
            SmoothConstraint::BallExterior { .. } => 0.0,
        }
    }

    /// Bounds `(alpha, beta)` on the gradient norm wherever it is defined.
    pub fn gradient_bounds(&self) -> (f64, f64) {
        let n = match self {
            SmoothConstraint::Affine { normal, .. } => normal.iter().map(|a| a * a).sum::<f64>().sqrt(),
            SmoothConstraint::DiskContact { .. } => std::f64::consts::SQRT_2,
            SmoothConstraint::WallDistance { normal, .. } => normal[0].hypot(normal[1]),
            SmoothConstraint::BallExterior { .. } => 1.0,
        };
        (n, n)
    }

    /// Hessian norm bound on the feasible side over `[0, horizon]`.
    pub fn hessian_bound(&self, horizon: f64) -> f64 {
        match self {
            SmoothConstraint::Affine { .. } | SmoothConstraint::WallDistance { .. } => 0.0,
            SmoothConstraint::DiskContact { ri, rj, .. } => {
                2.0 / (ri.min_over(horizon) + rj.min_over(horizon))
            }
            SmoothConstraint::BallExterior { radius, .. } => 1.0 / radius,
        }
    }

    pub(crate) fn validate(&self, dim: usize, horizon: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSet(msg));
        match self {
            SmoothConstraint::Affine { normal, offset, rate } => {
                if normal.len() != dim {
                    return bad(format!("affine constraint has {} coefficients, expected {dim}", normal.len()));
                }
                if normal.iter().all(|&a| a == 0.0) {
                    return bad("affine constraint with zero normal".into());
                }
                if !(offset.is_finite() && rate.is_finite()) {
                    return bad("affine constraint offset/rate must be finite".into());
                }
            }
            SmoothConstraint::DiskContact { i, j, ri, rj } => {
                if i == j || 2 * i.max(j) + 1 >= dim {
                    return bad(format!("disk contact ({i}, {j}) does not fit dimension {dim}"));
                }
                if !(ri.min_over(horizon) > 0.0 && rj.min_over(horizon) > 0.0) {
                    return bad(format!("disk radii of pair ({i}, {j}) must stay positive"));
                }
            }
            SmoothConstraint::WallDistance { disk, normal, radius, .. } => {
                if 2 * disk + 1 >= dim {
                    return bad(format!("wall constraint disk {disk} does not fit dimension {dim}"));
                }
                if (normal[0].hypot(normal[1]) - 1.0).abs() > 1e-12 {
                    return bad("wall normal must be a unit vector".into());
                }
                if !(radius.min_over(horizon) > 0.0) {
                    return bad(format!("radius of disk {disk} must stay positive"));
                }
            }
            SmoothConstraint::BallExterior { center, radius } => {
                if center.len() != dim {
                    return bad(format!("ball center has {} coordinates, expected {dim}", center.len()));
                }
                if !(*radius > 0.0) {
                    return bad("ball radius must be positive".into());
                }
            }
        }
        Ok(())
    }
}

fn radius_rate(r: &Radius) -> f64 {
    match *r {
        Radius::Constant(_) => 0.0,
        Radius::Linear { rate, .. } => rate,
    }
}

/// Indices `i` with `g_i(t, x) <= rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
    pub threshold: f64,
}

impl ActiveSet {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

/// `Q(t) = { x : g_i(t, x) >= 0 for all i }` with the constants of the
/// admissibility analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    dim: usize,
    constraints: Vec<SmoothConstraint>,
    alpha: f64,
    beta: f64,
    hessian_bound: f64,
    activation: f64,
    gamma: Option<f64>,
    eta: f64,
    horizon: f64,
    tolerance: f64,
}

const NEAREST_MAX_ITERATIONS: usize = 200;

impl ConstraintSet {
    /// Builds the set with constants derived from the catalogue over the
    /// time window `[0, horizon]`.
    pub fn new(dim: usize, constraints: Vec<SmoothConstraint>, horizon: f64) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::InvalidSet("constraint set needs at least one constraint".into()));
        }
        for c in &constraints {
            c.validate(dim, horizon)?;
        }
        let (alpha, beta) = constraints.iter().map(|c| c.gradient_bounds()).fold(
            (f64::INFINITY, 0.0_f64),
            |(lo, hi), (a, b)| (lo.min(a), hi.max(b)),
        );
        let hessian_bound = constraints
            .iter()
            .map(|c| c.hessian_bound(horizon))
            .fold(0.0, f64::max);
        let mut set = ConstraintSet {
            dim,
            constraints,
            alpha,
            beta,
            hessian_bound,
            activation: DEFAULT_BOUNDARY_TOLERANCE,
            gamma: None,
            eta: f64::INFINITY,
            horizon,
            tolerance: DEFAULT_BOUNDARY_TOLERANCE,
        };
        set.eta = set.heuristic_eta();
        Ok(set)
    }

    /// Non-certified default `alpha / (2 M gamma^2)`, with `gamma = 1` when
    /// no reverse-triangle constant was supplied.
    pub fn heuristic_eta(&self) -> f64 {
        if self.hessian_bound == 0.0 {
            return f64::INFINITY;
        }
        let gamma = self.gamma.unwrap_or(1.0);
        self.alpha / (2.0 * self.hessian_bound * gamma * gamma)
    }

    pub fn with_activation(mut self, rho: f64) -> Result<Self> {
        if !(rho >= 0.0) {
            return Err(Error::Config(format!("activation threshold must be >= 0, got {rho}")));
        }
        self.activation = rho;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0) {
            return Err(Error::Config(format!("reverse-triangle constant must be >= 1, got {gamma}")));
        }
        self.gamma = Some(gamma);
        self.eta = self.heuristic_eta();
        Ok(self)
    }

    pub fn with_prox_constant(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Config(format!("prox constant must be positive, got {eta}")));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn constraints(&self) -> &[SmoothConstraint] {
        &self.constraints
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hessian_bound(&self) -> f64 {
        self.hessian_bound
    }

    pub fn activation(&self) -> f64 {
        self.activation
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `min_i g_i(t, x)`.
    pub fn min_value(&self, t: f64, x: &Point) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(t, x))
            .fold(f64::INFINITY, f64::min)
    }

    /// The polyhedron `{ y : g_i(t, x) + <grad g_i(t, x), y - x> >= 0 }` over
    /// the constraints active at threshold `rho`; `None` when nothing is
    /// active.
    pub fn linearized(&self, t: f64, x: &Point, rho: f64) -> Result<Option<Polyhedron>> {
        let active = active_constraints(self, t, x, rho);
        self.linearize_indices(t, x, &active.indices)
    }

    fn linearize_indices(&self, t: f64, x: &Point, indices: &[usize]) -> Result<Option<Polyhedron>> {
        if indices.is_empty() {
            return Ok(None);
        }
        let rows = indices
            .iter()
            .map(|&i| {
                let c = &self.constraints[i];
                let a = c.gradient(t, x)?;
                let b = a.dot(x) - c.value(t, x);
                Ok((a, b))
            })
            .collect::<Result<Vec<_>>>()?;
        Polyhedron::new(rows).map(Some)
    }
}

pub fn active_constraints(set: &ConstraintSet, t: f64, x: &Point, rho: f64) -> ActiveSet {
    let indices = set
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| c.value(t, x) <= rho)
        .map(|(i, _)| i)
        .collect();
    ActiveSet {
        indices,
        threshold: rho,
    }
}

impl MovingSet for ConstraintSet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn distance(&self, t: f64, x: &Point) -> f64 {
        if self.min_value(t, x) >= 0.0 {
            return 0.0;
        }
        match self.nearest(t, x) {
            Ok(y) => (x - y).norm(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Iterates `y <- P_{Q~(t, y)}(z)`. Each iterate lies in `Q(t)` because
    /// the linearization of a convex constraint is a supporting inequality;
    /// a fixed point satisfies the KKT conditions of the projection.
    fn nearest(&self, t: f64, z: &Point) -> Result<Point> {
        if self.min_value(t, z) >= 0.0 {
            return Ok(z.clone());
        }
        let all: Vec<usize> = (0..self.constraints.len()).collect();
        let mut y = z.clone();
        let step_tol = 1e-14 * (1.0 + z.norm());
        for iteration in 0..NEAREST_MAX_ITERATIONS {
            let poly = self
                .linearize_indices(t, &y, &all)?
                .expect("constraint set is nonempty");
            let next = polyhedron_project(z, &poly)?.point;
            let moved = (&next - &y).norm();
            y = next;
            if moved <= step_tol && iteration > 0 {
                return Ok(y);
            }
        }
        Err(Error::Convergence {
            solver: "constraint_set_projection",
            iterations: NEAREST_MAX_ITERATIONS,
            residual: -self.min_value(t, &y).min(0.0),
        })
    }

    fn prox_constant(&self) -> f64 {
        self.eta
    }

    fn boundary_tolerance(&self) -> f64 {
        self.tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point;
    use approx::assert_abs_diff_eq;

    fn disks(centers: &[[f64; 2]], r: f64) -> (ConstraintSet, Point) {
        let n = centers.len();
        let mut cons = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                cons.push(SmoothConstraint::DiskContact {
                    i,
                    j,
                    ri: r.into(),
                    rj: r.into(),
                });
            }
        }
        let x = Point::from_iterator(2 * n, centers.iter().flat_map(|c| c.iter().copied()));
        (ConstraintSet::new(2 * n, cons, 1.0).unwrap(), x)
    }

    #[test]
    fn active_set_at_contact() {
        let (set, x) = disks(&[[-1.0, 0.0], [1.0, 0.0]], 1.0);
        assert_eq!(active_constraints(&set, 0.0, &x, 0.0).indices, vec![0]);
    }

    #[test]
    fn active_set_far_apart() {
        let (set, x) = disks(&[[-3.5, 0.0], [3.5, 0.0]], 1.0);
        assert_abs_diff_eq!(set.constraints()[0].value(0.0, &x), 5.0);
        assert!(active_constraints(&set, 0.0, &x, 0.1).is_empty());
    }

    #[test]
    fn active_set_three_disks() {
        // pair distances: (0,1) = 0, (1,2) = 0.05, (0,2) = 2.05 + 2 - 2 = 2.05
        let (set, x) = disks(&[[0.0, 0.0], [2.0, 0.0], [4.05, 0.0]], 1.0);
        let values: Vec<f64> = set.constraints().iter().map(|c| c.value(0.0, &x)).collect();
        assert_abs_diff_eq!(values[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(values[1], 2.05, epsilon = 1e-12);
        assert_abs_diff_eq!(values[2], 0.05, epsilon = 1e-12);
        assert_eq!(active_constraints(&set, 0.0, &x, 0.1).indices, vec![0, 2]);
    }

    #[test]
    fn disk_gradient_has_norm_sqrt2() {
        let (set, x) = disks(&[[-1.0, 0.0], [1.0, 0.0]], 1.0);
        let g = set.constraints()[0].gradient(0.0, &x).unwrap();
        assert_abs_diff_eq!(g, point(&[-1.0, 0.0, 1.0, 0.0]), epsilon = 1e-15);
        assert_abs_diff_eq!(g.norm(), std::f64::consts::SQRT_2, epsilon = 1e-15);
        assert_eq!(set.alpha(), std::f64::consts::SQRT_2);
    }

    #[test]
    fn coincident_centers_are_degenerate() {
        let (set, x) = disks(&[[0.0, 0.0], [0.0, 0.0]], 1.0);
        assert!(matches!(
            set.constraints()[0].gradient(0.0, &x),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cons = vec![
            SmoothConstraint::DiskContact { i: 0, j: 1, ri: 0.5.into(), rj: Radius::Linear { initial: 1.0, rate: -0.1 } },
            SmoothConstraint::WallDistance { disk: 1, normal: [0.6, 0.8], offset: -3.0, radius: 0.5.into() },
            SmoothConstraint::Affine { normal: vec![1.0, -2.0, 0.5, 0.0], offset: 1.0, rate: 0.3 },
            SmoothConstraint::BallExterior { center: vec![0.1, 0.2, 0.3, 0.4], radius: 0.5 },
        ];
        let x = point(&[0.3, -0.7, 1.9, 0.4]);
        let eps = 1e-6;
        for c in &cons {
            let g = c.gradient(0.2, &x).unwrap();
            for k in 0..4 {
                let mut xe = x.clone();
                xe[k] += eps;
                let fd = (c.value(0.2, &xe) - c.value(0.2, &x)) / eps;
                assert!((fd - g[k]).abs() < 1e-5, "{c:?} coordinate {k}");
            }
            let dt = (c.value(0.2 + eps, &x) - c.value(0.2, &x)) / eps;
            assert!((dt - c.time_derivative(0.2, &x)).abs() < 1e-6);
        }
    }

    #[test]
    fn linearization_rows_are_supporting() {
        let (set, x) = disks(&[[-1.0, 0.0], [1.0, 0.1]], 1.0);
        let poly = set.linearized(0.0, &x, 1.0).unwrap().unwrap();
        let (a, b) = poly.rows().next().unwrap();
        // Row is tight at x in the sense b = <a, x> - g(x).
        assert_abs_diff_eq!(a.dot(&x) - b, set.constraints()[0].value(0.0, &x), epsilon = 1e-14);
    }

    #[test]
    fn nearest_point_for_overlapping_pair() {
        let (set, _) = disks(&[[0.0, 0.0], [1.0, 0.0]], 1.0);
        let z = point(&[0.0, 0.0, 1.0, 0.0]);
        let y = set.nearest(0.0, &z).unwrap();
        assert_abs_diff_eq!(y, point(&[-0.5, 0.0, 1.5, 0.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(set.distance(0.0, &z), (0.5_f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_invalid_catalogue_entries() {
        let bad = SmoothConstraint::DiskContact { i: 0, j: 3, ri: 1.0.into(), rj: 1.0.into() };
        assert!(ConstraintSet::new(4, vec![bad], 1.0).is_err());
        let shrinking = SmoothConstraint::DiskContact {
            i: 0,
            j: 1,
            ri: Radius::Linear { initial: 1.0, rate: -2.0 },
            rj: 1.0.into(),
        };
        assert!(ConstraintSet::new(4, vec![shrinking], 1.0).is_err());
        assert!(ConstraintSet::new(4, vec![], 1.0).is_err());
    }
}
