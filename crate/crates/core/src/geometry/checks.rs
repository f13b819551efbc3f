use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{active_constraints, ActiveSet, ConstraintSet, MovingSet, Window};
use crate::cones::{min_norm_in_hull, polar_decompose, GeneratedCone};
use crate::{Error, Point, Result};

/// Distance below which the origin counts as lying in the hull of normals.
pub const HULL_ORIGIN_TOLERANCE: f64 = 1e-9;

const SAMPLING_ATTEMPT_FACTOR: usize = 100;
const STORED_VIOLATIONS: usize = 100;

/// Whether `w` is a proximal normal to `C(t)` at the boundary point `x`,
/// tested by checking `x = P(x + s w / |w|)`.
pub fn proximal_normal_test<S: MovingSet + ?Sized>(
    set: &S,
    t: f64,
    x: &Point,
    w: &Point,
    s: f64,
    tol: f64,
) -> Result<bool> {
    if set.distance(t, x) > set.boundary_tolerance() {
        return Err(Error::Config("proximal normal test point is not in the set".into()));
    }
    let eta = set.prox_constant();
    if !(s > 0.0) || s >= eta {
        return Err(Error::Config(format!(
            "probe length {s} must lie in (0, eta) with eta = {eta}"
        )));
    }
    let norm = w.norm();
    if norm == 0.0 {
        return Err(Error::Config("proximal normal test direction is zero".into()));
    }
    let probe = x + w * (s / norm);
    let y = set.project(t, &probe)?;
    Ok((y - x).norm() <= tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypomonotonicityViolation {
    pub x: Point,
    pub y: Point,
    pub normal: Point,
    /// `<y - x, v>`.
    pub lhs: f64,
    /// `|v| |x - y|^2 / (2 eta)`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypomonotonicityReport {
    pub eta: f64,
    pub triples: usize,
    pub violation_count: usize,
    /// First violations found, at most a hundred.
    pub violations: Vec<HypomonotonicityViolation>,
    pub worst_excess: f64,
}

impl HypomonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

/// Samples triples `(x, v, y)` with `x` on the boundary, `v` a unit
/// proximal normal at `x` and `y` in `C(t)`, and records every triple with
/// `<y - x, v> > |x - y|^2 / (2 eta) + tol`.
///
/// Boundary points come from projecting window samples that lie outside the
/// set, which makes `v = (z - x) / |z - x|` a proximal normal by
/// construction.
pub fn hypomonotonicity_check<S: MovingSet + ?Sized>(
    set: &S,
    t: f64,
    eta: f64,
    n_samples: usize,
    seed: u64,
    window: &Window,
    tol: f64,
) -> Result<HypomonotonicityReport> {
    window.validate()?;
    if window.dim() != set.dim() {
        return Err(Error::Config("sampling window dimension differs from the set".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::Config(format!("claimed prox constant must be positive, got {eta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = set.projection_limit();
    let max_attempts = SAMPLING_ATTEMPT_FACTOR * n_samples.max(1);

    let mut boundary = Vec::with_capacity(n_samples);
    let mut interior = Vec::with_capacity(n_samples);
    let mut attempts = 0;
    while (boundary.len() < n_samples || interior.len() < n_samples) && attempts < max_attempts {
        attempts += 1;
        let z = window.sample(&mut rng);
        let d = set.distance(t, &z);
        if d <= set.boundary_tolerance() {
            if interior.len() < n_samples {
                interior.push(z);
            }
        } else if d < limit && boundary.len() < n_samples {
            let x = set.nearest(t, &z)?;
            let v = (&z - &x) / (&z - &x).norm();
            boundary.push((x, v));
        }
    }
    if boundary.is_empty() || interior.is_empty() {
        return Err(Error::Config(
            "sampling window yields no boundary or no feasible points".into(),
        ));
    }

    let mut report = HypomonotonicityReport {
        eta,
        triples: n_samples,
        violation_count: 0,
        violations: Vec::new(),
        worst_excess: f64::NEG_INFINITY,
    };
    for k in 0..n_samples {
        let (x, v) = &boundary[k % boundary.len()];
        let y = &interior[k % interior.len()];
        let lhs = (y - x).dot(v);
        let rhs = if eta.is_infinite() {
            0.0
        } else {
            v.norm() * (x - y).norm_squared() / (2.0 * eta)
        };
        report.worst_excess = report.worst_excess.max(lhs - rhs);
        if lhs > rhs + tol {
            report.violation_count += 1;
            if report.violations.len() < STORED_VIOLATIONS {
                report.violations.push(HypomonotonicityViolation {
                    x: x.clone(),
                    y: y.clone(),
                    normal: v.clone(),
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(report)
}

/// Tight reverse-triangle constant `1 / dist(0, conv(normals))`.
pub fn gamma_estimate(unit_normals: &[Point]) -> Result<f64> {
    if unit_normals.is_empty() {
        return Err(Error::Config("gamma_estimate needs at least one normal".into()));
    }
    if unit_normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::Config("gamma_estimate expects unit normals".into()));
    }
    let hull = min_norm_in_hull(unit_normals)?;
    if hull.distance <= HULL_ORIGIN_TOLERANCE {
        return Err(Error::ReverseTriangleFails {
            distance: hull.distance,
        });
    }
    Ok(1.0 / hull.distance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodDirection {
    pub u: Point,
    /// `alpha^2 / (4 gamma^2 p beta)`.
    pub nu: f64,
    pub gamma: f64,
    pub active: ActiveSet,
    /// `<grad g_i(t, x), u>` for each active constraint, in `active` order.
    pub inner_products: Vec<f64>,
}

/// Builds the direction `u = sum b_i / |sum b_i|` from the polar
/// decomposition of the active gradients against the cone they generate
/// (with a minus sign) and certifies `<grad g_i, u> >= nu` for every active
/// constraint.
pub fn good_direction(set: &ConstraintSet, t: f64, x: &Point) -> Result<GoodDirection> {
    let active = active_constraints(set, t, x, set.activation());
    if active.is_empty() {
        return Err(Error::Admissibility(format!(
            "no constraint active within rho = {}",
            set.activation()
        )));
    }
    let gradients = active
        .indices
        .iter()
        .map(|&i| set.constraints()[i].gradient(t, x))
        .collect::<Result<Vec<_>>>()?;

    let (alpha, beta) = (set.alpha(), set.beta());
    for (g, &i) in gradients.iter().zip(&active.indices) {
        let n = g.norm();
        if n < alpha * (1.0 - 1e-12) || n > beta * (1.0 + 1e-12) {
            return Err(Error::Admissibility(format!(
                "gradient norm {n} of constraint {i} outside [{alpha}, {beta}]"
            )));
        }
    }
    let unit: Vec<Point> = gradients.iter().map(|g| g / g.norm()).collect();
    let gamma = gamma_estimate(&unit)?;

    let cone = GeneratedCone::new(gradients.iter().map(|g| -g).collect())?;
    let mut sum = Point::zeros(x.len());
    for g in &gradients {
        sum += polar_decompose(g, &cone)?.polar_part;
    }
    let norm = sum.norm();
    if norm <= 1e-12 {
        return Err(Error::Admissibility(format!(
            "sum of polar components vanishes (|sum b_i| = {norm:.3e})"
        )));
    }
    let u = sum / norm;
    let p = set.constraints().len() as f64;
    let nu = alpha * alpha / (4.0 * gamma * gamma * p * beta);
    let inner_products: Vec<f64> = gradients.iter().map(|g| g.dot(&u)).collect();
    if let Some((k, &ip)) = inner_products
        .iter()
        .enumerate()
        .find(|(_, &ip)| ip < nu)
    {
        return Err(Error::Admissibility(format!(
            "constraint {} has <grad g, u> = {ip} below nu = {nu}",
            active.indices[k]
        )));
    }
    Ok(GoodDirection {
        u,
        nu,
        gamma,
        active,
        inner_products,
    })
}

/// Sampled lower bound on the Hausdorff distance between `A(t_a)` and
/// `B(t_b)` restricted to `window`.
///
/// The `k`-th sample depends only on `(seed, k)`, so the estimate is
/// nondecreasing in `n`. Samples outside a set are replaced by their
/// projection so that boundary points are covered.
pub fn hausdorff_estimate<A, B>(
    a: &A,
    t_a: f64,
    b: &B,
    t_b: f64,
    window: &Window,
    n: usize,
    seed: u64,
) -> Result<f64>
where
    A: MovingSet + ?Sized,
    B: MovingSet + ?Sized,
{
    window.validate()?;
    if window.dim() != a.dim() || window.dim() != b.dim() {
        return Err(Error::Config("sampling window dimension differs from the sets".into()));
    }
    let forward = one_sided(a, t_a, b, t_b, window, n, seed, 0)?;
    let backward = one_sided(b, t_b, a, t_a, window, n, seed, 1)?;
    Ok(forward.max(backward))
}

#[allow(clippy::too_many_arguments)]
fn one_sided<A, B>(
    from: &A,
    t_from: f64,
    to: &B,
    t_to: f64,
    window: &Window,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<f64>
where
    A: MovingSet + ?Sized,
    B: MovingSet + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..n {
        let z = window.sample(&mut rng);
        let candidate = if from.contains(t_from, &z) {
            Some(z)
        } else {
            from.project(t_from, &z)
                .ok()
                .filter(|p| window.contains(p))
        };
        if let Some(x) = candidate {
            best = best.max(to.distance(t_to, &x));
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Config("no feasible samples in the window".into()));
    }
    Ok(best)
}
