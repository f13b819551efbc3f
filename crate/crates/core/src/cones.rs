//! Small dense convex solvers shared by the geometry and crowd modules.
//!
//! Every solver returns a certificate (KKT residuals) next to its answer so
//! callers and tests can check optimality instead of trusting iteration
//! counts.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Point, Result};

/// Default absolute tolerance on KKT residuals.
pub const KKT_TOLERANCE: f64 = 1e-10;
/// Default iteration cap for every solver in this module.
pub const MAX_ITERATIONS: usize = 10_000;
/// Largest generator / row / point count accepted by the dense solvers.
pub const MAX_GENERATORS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Over-relaxation factor of the dual coordinate ascent, in `(0, 2)`.
    pub relaxation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: KKT_TOLERANCE,
            max_iterations: MAX_ITERATIONS,
            relaxation: 1.5,
        }
    }
}

/// The convex cone `{ sum_i l_i g_i : l_i >= 0 }`. No generators means `{0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCone {
    generators: Vec<Point>,
}

impl GeneratedCone {
    pub fn new(generators: Vec<Point>) -> Result<Self> {
        if generators.len() > MAX_GENERATORS {
            return Err(Error::Config(format!(
                "cone has {} generators, at most {MAX_GENERATORS} supported",
                generators.len()
            )));
        }
        if let Some(first) = generators.first() {
            let d = first.len();
            if generators.iter().any(|g| g.len() != d) {
                return Err(Error::Config("cone generators have mixed dimensions".into()));
            }
        }
        if generators.iter().any(|g| g.norm() == 0.0) {
            return Err(Error::InvalidSet("cone generator is the zero vector".into()));
        }
        Ok(GeneratedCone { generators })
    }

    pub fn generators(&self) -> &[Point] {
        &self.generators
    }

    pub fn is_trivial(&self) -> bool {
        self.generators.is_empty()
    }

    fn matrix(&self, dim: usize) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(dim, self.generators.len());
        for (j, col) in self.generators.iter().enumerate() {
            g.set_column(j, col);
        }
        g
    }
}

/// `{ y : <a_i, y> >= b_i for all rows }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    normals: Vec<Point>,
    offsets: Vec<f64>,
}

impl Polyhedron {
    pub fn new(rows: Vec<(Point, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidSet("polyhedron has no rows".into()));
        }
        if rows.len() > MAX_GENERATORS {
            return Err(Error::Config(format!(
                "polyhedron has {} rows, at most {MAX_GENERATORS} supported",
                rows.len()
            )));
        }
        let d = rows[0].0.len();
        if rows.iter().any(|(a, _)| a.len() != d) {
            return Err(Error::Config("polyhedron rows have mixed dimensions".into()));
        }
        if rows.iter().any(|(a, b)| a.norm() == 0.0 || !b.is_finite()) {
            return Err(Error::InvalidSet("polyhedron row with zero normal or non-finite offset".into()));
        }
        let (normals, offsets) = rows.into_iter().unzip();
        Ok(Polyhedron { normals, offsets })
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.normals.iter().zip(self.offsets.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.normals[0].len()
    }

    /// Largest constraint violation `max_i (b_i - <a_i, y>)`, clamped at 0.
    pub fn violation(&self, y: &Point) -> f64 {
        self.rows()
            .map(|(a, b)| b - a.dot(y))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, y: &Point, tol: f64) -> bool {
        self.violation(y) <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProjection {
    pub point: Point,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// `max(max_i <z - p, g_i>, |<z - p, p>|)`.
    pub kkt_residual: f64,
}

/// Euclidean projection of `z` onto a finitely generated cone by active-set
/// nonnegative least squares, `min |z - G l|` over `l >= 0`.
pub fn nnls_cone_project(z: &Point, cone: &GeneratedCone) -> Result<ConeProjection> {
    nnls_cone_project_with(z, cone, &SolverOptions::default())
}

pub fn nnls_cone_project_with(
    z: &Point,
    cone: &GeneratedCone,
    opts: &SolverOptions,
) -> Result<ConeProjection> {
    let dim = z.len();
    let m = cone.generators.len();
    if m == 0 {
        return Ok(ConeProjection {
            point: Point::zeros(dim),
            coefficients: Vec::new(),
            iterations: 0,
            kkt_residual: 0.0,
        });
    }
    if cone.generators[0].len() != dim {
        return Err(Error::Config("point and cone dimensions differ".into()));
    }
    let g = cone.matrix(dim);
    let scale = opts.tolerance
        * (1.0 + z.norm())
        * cone.generators.iter().map(|v| v.norm()).fold(1.0, f64::max);

    let mut lambda = DVector::<f64>::zeros(m);
    let mut passive = vec![false; m];
    let mut iterations = 0;

    loop {
        let residual = z - &g * &lambda;
        let w = g.transpose() * &residual;
        let candidate = (0..m)
            .filter(|&j| !passive[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate.filter(|&j| w[j] > scale) else {
            break;
        };
        passive[j] = true;

        loop {
            iterations += 1;
            if iterations > opts.max_iterations {
                return Err(Error::Convergence {
                    solver: "nnls_cone_project",
                    iterations,
                    residual: w.max(),
                });
            }
            let s = passive_least_squares(&g, z, &passive);
            if (0..m).all(|i| !passive[i] || s[i] > 0.0) {
                lambda = s;
                break;
            }
            // Step back toward the feasible region and drop the blocking indices.
            let mut alpha = 1.0_f64;
            for i in 0..m {
                if passive[i] && s[i] <= 0.0 {
                    let denom = lambda[i] - s[i];
                    if denom > 0.0 {
                        alpha = alpha.min(lambda[i] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            lambda += (s - &lambda) * alpha;
            for i in 0..m {
                if passive[i] && lambda[i] <= 1e-15 {
                    passive[i] = false;
                    lambda[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }

    let point = &g * &lambda;
    let residual = z - &point;
    let dual = (0..m)
        .map(|j| residual.dot(&cone.generators[j]))
        .fold(f64::NEG_INFINITY, f64::max);
    let kkt_residual = dual.max(residual.dot(&point).abs()).max(0.0);
    if kkt_residual > scale {
        return Err(Error::Convergence {
            solver: "nnls_cone_project",
            iterations,
            residual: kkt_residual,
        });
    }
    Ok(ConeProjection {
        point,
        coefficients: lambda.iter().copied().collect(),
        iterations,
        kkt_residual,
    })
}

/// Unconstrained least squares restricted to the passive columns; the other
/// coefficients are zero.
fn passive_least_squares(g: &DMatrix<f64>, z: &Point, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = g.select_columns(cols.iter());
    let svd = sub.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(1.0);
    let coeffs = svd
        .solve(z, eps)
        .unwrap_or_else(|_| DVector::zeros(cols.len()));
    let mut out = DVector::zeros(passive.len());
    for (k, &i) in cols.iter().enumerate() {
        out[i] = coeffs[k];
    }
    out
}

/// Moreau decomposition `z = a + b`, `a` the projection onto the cone and
/// `b` its component in the polar cone.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarDecomposition {
    pub cone_part: Point,
    pub polar_part: Point,
    pub coefficients: Vec<f64>,
}

pub fn polar_decompose(z: &Point, cone: &GeneratedCone) -> Result<PolarDecomposition> {
    let proj = nnls_cone_project(z, cone)?;
    let polar_part = z - &proj.point;
    Ok(PolarDecomposition {
        cone_part: proj.point,
        polar_part,
        coefficients: proj.coefficients,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullPoint {
    pub point: Point,
    pub distance: f64,
    /// Barycentric weights of `point` over the input points.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// `max(0, -min_i <p, x_i - p>)`.
    pub certificate_residual: f64,
}

/// Minimum-norm point of the convex hull of `points` (Wolfe's algorithm).
pub fn min_norm_in_hull(points: &[Point]) -> Result<HullPoint> {
    min_norm_in_hull_with(points, &SolverOptions::default())
}

pub fn min_norm_in_hull_with(points: &[Point], opts: &SolverOptions) -> Result<HullPoint> {
    if points.is_empty() || points.len() > MAX_GENERATORS {
        return Err(Error::Config(format!(
            "min_norm_in_hull needs between 1 and {MAX_GENERATORS} points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Config("hull points have mixed dimensions".into()));
    }
    let m = points.len();
    let radius2 = points.iter().map(|p| p.norm_squared()).fold(0.0, f64::max);
    let tol = opts.tolerance * radius2.max(1.0);

    let start = (0..m)
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .unwrap();
    let mut support = vec![start];
    let mut weights = vec![1.0];
    let mut x = points[start].clone();
    let mut iterations = 0;

    loop {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(Error::Convergence {
                solver: "min_norm_in_hull",
                iterations,
                residual: x.norm(),
            });
        }
        let xx = x.norm_squared();
        if xx <= tol * tol {
            break;
        }
        let (j, best) = (0..m)
            .map(|i| (i, x.dot(&points[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if best >= xx - tol || support.contains(&j) {
            break;
        }
        support.push(j);
        weights.push(0.0);

        loop {
            iterations += 1;
            if iterations > opts.max_iterations {
                return Err(Error::Convergence {
                    solver: "min_norm_in_hull",
                    iterations,
                    residual: x.norm(),
                });
            }
            let mu = affine_minimizer(points, &support);
            if mu.iter().all(|&v| v > 1e-14) {
                weights = mu;
                break;
            }
            let mut theta = 1.0_f64;
            for k in 0..support.len() {
                if mu[k] <= 1e-14 {
                    let denom = weights[k] - mu[k];
                    theta = theta.min(if denom > 0.0 { weights[k] / denom } else { 0.0 });
                }
            }
            for k in 0..support.len() {
                weights[k] += theta * (mu[k] - weights[k]);
            }
            let mut k = 0;
            while k < support.len() {
                if weights[k] <= 1e-14 && support.len() > 1 {
                    support.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        x = combine(points, &support, &weights, dim);
    }

    let mut full = vec![0.0; m];
    for (k, &i) in support.iter().enumerate() {
        full[i] = weights[k];
    }
    let xx = x.norm_squared();
    let certificate_residual = points
        .iter()
        .map(|p| xx - x.dot(p))
        .fold(0.0, f64::max);
    if certificate_residual > tol {
        return Err(Error::Convergence {
            solver: "min_norm_in_hull",
            iterations,
            residual: certificate_residual,
        });
    }
    Ok(HullPoint {
        distance: x.norm(),
        point: x,
        weights: full,
        iterations,
        certificate_residual,
    })
}

fn combine(points: &[Point], support: &[usize], weights: &[f64], dim: usize) -> Point {
    support
        .iter()
        .zip(weights)
        .fold(Point::zeros(dim), |acc, (&i, &w)| acc + &points[i] * w)
}

/// Weights of the minimum-norm point of the affine hull of the support.
fn affine_minimizer(points: &[Point], support: &[usize]) -> Vec<f64> {
    let k = support.len();
    let mut system = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            system[(a, b)] = points[i].dot(&points[j]);
        }
        system[(a, k)] = 1.0;
        system[(k, a)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let svd = system.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(1.0);
    match svd.solve(&rhs, eps) {
        Ok(sol) => sol.rows(0, k).iter().copied().collect(),
        Err(_) => vec![1.0 / k as f64; k],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedronProjection {
    pub point: Point,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    /// `max_i (b_i - <a_i, y>)`, clamped at zero.
    pub max_violation: f64,
    /// `max_i |mu_i (<a_i, y> - b_i)|`.
    pub complementarity: f64,
}

/// Euclidean projection onto a polyhedron by dual coordinate ascent, with
/// an exact equality-constrained solve on the detected active set.
///
/// The returned point satisfies `y - z = sum mu_i a_i` with `mu >= 0`.
pub fn polyhedron_project(z: &Point, poly: &Polyhedron) -> Result<PolyhedronProjection> {
    polyhedron_project_with(z, poly, &SolverOptions::default())
}

pub fn polyhedron_project_with(
    z: &Point,
    poly: &Polyhedron,
    opts: &SolverOptions,
) -> Result<PolyhedronProjection> {
    if z.len() != poly.dim() {
        return Err(Error::Config("point and polyhedron dimensions differ".into()));
    }
    let m = poly.len();
    let tol = opts.tolerance * (1.0 + z.norm());
    if poly.violation(z) <= 0.0 {
        return Ok(PolyhedronProjection {
            point: z.clone(),
            multipliers: vec![0.0; m],
            iterations: 0,
            max_violation: 0.0,
            complementarity: 0.0,
        });
    }
    let norms2: Vec<f64> = poly.normals.iter().map(|a| a.norm_squared()).collect();
    let mut mu = vec![0.0; m];
    let mut y = z.clone();

    for sweep in 1..=opts.max_iterations {
        for i in 0..m {
            let slack = poly.normals[i].dot(&y) - poly.offsets[i];
            let delta = (-opts.relaxation * slack / norms2[i]).max(-mu[i]);
            if delta != 0.0 {
                mu[i] += delta;
                y.axpy(delta, &poly.normals[i], 1.0);
            }
        }
        let mu_norm = mu.iter().fold(0.0_f64, |a, &b| a.max(b));
        if !mu_norm.is_finite() || mu_norm > 1e12 * (1.0 + z.norm()) {
            return Err(Error::InfeasiblePolyhedron {
                multiplier_norm: mu_norm,
            });
        }
        if let Some(polished) = polish_active_set(z, poly, &mu, tol) {
            return Ok(PolyhedronProjection {
                iterations: sweep,
                ..polished
            });
        }
        let y_exact = rebuild(z, poly, &mu);
        let (viol, comp) = certificate(poly, &y_exact, &mu);
        if viol <= tol && comp <= tol {
            return Ok(PolyhedronProjection {
                point: y_exact,
                multipliers: mu,
                iterations: sweep,
                max_violation: viol,
                complementarity: comp,
            });
        }
    }
    let y_exact = rebuild(z, poly, &mu);
    let (viol, comp) = certificate(poly, &y_exact, &mu);
    Err(Error::Convergence {
        solver: "polyhedron_project",
        iterations: opts.max_iterations,
        residual: viol.max(comp),
    })
}

fn rebuild(z: &Point, poly: &Polyhedron, mu: &[f64]) -> Point {
    let mut y = z.clone();
    for (a, &m) in poly.normals.iter().zip(mu) {
        if m != 0.0 {
            y.axpy(m, a, 1.0);
        }
    }
    y
}

fn certificate(poly: &Polyhedron, y: &Point, mu: &[f64]) -> (f64, f64) {
    let mut viol = 0.0_f64;
    let mut comp = 0.0_f64;
    for ((a, b), &m) in poly.rows().zip(mu) {
        let slack = a.dot(y) - b;
        viol = viol.max(-slack);
        comp = comp.max((m * slack).abs());
    }
    (viol, comp)
}

/// Solves the projection onto the affine subspace of the rows with positive
/// multipliers and accepts it when the full KKT system holds.
fn polish_active_set(
    z: &Point,
    poly: &Polyhedron,
    mu: &[f64],
    tol: f64,
) -> Option<PolyhedronProjection> {
    let active: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let k = active.len();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            gram[(a, b)] = poly.normals[i].dot(&poly.normals[j]);
        }
        rhs[a] = poly.offsets[i] - poly.normals[i].dot(z);
    }
    let svd = gram.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(1.0);
    let nu = svd.solve(&rhs, eps).ok()?;
    if nu.iter().any(|&v| !(v >= 0.0)) {
        return None;
    }
    let mut multipliers = vec![0.0; mu.len()];
    for (a, &i) in active.iter().enumerate() {
        multipliers[i] = nu[a];
    }
    let point = rebuild(z, poly, &multipliers);
    let (viol, comp) = certificate(poly, &point, &multipliers);
    (viol <= tol && comp <= tol).then_some(PolyhedronProjection {
        point,
        multipliers,
        iterations: 0,
        max_violation: viol,
        complementarity: comp,
    })
}
