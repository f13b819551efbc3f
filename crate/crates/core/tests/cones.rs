use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sweep_core::cones::{
    min_norm_in_hull, nnls_cone_project, polar_decompose, polyhedron_project, GeneratedCone,
    Polyhedron,
};
use sweep_core::geometry::gamma_estimate;
use sweep_core::{point, Point};

// Exhaustive active-set oracles: every subset is solved exactly and the best
// feasible candidate wins. Exponential, but fine for a handful of rows.

fn subsets(m: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << m).map(move |mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
}

fn columns(vs: &[Point], idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_columns(&idx.iter().map(|&i| vs[i].clone()).collect::<Vec<_>>())
}

fn cone_oracle(z: &Point, gens: &[Point]) -> f64 {
    let mut best = z.norm();
    for idx in subsets(gens.len()).filter(|s| !s.is_empty()) {
        let g = columns(gens, &idx);
        let Some(lambda) = g.clone().svd(true, true).solve(z, 1e-13).ok() else { continue };
        if lambda.iter().all(|&l| l >= -1e-12) {
            best = best.min((z - &g * lambda).norm());
        }
    }
    best
}

fn polyhedron_oracle(z: &Point, rows: &[(Point, f64)]) -> Option<Point> {
    let normals: Vec<Point> = rows.iter().map(|r| r.0.clone()).collect();
    let mut best: Option<Point> = None;
    for idx in subsets(rows.len()) {
        let y = if idx.is_empty() {
            z.clone()
        } else {
            let a = columns(&normals, &idx);
            let gap = DVector::from_iterator(idx.len(), idx.iter().map(|&i| rows[i].1 - rows[i].0.dot(z)));
            let gram = a.transpose() * &a;
            let Some(mu) = gram.svd(true, true).solve(&gap, 1e-13).ok() else { continue };
            if mu.iter().any(|&m| m < -1e-10) {
                continue;
            }
            z + &a * mu
        };
        let feasible = rows.iter().all(|(a, b)| a.dot(&y) >= b - 1e-9);
        if feasible && best.as_ref().is_none_or(|p| (&y - z).norm() < (p - z).norm()) {
            best = Some(y);
        }
    }
    best
}

fn hull_oracle(points: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for idx in subsets(points.len()).filter(|s| !s.is_empty()) {
        // min |sum w_i x_i| over the affine hull of the subset via the KKT system
        let k = idx.len();
        let x = columns(points, &idx);
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        kkt.view_mut((0, 0), (k, k)).copy_from(&(x.transpose() * &x));
        for i in 0..k {
            kkt[(i, k)] = 1.0;
            kkt[(k, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        let Some(sol) = kkt.svd(true, true).solve(&rhs, 1e-13).ok() else { continue };
        let w = sol.rows(0, k);
        if w.iter().all(|&v| v >= -1e-12) {
            best = best.min((&x * w).norm());
        }
    }
    best
}

fn vec_strategy(dim: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(-3.0..3.0f64, dim).prop_map(Point::from_vec)
}

fn nonzero(dim: usize) -> impl Strategy<Value = Point> {
    vec_strategy(dim).prop_filter("generator too short", |v| v.norm() > 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cone_projection_matches_subset_oracle(
        z in vec_strategy(3),
        gens in prop::collection::vec(nonzero(3), 1..5),
    ) {
        let p = nnls_cone_project(&z, &GeneratedCone::new(gens.clone()).unwrap()).unwrap();
        let oracle = cone_oracle(&z, &gens);
        prop_assert!(((&z - &p.point).norm() - oracle).abs() <= 1e-9 * (1.0 + z.norm()));
        prop_assert!(p.coefficients.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn cone_projection_is_idempotent(z in vec_strategy(4), gens in prop::collection::vec(nonzero(4), 1..6)) {
        let cone = GeneratedCone::new(gens).unwrap();
        let p = nnls_cone_project(&z, &cone).unwrap();
        let pp = nnls_cone_project(&p.point, &cone).unwrap();
        prop_assert!((&p.point - &pp.point).norm() <= 1e-9 * (1.0 + z.norm()));
    }

    #[test]
    fn polar_parts_are_orthogonal(z in vec_strategy(3), gens in prop::collection::vec(nonzero(3), 1..4)) {
        let d = polar_decompose(&z, &GeneratedCone::new(gens.clone()).unwrap()).unwrap();
        prop_assert!((&d.cone_part + &d.polar_part - &z).norm() <= 1e-12 * (1.0 + z.norm()));
        prop_assert!(d.cone_part.dot(&d.polar_part).abs() <= 1e-9 * (1.0 + z.norm_squared()));
        for g in &gens {
            prop_assert!(d.polar_part.dot(g) <= 1e-9 * (1.0 + z.norm()) * g.norm());
        }
    }

    #[test]
    fn hull_point_matches_subset_oracle(points in prop::collection::vec(vec_strategy(3), 1..6)) {
        let h = min_norm_in_hull(&points).unwrap();
        prop_assert!((h.distance - hull_oracle(&points)).abs() <= 1e-9);
        prop_assert!((h.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn polyhedron_projection_matches_subset_oracle(
        z in vec_strategy(3),
        rows in prop::collection::vec((nonzero(3), -1.0..1.0f64), 1..5),
    ) {
        // rows pass through a common interior point so the set is never empty
        let center = point(&[0.2, -0.1, 0.3]);
        let rows: Vec<_> = rows.into_iter().map(|(a, b)| {
            let offset = a.dot(&center) - b.abs();
            (a, offset)
        }).collect();
        let poly = Polyhedron::new(rows.clone()).unwrap();
        let p = polyhedron_project(&z, &poly).unwrap();
        let oracle = polyhedron_oracle(&z, &rows).unwrap();
        prop_assert!((&p.point - &oracle).norm() <= 1e-8 * (1.0 + z.norm()), "{} vs {}", p.point, oracle);
        prop_assert!(p.max_violation <= 1e-9 * (1.0 + z.norm()));
    }

    #[test]
    fn polyhedron_projection_is_nonexpansive(
        z1 in vec_strategy(2),
        z2 in vec_strategy(2),
        rows in prop::collection::vec((nonzero(2), 0.0..1.0f64), 1..5),
    ) {
        let rows: Vec<_> = rows.into_iter().map(|(a, b)| (a, -b)).collect();
        let poly = Polyhedron::new(rows).unwrap();
        let p1 = polyhedron_project(&z1, &poly).unwrap().point;
        let p2 = polyhedron_project(&z2, &poly).unwrap().point;
        prop_assert!((&p1 - &p2).norm() <= (&z1 - &z2).norm() * (1.0 + 1e-9) + 1e-9);
        let again = polyhedron_project(&p1, &poly).unwrap().point;
        prop_assert!((&again - &p1).norm() <= 1e-9);
    }
}

/// Dense grid over the simplex with the given step, refined around the best
/// coarse cell.
fn simplex_min_norm(normals: &[Point], step: f64) -> f64 {
    let eval = |w: &[f64]| -> f64 {
        let mut s = Point::zeros(normals[0].len());
        for (wi, n) in w.iter().zip(normals) {
            s.axpy(*wi, n, 1.0);
        }
        s.norm()
    };
    match normals.len() {
        2 => {
            let n = (1.0 / step).round() as usize;
            (0..=n).map(|k| k as f64 / n as f64).map(|a| eval(&[a, 1.0 - a])).fold(f64::INFINITY, f64::min)
        }
        3 => {
            let coarse: f64 = 0.01;
            let n = (1.0 / coarse).round() as usize;
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for i in 0..=n {
                for j in 0..=n - i {
                    let (a, b) = (i as f64 * coarse, j as f64 * coarse);
                    let v = eval(&[a, b, 1.0 - a - b]);
                    if v < best.0 {
                        best = (v, a, b);
                    }
                }
            }
            let (_, a0, b0) = best;
            let m = (2.0 * coarse / step).round() as i64;
            let mut fine = best.0;
            for i in -m..=m {
                for j in -m..=m {
                    let (a, b) = (a0 + i as f64 * step, b0 + j as f64 * step);
                    if a >= 0.0 && b >= 0.0 && a + b <= 1.0 {
                        fine = fine.min(eval(&[a, b, 1.0 - a - b]));
                    }
                }
            }
            fine
        }
        _ => unimplemented!("oracle covers two or three normals"),
    }
}

#[test]
fn gamma_of_orthogonal_normals_matches_simplex_grid() {
    let normals = [point(&[1.0, 0.0]), point(&[0.0, 1.0])];
    let gamma = gamma_estimate(&normals).unwrap();
    let brute = 1.0 / simplex_min_norm(&normals, 1e-6);
    assert!((gamma - 2f64.sqrt()).abs() < 1e-6);
    assert!((gamma - brute).abs() < 1e-6);
}

#[test]
fn gamma_of_three_normals_matches_simplex_grid() {
    let raw = [point(&[1.0, 0.2, 0.1]), point(&[0.1, 1.0, -0.3]), point(&[0.3, -0.2, 1.0])];
    let normals: Vec<Point> = raw.iter().map(|v| v.normalize()).collect();
    let gamma = gamma_estimate(&normals).unwrap();
    let brute = 1.0 / simplex_min_norm(&normals, 1e-4);
    // the grid can only overestimate the minimum norm
    assert!(brute <= gamma + 1e-9);
    assert!((gamma - brute).abs() < 1e-3, "{gamma} vs {brute}");
}

#[test]
fn antipodal_normals_have_no_gamma() {
    let err = gamma_estimate(&[point(&[1.0, 0.0]), point(&[-1.0, 0.0])]).unwrap_err();
    assert!(matches!(err, sweep_core::Error::ReverseTriangleFails { .. }));
}
