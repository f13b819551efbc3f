use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sweep_core::geometry::HalfSpace;
use sweep_core::sde::{brownian_path, brownian_refine, euler_project, FieldPair};
use sweep_core::skorohod::{
    catching_up, halfline_reflection_oracle, refine_compare, support_check, Driver, Provenance,
};
use sweep_core::{point, TimeGrid};

/// Piecewise-linear driver through `knots` equally spaced on `[0, T]`,
/// sampled on `grid`, starting at `start`.
fn piecewise_linear(grid: TimeGrid, start: f64, knots: &[f64]) -> Vec<f64> {
    let m = knots.len();
    let t_end = grid.horizon();
    grid.nodes()
        .iter()
        .map(|&t| {
            let s = t / t_end * m as f64;
            let k = (s.floor() as usize).min(m - 1);
            let left = if k == 0 { start } else { knots[k - 1] };
            left + (s - k as f64) * (knots[k] - left)
        })
        .collect()
}

#[test]
fn catching_up_matches_half_line_oracle_on_random_drivers() {
    let grid = TimeGrid::new(1.0, 1e-3).unwrap();
    let set = HalfSpace::half_line(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let start = rng.random_range(0.0..1.0);
        let knots: Vec<f64> = (0..rng.random_range(2..12)).map(|_| rng.random_range(-2.0..2.0)).collect();
        let l = piecewise_linear(grid, start, &knots);
        let sol = catching_up(&set, &Driver::scalar(grid, &l).unwrap(), &point(&[start])).unwrap();
        let oracle = halfline_reflection_oracle(&l, start);
        for (x, o) in sol.x.iter().zip(&oracle) {
            assert!((x[0] - o).abs() <= 1e-14);
        }
        assert!(support_check(&sol, &set, 1e-12).is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// The discrete Skorohod map on the half-line is 2-Lipschitz in sup norm.
    #[test]
    fn skorohod_map_is_stable_in_the_driver(
        a in prop::collection::vec(-1.0..1.0f64, 2..8),
        b in prop::collection::vec(-0.05..0.05f64, 8),
        start in 0.0..0.5f64,
    ) {
        let grid = TimeGrid::new(1.0, 1.0 / 256.0).unwrap();
        let la = piecewise_linear(grid, start, &a);
        let perturbation = piecewise_linear(grid, 0.0, &b);
        let lb: Vec<f64> = la.iter().zip(&perturbation).map(|(x, y)| x + y).collect();
        let xa = halfline_reflection_oracle(&la, start);
        let xb = halfline_reflection_oracle(&lb, start);
        let dl = la.iter().zip(&lb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let dx = xa.iter().zip(&xb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(dx <= 2.0 * dl + 1e-15);
    }

    /// `tv_k` stays bounded across refinements of a smooth driver.
    #[test]
    fn bounded_variation_is_uniform_in_h(freq in 1.0..8.0f64, amp in 0.2..2.0f64) {
        let finest = TimeGrid::new(1.0, 1.0 / 1024.0).unwrap();
        let driver = Driver::from_fn(finest, |t| point(&[amp * (freq * t).sin()]));
        let rows = refine_compare(
            &HalfSpace::half_line(0.0),
            &driver,
            &point(&[0.0]),
            &[1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0],
        ).unwrap();
        let tv: Vec<f64> = rows.iter().map(|r| r.tv_k).collect();
        let hi = tv.iter().copied().fold(0.0, f64::max);
        let lo = tv.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(hi <= driver.total_variation() + 1e-12);
        prop_assert!(hi - lo <= 0.1 * hi.max(1e-12));
    }

    /// With zero noise the projected Euler scheme is the catching-up scheme.
    #[test]
    fn degenerate_noise_is_catching_up(drift in -2.0..2.0f64, u0 in 0.0..1.0f64, seed in any::<u64>()) {
        let grid = TimeGrid::new(1.0, 1.0 / 200.0).unwrap();
        let set = HalfSpace::half_line(0.0);
        let fields = FieldPair::constant(point(&[drift]), point(&[0.0]));
        let sol = euler_project(&set, &fields, &point(&[u0]), &brownian_path(seed, grid)).unwrap();
        let mut samples = vec![point(&[u0])];
        for n in 0..grid.steps() {
            let next = &samples[n] + point(&[grid.step_len(n) * drift]);
            samples.push(next);
        }
        let reference = catching_up(
            &set,
            &Driver::from_samples(grid, samples, Provenance::Analytic).unwrap(),
            &point(&[u0]),
        ).unwrap();
        for (a, b) in sol.x.iter().zip(&reference.x) {
            prop_assert!((a[0] - b[0]).abs() <= 1e-14);
        }
    }

    #[test]
    fn half_line_scheme_matches_scalar_recursion(
        drift in -2.0..2.0f64, sigma in 0.0..2.0f64, seed in any::<u64>(),
    ) {
        let grid = TimeGrid::new(1.0, 1e-3).unwrap();
        let path = brownian_path(seed, grid);
        let fields = FieldPair::constant(point(&[drift]), point(&[sigma]));
        let sol = euler_project(&HalfSpace::half_line(0.0), &fields, &point(&[0.0]), &path).unwrap();
        let mut x = 0.0;
        for (n, db) in path.increments().iter().enumerate() {
            x = (x + (1e-3 * drift + sigma * db)).max(0.0);
            prop_assert!((sol.x[n + 1][0] - x).abs() <= 1e-14);
        }
    }

    #[test]
    fn bridge_refinement_preserves_coarse_values(seed in any::<u64>()) {
        let grid = TimeGrid::new(1.0, 1.0 / 16.0).unwrap();
        let coarse = brownian_path(seed, grid);
        let fine = brownian_refine(&brownian_refine(&coarse).unwrap()).unwrap();
        let (bc, bf) = (coarse.values(), fine.values());
        for (n, v) in bc.iter().enumerate() {
            prop_assert!((bf[4 * n] - v).abs() <= 1e-13);
        }
        // refining is a pure function of the path
        prop_assert_eq!(brownian_refine(&coarse).unwrap(), brownian_refine(&coarse).unwrap());
    }
}

#[test]
fn moving_wall_error_is_at_most_h() {
    let set = HalfSpace::moving(point(&[1.0]), 0.0, 1.0).unwrap();
    for k in 4..=10 {
        let h = 2f64.powi(-k);
        let grid = TimeGrid::new(1.0, h).unwrap();
        let driver = Driver::from_fn(grid, |_| point(&[0.0]));
        let sol = catching_up(&set, &driver, &point(&[0.0])).unwrap();
        let err = sol
            .times
            .iter()
            .zip(&sol.x)
            .map(|(t, x)| (x[0] - t).abs())
            .fold(0.0, f64::max);
        assert!(err <= h, "h = {h}: {err}");
    }
}
