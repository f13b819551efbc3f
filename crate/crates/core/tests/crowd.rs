use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sweep_core::cones::polyhedron_project;
use sweep_core::crowd::{
    linearized_set, min_gap, simulate, two_disk_projection, CrowdConfig, Disk, VelocityField,
};
use sweep_core::geometry::Radius;
use sweep_core::Point;

fn config(centers: Vec<[f64; 2]>, radii: Vec<f64>) -> CrowdConfig {
    let n = centers.len();
    CrowdConfig {
        disks: centers
            .into_iter()
            .zip(radii)
            .map(|(center, r)| Disk {
                center,
                radius: Radius::Constant(r),
            })
            .collect(),
        velocity: VelocityField::Constant {
            velocities: vec![[0.0, 0.0]; n],
        },
        noise: Vec::new(),
        walls: Vec::new(),
        rho: Some(0.5),
        horizon: 1.0,
        step: 1e-2,
    }
}

/// Feasible random packing: disks are dropped one by one and kept when
/// they do not overlap the earlier ones.
fn packing(seed: u64, n: usize) -> CrowdConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<[f64; 2]> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    while centers.len() < n {
        let c = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let r = rng.random_range(0.3..0.8);
        if centers
            .iter()
            .zip(&radii)
            .all(|(o, ro)| (c[0] - o[0]).hypot(c[1] - o[1]) >= r + ro)
        {
            centers.push(c);
            radii.push(r);
        }
    }
    config(centers, radii)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn linearized_set_lies_inside_feasible_set(seed in any::<u64>(), n in 2usize..6) {
        let c = packing(seed, n);
        let q = c.initial_positions();
        let Some(poly) = linearized_set(&c, &q, 0.0, 10.0).unwrap() else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..20 {
            let z = Point::from_iterator(q.len(), q.iter().map(|v| v + rng.random_range(-1.0..1.0)));
            let y = polyhedron_project(&z, &poly).unwrap().point;
            prop_assert!(min_gap(&c, &y, 0.0) >= -1e-10);
        }
    }

    #[test]
    fn linear_and_exact_projection_agree_on_axis(gap in 0.0..0.1f64, push in 0.0..0.05f64) {
        let c = config(vec![[-1.0 - gap / 2.0, 0.0], [1.0 + gap / 2.0, 0.0]], vec![1.0, 1.0]);
        let q = c.initial_positions();
        let p = Point::from_vec(vec![q[0] + push, 0.0, q[2] - push, 0.0]);
        let poly = linearized_set(&c, &q, 0.0, 1.0).unwrap().unwrap();
        let linear = polyhedron_project(&p, &poly).unwrap().point;
        let exact = two_disk_projection(&p, 2.0).unwrap();
        prop_assert!((linear - exact).norm() <= 1e-12);
    }
}

#[test]
fn noisy_crowds_never_overlap() {
    let mut c = packing(3, 6);
    c.rho = None;
    c.velocity = VelocityField::TargetSeeking {
        targets: vec![[0.0, 0.0]; 6],
        speed: 1.0,
        slowdown: 1.0,
    };
    c.noise = vec![[0.05, 0.05]; 6];
    c.horizon = 2.0;
    for seed in 0..5 {
        let traj = simulate(&c, seed).unwrap();
        assert!(traj.is_complete());
        assert!(traj.overall_min_gap() >= -1e-8, "{}", traj.overall_min_gap());
    }
}

#[test]
fn corridor_flow_stays_feasible() {
    let mut c = packing(11, 5);
    c.rho = None;
    c.velocity = VelocityField::Corridor {
        speed: 1.0,
        center: 0.0,
        half_width: 1.0,
        pull: 2.0,
    };
    let traj = simulate(&c, 1).unwrap();
    assert!(traj.is_complete());
    assert!(traj.overall_min_gap() >= -1e-8);
}
