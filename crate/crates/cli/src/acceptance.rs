//! The acceptance suite: one pass/fail verdict per criterion, each with a
//! runtime budget. Shared by `sweep self-test` and the `acceptance` test
//! target.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sweep_core::crowd::{simulate, simulate_with_path, CrowdConfig, Disk, VelocityField};
use sweep_core::geometry::{
    gamma_estimate, good_direction, hypomonotonicity_check, BallExterior, ConstraintSet, HalfSpace,
    Radius, SmoothConstraint, Window,
};
use sweep_core::sde::{
    brownian_path, monte_carlo, pathwise_study, stability_sweep, sub_seed, FieldPair,
};
use sweep_core::skorohod::{
    catching_up, halfline_reflection_oracle, refine_compare, Driver, Provenance,
};
use sweep_core::{point, Error, Point, TimeGrid};

use crate::error::{CliError, CliResult};
use crate::runner::{run, RunOptions};

/// Discarded-path rate allowed in the Monte Carlo criteria.
const MAX_DISCARD_RATE: f64 = 1e-3;

pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub budget: Duration,
    check: fn() -> CliResult<Check>,
}

struct Check {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> CliResult<Check> {
    Ok(Check { passed, detail })
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:02}] {}: {} ({:.2} s, budget {} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

impl Criterion {
    pub fn run(&self) -> CriterionResult {
        let start = Instant::now();
        let check = (self.check)().unwrap_or_else(|e| Check {
            passed: false,
            detail: format!("error: {e}"),
        });
        let elapsed = start.elapsed();
        let in_budget = elapsed <= self.budget;
        let detail = if in_budget {
            check.detail
        } else {
            format!("{}; over the runtime budget", check.detail)
        };
        CriterionResult {
            id: self.id,
            title: self.title,
            passed: check.passed && in_budget,
            detail,
            elapsed,
            budget: self.budget,
        }
    }
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, title: "half-line oracle equivalence", budget: secs(10), check: half_line_oracle },
        Criterion { id: 2, title: "reflected Brownian motion law", budget: secs(300), check: reflected_bm_law },
        Criterion { id: 3, title: "pathwise scheme convergence", budget: secs(120), check: pathwise_convergence },
        Criterion { id: 4, title: "stability scaling", budget: secs(180), check: stability_scaling },
        Criterion { id: 5, title: "deterministic sweeping oracle", budget: secs(5), check: moving_wall },
        Criterion { id: 6, title: "BV uniformity", budget: secs(10), check: bv_uniformity },
        Criterion { id: 7, title: "hypomonotonicity suite", budget: secs(5), check: hypomonotonicity },
        Criterion { id: 8, title: "gamma oracle", budget: secs(5), check: gamma_oracle },
        Criterion { id: 9, title: "good direction certificate", budget: secs(10), check: good_directions },
        Criterion { id: 10, title: "crowd non-overlap and symmetry", budget: secs(60), check: crowd_symmetry },
        Criterion { id: 11, title: "N = 2 cross-check", budget: secs(10), check: two_disk_reduction },
        Criterion { id: 12, title: "determinism", budget: secs(60), check: determinism },
    ]
}

/// Runs every criterion in order, handing each result to `report` as soon
/// as it is available.
pub fn run_all(mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    criteria()
        .iter()
        .map(|c| {
            let r = c.run();
            report(&r);
            r
        })
        .collect()
}

fn half_line() -> HalfSpace {
    HalfSpace::half_line(0.0)
}

fn half_line_oracle() -> CliResult<Check> {
    let grid = TimeGrid::new(1.0, 1e-3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        // random knots joined linearly, starting inside the half-line
        let start: f64 = rng.random_range(0.0..1.0);
        let m = rng.random_range(2..=20);
        let knots: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let l: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&t| {
                let s = t * m as f64;
                let k = (s.floor() as usize).min(m - 1);
                let left = if k == 0 { start } else { knots[k - 1] };
                left + (s - k as f64) * (knots[k] - left)
            })
            .collect();
        let sol = catching_up(&half_line(), &Driver::scalar(grid, &l)?, &point(&[start]))?;
        let oracle = halfline_reflection_oracle(&l, start);
        for (x, o) in sol.x.iter().zip(&oracle) {
            worst = worst.max((x[0] - o).abs());
        }
    }
    verdict(worst <= 1e-14, format!("max deviation {worst:e} over 100 drivers"))
}

fn discard_ok(discarded: usize, total: usize) -> bool {
    (discarded as f64) < MAX_DISCARD_RATE * total as f64
}

fn reflected_bm_law() -> CliResult<Check> {
    let grid = TimeGrid::new(1.0, 1e-3)?;
    let fields = FieldPair::constant(point(&[0.0]), point(&[1.0]));
    let s = monte_carlo(&half_line(), &fields, &point(&[0.0]), grid, 100_000, 2, |sol| {
        sol.x.last().unwrap()[0]
    })?;
    let target = (2.0 / std::f64::consts::PI).sqrt();
    let z = (s.mean - target) / s.std_error;
    verdict(
        z.abs() <= 3.0 && discard_ok(s.discarded, 100_000),
        format!(
            "mean X(1) = {:.5} vs {target:.5}, standard error {:.2e}, {z:+.1} standard errors, {} discarded",
            s.mean, s.std_error, s.discarded
        ),
    )
}

fn pathwise_convergence() -> CliResult<Check> {
    let fields = FieldPair::constant(point(&[0.0]), point(&[1.0]));
    let seeds: Vec<u64> = (0..100).map(|i| sub_seed(3, i)).collect();
    let base = TimeGrid::new(1.0, 1.0 / 16.0)?;
    let study = pathwise_study(&half_line(), &fields, &point(&[0.0]), &seeds, base, 6)?;
    let passing = study.passing(1.2);
    verdict(
        passing >= 95 && discard_ok(study.discarded.len(), seeds.len()),
        format!(
            "{passing} of 100 seeds decrease with ratio >= 1.2 at every level, {} discarded",
            study.discarded.len()
        ),
    )
}

fn stability_scaling() -> CliResult<Check> {
    let grid = TimeGrid::new(1.0, 1e-3)?;
    let fields = FieldPair::constant(point(&[-1.0]), point(&[1.0]));
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let r = stability_sweep(&half_line(), &fields, &point(&[0.5]), &eps, 200, 4, grid)?;
    let estimates: Vec<String> = r.rows.iter().map(|row| format!("{:.3e}", row.estimate)).collect();
    let slope_ok = r.slope.is_some_and(|s| (0.8..=1.2).contains(&s));
    let total = 200 * eps.len();
    verdict(
        slope_ok && r.monotone_within(0.0) && discard_ok(r.discarded(), total),
        format!(
            "slope {}, L4 errors [{}], {} discarded",
            r.slope.map_or("undefined".into(), |s| format!("{s:.3}")),
            estimates.join(", "),
            r.discarded()
        ),
    )
}

fn moving_wall() -> CliResult<Check> {
    let set = HalfSpace::moving(point(&[1.0]), 0.0, 1.0)?;
    let mut worst_ratio: f64 = 0.0;
    for k in 4..=10 {
        let h = 2f64.powi(-k);
        let grid = TimeGrid::new(1.0, h)?;
        let sol = catching_up(&set, &Driver::from_fn(grid, |_| point(&[0.0])), &point(&[0.0]))?;
        let err = sol
            .times
            .iter()
            .zip(&sol.x)
            .map(|(t, x)| (x[0] - t).abs())
            .fold(0.0, f64::max);
        worst_ratio = worst_ratio.max(err / h);
    }
    verdict(
        worst_ratio <= 1.0,
        format!("max sup error / h = {worst_ratio:.3} over h = 2^-4 .. 2^-10"),
    )
}

fn bv_uniformity() -> CliResult<Check> {
    let h = 1.0 / 64.0;
    let finest = TimeGrid::new(1.0, h / 4.0)?;
    let driver = Driver::from_fn(finest, |t| point(&[(5.0 * t).sin()]));
    let rows = refine_compare(&half_line(), &driver, &point(&[0.0]), &[h, h / 2.0, h / 4.0])?;
    let tv: Vec<f64> = rows.iter().map(|r| r.tv_k).collect();
    let hi = tv.iter().copied().fold(0.0, f64::max);
    let lo = tv.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / hi;
    verdict(
        spread < 0.1,
        format!("tv_k(T) = {tv:.4?}, relative spread {spread:.2e}"),
    )
}

fn hypomonotonicity() -> CliResult<Check> {
    let set = BallExterior::new(point(&[0.0, 0.0]), 1.0)?;
    let window = Window::cube(2, 3.0)?;
    let honest = hypomonotonicity_check(&set, 0.0, 1.0, 10_000, 7, &window, 1e-12)?;
    let claimed = hypomonotonicity_check(&set, 0.0, 10.0, 10_000, 7, &window, 1e-12)?;
    verdict(
        honest.passed() && honest.triples == 10_000 && claimed.violation_count >= 1,
        format!(
            "eta = 1: {} violations in {} triples; claimed eta = 10: {} violations",
            honest.violation_count, honest.triples, claimed.violation_count
        ),
    )
}

fn gamma_oracle() -> CliResult<Check> {
    let normals = [point(&[1.0, 0.0]), point(&[0.0, 1.0])];
    let gamma = gamma_estimate(&normals)?;
    // dense grid over the weights of the two-point simplex
    let n = 1_000_000;
    let min_norm = (0..=n)
        .map(|k| {
            let a = k as f64 / n as f64;
            (&normals[0] * a + &normals[1] * (1.0 - a)).norm()
        })
        .fold(f64::INFINITY, f64::min);
    let brute = 1.0 / min_norm;
    let antipodal = gamma_estimate(&[point(&[1.0, 0.0]), point(&[-1.0, 0.0])]);
    let fails = matches!(antipodal, Err(Error::ReverseTriangleFails { .. }));
    verdict(
        (gamma - 2f64.sqrt()).abs() <= 1e-6 && (gamma - brute).abs() <= 1e-6 && fails,
        format!(
            "gamma = {gamma:.9}, brute force {brute:.9}; antipodal normals {}",
            if fails { "report R_rho fails" } else { "were not rejected" }
        ),
    )
}

fn disk_set(q: &[f64]) -> CliResult<ConstraintSet> {
    let n = q.len() / 2;
    let mut constraints = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            constraints.push(SmoothConstraint::DiskContact {
                i,
                j,
                ri: Radius::Constant(1.0),
                rj: Radius::Constant(1.0),
            });
        }
    }
    Ok(ConstraintSet::new(q.len(), constraints, 1.0)?.with_activation(1e-6)?)
}

fn good_directions() -> CliResult<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_margin = f64::INFINITY;
    for _ in 0..100 {
        // unit disks touching disk 0 at the origin, at least 1.2 rad apart
        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut q = vec![0.0, 0.0, 2.0 * a.cos(), 2.0 * a.sin()];
        if rng.random_bool(0.5) {
            let b = a + rng.random_range(1.2..std::f64::consts::TAU - 1.2);
            q.extend([2.0 * b.cos(), 2.0 * b.sin()]);
        }
        let set = disk_set(&q)?;
        let x = Point::from_vec(q);
        let d = good_direction(&set, 0.0, &x)?;
        let gradients = d
            .active
            .indices
            .iter()
            .map(|&i| set.constraints()[i].gradient(0.0, &x))
            .collect::<Result<Vec<_>, _>>()?;
        let alpha = gradients.iter().map(|g| g.norm()).fold(f64::INFINITY, f64::min).min(set.alpha());
        let beta = gradients.iter().map(|g| g.norm()).fold(0.0, f64::max).max(set.beta());
        let unit: Vec<Point> = gradients.iter().map(|g| g.normalize()).collect();
        let gamma = gamma_estimate(&unit)?;
        let p = set.constraints().len() as f64;
        let nu = alpha * alpha / (4.0 * gamma * gamma * p * beta);
        for g in &gradients {
            worst_margin = worst_margin.min(g.dot(&d.u) - nu);
        }
        if (d.u.norm() - 1.0).abs() > 1e-12 {
            return verdict(false, "returned direction is not a unit vector".into());
        }
    }
    verdict(
        worst_margin >= 0.0,
        format!("min over configurations of <grad g_i, u> - nu = {worst_margin:.3e}"),
    )
}

fn head_on(noise: Vec<[f64; 2]>) -> CrowdConfig {
    CrowdConfig {
        disks: vec![
            Disk { center: [-1.0, 0.0], radius: Radius::Constant(1.0) },
            Disk { center: [1.0, 0.0], radius: Radius::Constant(1.0) },
        ],
        velocity: VelocityField::Constant { velocities: vec![[1.0, 0.0], [-1.0, 0.0]] },
        noise,
        walls: Vec::new(),
        rho: None,
        horizon: 1.0,
        step: 1e-3,
    }
}

fn crowd_symmetry() -> CliResult<Check> {
    let still = simulate(&head_on(Vec::new()), 0)?;
    let q0 = still.positions[0].clone();
    let drift = still.positions.iter().map(|q| (q - &q0).norm()).fold(0.0, f64::max);
    let ok_still = still.is_complete() && still.len() == 1001 && drift <= 1e-10 && still.overall_min_gap() >= -1e-8;

    let noisy = head_on(vec![[0.05, 0.0], [-0.05, 0.0]]);
    let mut min_gap = f64::INFINITY;
    let mut com_drift: f64 = 0.0;
    let mut complete = true;
    for seed in 0..100 {
        let traj = simulate(&noisy, seed)?;
        complete &= traj.is_complete();
        min_gap = min_gap.min(traj.overall_min_gap());
        for w in traj.positions.windows(2) {
            let dx = (w[1][0] + w[1][2]) - (w[0][0] + w[0][2]);
            let dy = (w[1][1] + w[1][3]) - (w[0][1] + w[0][3]);
            com_drift = com_drift.max(0.5 * dx.hypot(dy));
        }
    }
    verdict(
        ok_still && complete && min_gap >= -1e-8 && com_drift <= 1e-10,
        format!(
            "sigma = 0: drift {drift:.1e}, min D {:.1e}; sigma = 0.05 over 100 seeds: min D {min_gap:.1e}, center-of-mass step change {com_drift:.1e}",
            still.overall_min_gap()
        ),
    )
}

fn two_disk_reduction() -> CliResult<Check> {
    let config = CrowdConfig {
        disks: vec![
            Disk { center: [-1.2, 0.0], radius: Radius::Constant(1.0) },
            Disk { center: [1.0, 0.0], radius: Radius::Constant(0.8) },
        ],
        velocity: VelocityField::Constant { velocities: vec![[0.7, 0.0], [-0.4, 0.0]] },
        noise: vec![[0.3, 0.0], [-0.2, 0.0]],
        walls: Vec::new(),
        rho: None,
        horizon: 1.0,
        step: 1e-3,
    };
    let grid = config.grid()?;
    let wall = HalfSpace::half_line(1.8);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let path = brownian_path(seed, grid);
        let traj = simulate_with_path(&config, &path)?;
        if !traj.is_complete() {
            return verdict(false, format!("seed {seed} aborted"));
        }
        let mut l = vec![point(&[2.2])];
        for (n, db) in path.increments().iter().enumerate() {
            let next = &l[n] + point(&[grid.step_len(n) * (-0.4 - 0.7) + (-0.2 - 0.3) * db]);
            l.push(next);
        }
        let driver = Driver::from_samples(grid, l, Provenance::StochasticIntegral)?;
        let reference = catching_up(&wall, &driver, &point(&[2.2]))?;
        for (q, x) in traj.positions.iter().zip(&reference.x) {
            worst = worst.max((q[2] - q[0] - x[0]).abs()).max(q[1].abs()).max(q[3].abs());
        }
    }
    verdict(worst <= 1e-12, format!("max deviation from the 1-D sweeping process {worst:.1e} over 20 seeds"))
}

fn determinism_scenarios() -> Vec<(&'static str, Value)> {
    let half_line = json!({"type": "half_line"});
    vec![
        (
            "crowd",
            json!({
                "schema_version": 1,
                "seed": 7,
                "scenario": {
                    "kind": "crowd",
                    "disks": [
                        {"center": [-1.0, 0.0], "radius": 1.0},
                        {"center": [1.0, 0.0], "radius": 1.0},
                        {"center": [0.0, 2.5], "radius": 0.5}
                    ],
                    "velocity": {"kind": "target_seeking", "targets": [[2.0, 0.0], [-2.0, 0.0], [0.0, -2.0]], "speed": 1.0},
                    "noise": [[0.05, 0.02], [-0.05, 0.01], [0.0, 0.05]],
                    "horizon": 1.0,
                    "step": 0.001
                }
            }),
        ),
        (
            "sde",
            json!({
                "schema_version": 1,
                "seed": 11,
                "scenario": {
                    "kind": "sde",
                    "set": half_line,
                    "fields": {"type": "constant", "drift": [-1.0], "diffusion": [1.0]},
                    "u0": [0.5],
                    "horizon": 1.0,
                    "step": 0.001,
                    "paths": 64,
                    "pathwise": {"levels": 4, "seeds": 16}
                }
            }),
        ),
        (
            "stability",
            json!({
                "schema_version": 1,
                "seed": 5,
                "scenario": {
                    "kind": "stability",
                    "set": half_line,
                    "fields": {"type": "constant", "drift": [-1.0], "diffusion": [1.0]},
                    "u0": [0.5],
                    "horizon": 1.0,
                    "step": 0.001,
                    "epsilons": [0.1, 0.05],
                    "paths": 100
                }
            }),
        ),
    ]
}

fn csv_outputs(dir: &Path, outputs: &[String]) -> CliResult<Vec<(String, Vec<u8>)>> {
    outputs
        .iter()
        .filter(|f| f.ends_with(".csv"))
        .map(|f| {
            let p = dir.join(f);
            fs::read(&p).map(|b| (f.clone(), b)).map_err(|e| CliError::io(&p, e))
        })
        .collect()
}

/// Each scenario runs three times: on the default thread pool, on a single
/// thread, and from the resolved configuration stored in the first run's
/// manifest. All CSV outputs must agree byte for byte.
fn determinism() -> CliResult<Check> {
    let tmp = tempfile::tempdir().map_err(|e| CliError::io(std::env::temp_dir(), e))?;
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut compared = 0;
    for (name, doc) in determinism_scenarios() {
        let file = tmp.path().join(format!("{name}.json"));
        fs::write(&file, doc.to_string()).map_err(|e| CliError::io(&file, e))?;
        let opts = |sub: &str| RunOptions {
            out_dir: tmp.path().join(format!("{name}-{sub}")),
            ..RunOptions::default()
        };
        let first = run(&file, &opts("a"))?;
        let second = single.install(|| run(&file, &opts("b")))?;
        let replay_file = tmp.path().join(format!("{name}-replay.json"));
        fs::write(&replay_file, first.manifest.config.to_string()).map_err(|e| CliError::io(&replay_file, e))?;
        let third = run(&replay_file, &opts("c"))?;
        if first.exit_code != 0 || second.exit_code != 0 || third.exit_code != 0 {
            return verdict(false, format!("{name} scenario did not complete"));
        }
        let a = csv_outputs(&opts("a").out_dir, &first.manifest.outputs)?;
        let b = csv_outputs(&opts("b").out_dir, &second.manifest.outputs)?;
        let c = csv_outputs(&opts("c").out_dir, &third.manifest.outputs)?;
        if a.is_empty() || a != b || a != c {
            return verdict(false, format!("{name} outputs differ between runs"));
        }
        compared += a.len();
    }
    verdict(true, format!("{compared} CSV files identical across thread counts and manifest replays"))
}
