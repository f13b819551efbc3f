use std::io::Write;

use rayon::prelude::*;

use super::{brownian_path, brownian_refine, euler_project, sub_seed, BrownianPath, FieldPair};
use crate::geometry::MovingSet;
use crate::skorohod::SkorohodSolution;
use crate::{Error, Point, Result, TimeGrid};

/// Below this many paths a sweep report carries a statistical-power warning.
pub const MIN_PATHS_FOR_POWER: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub sup_error: f64,
}

/// Errors of one Brownian path at successive refinement levels, coarsest
/// first, each measured against the finest level at shared nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub seed: u64,
    pub rows: Vec<ConvergenceRow>,
    pub finest_step: f64,
}

impl ConvergenceTable {
    /// `error(level) / error(level + 1)`, infinite when the finer error is 0.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| {
                if w[1].sup_error == 0.0 {
                    if w[0].sup_error == 0.0 { 1.0 } else { f64::INFINITY }
                } else {
                    w[0].sup_error / w[1].sup_error
                }
            })
            .collect()
    }

    /// Every consecutive ratio is at least `min_ratio`.
    pub fn decreases_with_ratio(&self, min_ratio: f64) -> bool {
        self.ratios().iter().all(|&r| r >= min_ratio)
    }
}

fn sup_distance(a: &[Point], b: &[Point], stride: usize) -> f64 {
    a.iter()
        .enumerate()
        .map(|(n, x)| (x - &b[n * stride]).norm())
        .fold(0.0, f64::max)
}

/// Runs the scheme on one Brownian path at `base_grid` and on `levels`
/// successive bridge refinements of it, reporting each coarser level's
/// sup-node error against the finest one.
pub fn pathwise_convergence<S: MovingSet + ?Sized>(
    set: &S,
    fields: &FieldPair,
    u0: &Point,
    seed: u64,
    base_grid: TimeGrid,
    levels: usize,
) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(Error::Config(format!("pathwise convergence needs at least 3 levels, got {levels}")));
    }
    let mut paths = vec![brownian_path(seed, base_grid)];
    for _ in 0..levels {
        let next = brownian_refine(paths.last().unwrap())?;
        paths.push(next);
    }
    let solutions = paths
        .iter()
        .map(|p| euler_project(set, fields, u0, p))
        .collect::<Result<Vec<_>>>()?;
    let finest = solutions.last().unwrap();
    let rows = solutions[..levels]
        .iter()
        .enumerate()
        .map(|(level, sol)| ConvergenceRow {
            h: paths[level].grid().step(),
            sup_error: sup_distance(&sol.x, &finest.x, 1 << (levels - level)),
        })
        .collect();
    Ok(ConvergenceTable {
        seed,
        rows,
        finest_step: paths[levels].grid().step(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathwiseStudy {
    pub tables: Vec<ConvergenceTable>,
    /// Seeds whose path hit a step-too-large event at some level.
    pub discarded: Vec<u64>,
}

impl PathwiseStudy {
    pub fn passing(&self, min_ratio: f64) -> usize {
        self.tables.iter().filter(|t| t.decreases_with_ratio(min_ratio)).count()
    }
}

/// [`pathwise_convergence`] over many seeds, in parallel, reported in seed order.
pub fn pathwise_study<S: MovingSet + ?Sized>(
    set: &S,
    fields: &FieldPair,
    u0: &Point,
    seeds: &[u64],
    base_grid: TimeGrid,
    levels: usize,
) -> Result<PathwiseStudy> {
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&s| pathwise_convergence(set, fields, u0, s, base_grid, levels))
        .collect();
    let mut study = PathwiseStudy {
        tables: Vec::new(),
        discarded: Vec::new(),
    };
    for (&seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(t) => study.tables.push(t),
            Err(e) if e.is_step_too_large() => study.discarded.push(seed),
            Err(e) => return Err(e),
        }
    }
    Ok(study)
}

/// One row of a sweep: a parameter value (epsilon or h) and its estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub parameter: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of log-estimate against log-epsilon; `None` when
    /// some estimate is zero or fewer than two rows exist.
    pub slope: Option<f64>,
    pub warning: Option<String>,
}

impl StabilityReport {
    /// Estimates do not increase down the epsilon list, allowing `k`
    /// combined standard errors of slack between neighbours.
    pub fn monotone_within(&self, k: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].estimate <= w[0].estimate + k * (w[0].std_error + w[1].std_error))
    }

    pub fn discarded(&self) -> usize {
        self.rows.iter().map(|r| r.discarded).sum()
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Runs `per_path` on independent paths `0..n_paths` in parallel. Paths that
/// fail with step-too-large are counted and dropped; values come back in
/// path-index order.
fn run_paths<T, F>(n_paths: usize, master_seed: u64, grid: TimeGrid, per_path: F) -> Result<(Vec<T>, usize)>
where
    T: Send,
    F: Fn(&BrownianPath) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..n_paths)
        .into_par_iter()
        .map(|i| per_path(&brownian_path(sub_seed(master_seed, i as u64), grid)))
        .collect();
    let mut values = Vec::with_capacity(n_paths);
    let mut discarded = 0;
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(e) if e.is_step_too_large() => discarded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((values, discarded))
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E[sup_t |X^eps - X|^4]^{1/4}` for `sigma^eps = eps * sigma_base`, where
/// `X` is the noiseless catching-up trajectory.
///
/// Every epsilon reuses the same path seeds, so the estimates share their
/// random numbers.
#[allow(clippy::too_many_arguments)]
pub fn stability_sweep<S: MovingSet + ?Sized>(
    set: &S,
    fields: &FieldPair,
    u0: &Point,
    eps_list: &[f64],
    n_paths: usize,
    master_seed: u64,
    grid: TimeGrid,
) -> Result<StabilityReport> {
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Config("epsilon list must be nonempty and positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("epsilon list must be strictly decreasing".into()));
    }
    if n_paths == 0 {
        return Err(Error::Config("stability sweep needs at least one path".into()));
    }
    let limit = euler_project(set, &fields.without_noise(), u0, &BrownianPath::zero(grid))?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let scaled = fields.scale_diffusion(eps);
        let (sups, discarded) = run_paths(n_paths, master_seed, grid, |path| {
            let sol = euler_project(set, &scaled, u0, path)?;
            Ok(sup_distance(&sol.x, &limit.x, 1).powi(4))
        })?;
        let (m4, se4) = mean_and_error(&sups);
        let estimate = m4.powf(0.25);
        // delta method for m^(1/4)
        let std_error = if m4 > 0.0 { se4 / (4.0 * m4.powf(0.75)) } else { 0.0 };
        rows.push(SweepRow {
            parameter: eps,
            estimate,
            std_error,
            n_paths: sups.len(),
            discarded,
        });
    }
    let slope = if rows.iter().all(|r| r.estimate > 0.0 && r.estimate.is_finite()) {
        let pts: Vec<_> = rows.iter().map(|r| (r.parameter.ln(), r.estimate.ln())).collect();
        least_squares_slope(&pts)
    } else {
        None
    };
    let warning = (n_paths < MIN_PATHS_FOR_POWER).then(|| {
        format!("only {n_paths} paths per epsilon; estimates below {MIN_PATHS_FOR_POWER} paths have little statistical power")
    });
    Ok(StabilityReport { rows, slope, warning })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub discarded: usize,
}

/// Monte Carlo mean of `functional` over `n_paths` independent runs of the
/// projected Euler scheme.
pub fn monte_carlo<S, F>(
    set: &S,
    fields: &FieldPair,
    u0: &Point,
    grid: TimeGrid,
    n_paths: usize,
    master_seed: u64,
    functional: F,
) -> Result<MonteCarloSummary>
where
    S: MovingSet + ?Sized,
    F: Fn(&SkorohodSolution) -> f64 + Sync,
{
    let (values, discarded) = run_paths(n_paths, master_seed, grid, |path| {
        euler_project(set, fields, u0, path).map(|sol| functional(&sol))
    })?;
    let (mean, std_error) = mean_and_error(&values);
    Ok(MonteCarloSummary {
        mean,
        std_error,
        n_paths: values.len(),
        discarded,
    })
}

/// Writes `<parameter>, estimate, std_error, n_paths, discarded`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], parameter: &str, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([parameter, "estimate", "std_error", "n_paths", "discarded"])?;
    for r in rows {
        w.write_record([
            r.parameter.to_string(),
            r.estimate.to_string(),
            r.std_error.to_string(),
            r.n_paths.to_string(),
            r.discarded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `seed, h, sup_error` for every table, in order.
pub fn write_convergence_csv<W: Write>(tables: &[ConvergenceTable], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "h", "sup_error"])?;
    for t in tables {
        for r in &t.rows {
            w.write_record([t.seed.to_string(), r.h.to_string(), r.sup_error.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
