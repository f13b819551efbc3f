//! Deterministic Skorohod problem: the catching-up scheme, its verifiers and
//! the half-line oracle.

use std::io::Write;

use crate::geometry::{proximal_normal_test, MovingSet};
use crate::{Error, Point, Result, TimeGrid};

/// Where a driver's samples came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Sampled,
    StochasticIntegral,
}

/// A continuous driver `l` sampled at the nodes of a grid, linear between
/// nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Driver {
    grid: TimeGrid,
    samples: Vec<Point>,
    provenance: Provenance,
}

impl Driver {
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Point) -> Self {
        Driver {
            samples: grid.nodes().into_iter().map(f).collect(),
            grid,
            provenance: Provenance::Analytic,
        }
    }

    pub fn from_samples(grid: TimeGrid, samples: Vec<Point>, provenance: Provenance) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Config(format!(
                "driver has {} samples for a grid of {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        let dim = samples[0].len();
        if samples.iter().any(|s| s.len() != dim || s.iter().any(|v| !v.is_finite())) {
            return Err(Error::Config("driver samples must be finite with a common dimension".into()));
        }
        Ok(Driver {
            grid,
            samples,
            provenance,
        })
    }

    /// Scalar driver from plain values.
    pub fn scalar(grid: TimeGrid, values: &[f64]) -> Result<Self> {
        let samples = values.iter().map(|&v| Point::from_element(1, v)).collect();
        Driver::from_samples(grid, samples, Provenance::Sampled)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    /// Piecewise-linear interpolation.
    pub fn value_at(&self, t: f64) -> Point {
        let t = t.clamp(0.0, self.grid.horizon());
        let n = ((t / self.grid.step()).floor() as usize).min(self.grid.steps() - 1);
        let (t0, t1) = (self.grid.node(n), self.grid.node(n + 1));
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        &self.samples[n] * (1.0 - w) + &self.samples[n + 1] * w
    }

    /// The same driver seen on a dyadic coarsening of its grid.
    pub fn restrict(&self, coarse: &TimeGrid) -> Result<Driver> {
        let ratio = self.grid.coarsening_ratio(coarse).ok_or_else(|| {
            Error::Config(format!(
                "grid with step {} is not a dyadic coarsening of step {}",
                coarse.step(),
                self.grid.step()
            ))
        })?;
        Ok(Driver {
            grid: *coarse,
            samples: self.samples.iter().step_by(ratio).cloned().collect(),
            provenance: self.provenance,
        })
    }

    /// Discrete total variation of the samples.
    pub fn total_variation(&self) -> f64 {
        self.samples.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
    }
}

/// Sampled pair `(x, k)` with `x + k = l` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SkorohodSolution {
    pub times: Vec<f64>,
    pub x: Vec<Point>,
    pub k: Vec<Point>,
    /// Driver samples `l(t_n)`.
    pub driver: Vec<Point>,
    /// Accumulated `sum |k(t_{m+1}) - k(t_m)|` up to each node.
    pub tv_k: Vec<f64>,
    /// Whether the projection moved the predicted point at this node.
    pub contact: Vec<bool>,
}

impl SkorohodSolution {
    pub(crate) fn start(t0: f64, u0: Point, l0: Point) -> Self {
        let k0 = &l0 - &u0;
        SkorohodSolution {
            times: vec![t0],
            x: vec![u0],
            k: vec![k0],
            driver: vec![l0],
            tv_k: vec![0.0],
            contact: vec![false],
        }
    }

    /// Appends a node. `predicted` is the point that was projected to `x`.
    pub(crate) fn push(&mut self, t: f64, x: Point, l: Point, predicted: &Point, tol: f64) {
        let k = &l - &x;
        let dk = (&k - self.k.last().unwrap()).norm();
        let tv = self.tv_k.last().unwrap() + dk;
        self.contact.push((predicted - &x).norm() > tol);
        self.times.push(t);
        self.x.push(x);
        self.k.push(k);
        self.driver.push(l);
        self.tv_k.push(tv);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn final_tv(&self) -> f64 {
        *self.tv_k.last().unwrap()
    }

    /// CSV with columns `t, x_1..x_d, k_1..k_d, tv_k, contact`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(csv_header(self.dim()))?;
        for n in 0..self.len() {
            w.write_record(self.csv_row(n))?;
        }
        w.flush()?;
        Ok(())
    }

    pub(crate) fn csv_row(&self, n: usize) -> Vec<String> {
        let mut row = Vec::with_capacity(2 * self.dim() + 3);
        row.push(self.times[n].to_string());
        row.extend(self.x[n].iter().map(f64::to_string));
        row.extend(self.k[n].iter().map(f64::to_string));
        row.push(self.tv_k[n].to_string());
        row.push(u8::from(self.contact[n]).to_string());
        row
    }
}

pub(crate) fn csv_header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=dim).map(|i| format!("x_{i}")));
    h.extend((1..=dim).map(|i| format!("k_{i}")));
    h.push("tv_k".into());
    h.push("contact".into());
    h
}

/// Several solutions in one CSV, each row prefixed by its path index.
pub fn write_paths_csv<W: Write>(paths: &[(usize, SkorohodSolution)], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let dim = paths.first().map_or(1, |(_, s)| s.dim());
    let mut header = vec!["path".to_string()];
    header.extend(csv_header(dim));
    w.write_record(&header)?;
    for (index, sol) in paths {
        for n in 0..sol.len() {
            let mut row = vec![index.to_string()];
            row.extend(sol.csv_row(n));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Catching-up scheme: `x(t_{n+1}) = P_{C(t_{n+1})}(x(t_n) + l(t_{n+1}) - l(t_n))`.
pub fn catching_up<S: MovingSet + ?Sized>(set: &S, driver: &Driver, u0: &Point) -> Result<SkorohodSolution> {
    let grid = driver.grid();
    if u0.len() != set.dim() || driver.dim() != set.dim() {
        return Err(Error::Config("initial point, driver and set dimensions differ".into()));
    }
    let tol = set.boundary_tolerance();
    if set.distance(0.0, u0) > tol {
        return Err(Error::Config("initial point is not in C(0)".into()));
    }
    if set.distance(0.0, &driver.samples[0]) > tol {
        return Err(Error::Config("driver does not start in C(0)".into()));
    }
    let samples = driver.samples();
    let mut sol = SkorohodSolution::start(grid.node(0), u0.clone(), samples[0].clone());
    for n in 0..grid.steps() {
        let t_next = grid.node(n + 1);
        let predicted = &sol.x[n] + (&samples[n + 1] - &samples[n]);
        let x_next = set.project(t_next, &predicted).map_err(|e| e.at_node(n + 1))?;
        sol.push(t_next, x_next, samples[n + 1].clone(), &predicted, tol);
    }
    Ok(sol)
}

/// Discrete Skorohod map on `[0, inf)`: `x_{n+1} = max(0, x_n + l_{n+1} - l_n)`.
pub fn halfline_reflection_oracle(driver: &[f64], u0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(driver.len());
    let mut x = u0;
    out.push(x);
    for w in driver.windows(2) {
        x = (x + (w[1] - w[0])).max(0.0);
        out.push(x);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportViolation {
    pub node: usize,
    /// The increment of `k` happened at a node without boundary contact.
    pub off_boundary: bool,
    /// The increment direction is not a proximal normal at `x(t_n)`.
    pub not_normal: bool,
    pub increment: f64,
}

/// Checks that `k` only moves at contact nodes and along proximal normals.
pub fn support_check<S: MovingSet + ?Sized>(
    sol: &SkorohodSolution,
    set: &S,
    tol: f64,
) -> Vec<SupportViolation> {
    let eta = set.prox_constant();
    let mut report = Vec::new();
    for n in 1..sol.len() {
        let dk = &sol.k[n] - &sol.k[n - 1];
        let size = dk.norm();
        if size <= tol {
            continue;
        }
        let off_boundary = !sol.contact[n];
        let s = size.min(0.25 * eta);
        let probe_tol = tol.max(1e-12 * (1.0 + sol.x[n].norm()));
        let not_normal = !matches!(
            proximal_normal_test(set, sol.times[n], &sol.x[n], &dk, s, probe_tol),
            Ok(true)
        );
        if off_boundary || not_normal {
            report.push(SupportViolation {
                node: n,
                off_boundary,
                not_normal,
                increment: size,
            });
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub h: f64,
    pub sup_error: f64,
    pub tv_k: f64,
}

/// Writes `h, sup_error, tv_k`.
pub fn write_error_table<W: Write>(rows: &[ErrorRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "sup_error", "tv_k"])?;
    for r in rows {
        w.write_record([r.h.to_string(), r.sup_error.to_string(), r.tv_k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the scheme on dyadic coarsenings of the driver's grid and compares
/// each run with the run on the finest grid at the coarse nodes.
pub fn refine_compare<S: MovingSet + ?Sized>(
    set: &S,
    finest: &Driver,
    u0: &Point,
    steps: &[f64],
) -> Result<Vec<ErrorRow>> {
    let fine_grid = *finest.grid();
    let reference = catching_up(set, finest, u0)?;
    let mut hs = steps.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    hs.dedup();
    hs.into_iter()
        .map(|h| {
            let coarse = TimeGrid::new(fine_grid.horizon(), h)?;
            let ratio = fine_grid.coarsening_ratio(&coarse).ok_or_else(|| {
                Error::Config(format!("step {h} is not a dyadic coarsening of {}", fine_grid.step()))
            })?;
            let sol = catching_up(set, &finest.restrict(&coarse)?, u0)?;
            let sup_error = sol
                .x
                .iter()
                .enumerate()
                .map(|(n, x)| (x - &reference.x[n * ratio]).norm())
                .fold(0.0, f64::max);
            Ok(ErrorRow {
                h,
                sup_error,
                tv_k: sol.final_tv(),
            })
        })
        .collect()
}
