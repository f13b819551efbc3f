//! Non-overlapping disks with spontaneous velocities and a stochastic
//! perturbation, stepped by projection onto the linearized feasible set.
//!
//! Positions are stored as one vector `q = (x_1, y_1, ..., x_N, y_N)`.
//! Walls are an extension of the pairwise model: any extra
//! [`SmoothConstraint`] is linearized into the same polyhedron.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cones::{polyhedron_project, Polyhedron, MAX_GENERATORS};
use crate::geometry::{Radius, SmoothConstraint, DEFAULT_BOUNDARY_TOLERANCE};
use crate::sde::{brownian_path, BrownianPath};
use crate::{Error, Point, Result, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: Radius,
}

/// Spontaneous velocity catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityField {
    /// A fixed velocity per disk.
    Constant { velocities: Vec<[f64; 2]> },
    /// Each disk heads for its target at `speed`, slowing down linearly
    /// inside `slowdown` of it.
    TargetSeeking {
        targets: Vec<[f64; 2]>,
        speed: f64,
        #[serde(default = "default_slowdown")]
        slowdown: f64,
    },
    /// Motion along +x at `speed` with a pull of strength `pull` towards the
    /// line `y = center`, saturated at `half_width` off the line.
    Corridor {
        speed: f64,
        center: f64,
        half_width: f64,
        pull: f64,
    },
}

fn default_slowdown() -> f64 {
    1.0
}

impl VelocityField {
    pub fn evaluate(&self, q: &Point) -> Point {
        let n = q.len() / 2;
        let mut u = Point::zeros(q.len());
        for i in 0..n {
            let (x, y) = (q[2 * i], q[2 * i + 1]);
            let v = match self {
                VelocityField::Constant { velocities } => velocities[i],
                VelocityField::TargetSeeking {
                    targets,
                    speed,
                    slowdown,
                } => {
                    let (dx, dy) = (targets[i][0] - x, targets[i][1] - y);
                    let scale = speed / dx.hypot(dy).max(*slowdown);
                    [scale * dx, scale * dy]
                }
                VelocityField::Corridor {
                    speed,
                    center,
                    half_width,
                    pull,
                } => [*speed, -pull * (y - center).clamp(-half_width, *half_width)],
            };
            u[2 * i] = v[0];
            u[2 * i + 1] = v[1];
        }
        u
    }

    /// Bound on the speed of any single disk.
    pub fn speed_bound(&self) -> f64 {
        match self {
            VelocityField::Constant { velocities } => velocities
                .iter()
                .map(|v| v[0].hypot(v[1]))
                .fold(0.0, f64::max),
            VelocityField::TargetSeeking { speed, .. } => speed.abs(),
            VelocityField::Corridor {
                speed,
                half_width,
                pull,
                ..
            } => speed.hypot(pull * half_width),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let ok = match self {
            VelocityField::Constant { velocities } => {
                velocities.len() == n && velocities.iter().flatten().all(|v| v.is_finite())
            }
            VelocityField::TargetSeeking {
                targets,
                speed,
                slowdown,
            } => {
                targets.len() == n
                    && targets.iter().flatten().all(|v| v.is_finite())
                    && speed.is_finite()
                    && *slowdown > 0.0
            }
            VelocityField::Corridor {
                speed,
                center,
                half_width,
                pull,
            } => speed.is_finite() && center.is_finite() && *half_width >= 0.0 && pull.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid velocity field for {n} disks")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrowdConfig {
    pub disks: Vec<Disk>,
    pub velocity: VelocityField,
    /// Per-disk noise vectors multiplying the scalar Brownian increment;
    /// no noise when empty.
    #[serde(default)]
    pub noise: Vec<[f64; 2]>,
    #[serde(default)]
    pub walls: Vec<SmoothConstraint>,
    /// Activation threshold; see [`CrowdConfig::activation`] for the default.
    #[serde(default)]
    pub rho: Option<f64>,
    pub horizon: f64,
    pub step: f64,
}

impl CrowdConfig {
    pub fn len(&self) -> usize {
        self.disks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disks.is_empty()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.step)
    }

    pub fn initial_positions(&self) -> Point {
        Point::from_iterator(2 * self.len(), self.disks.iter().flat_map(|d| d.center))
    }

    pub fn radius(&self, i: usize, t: f64) -> f64 {
        self.disks[i].radius.at(t)
    }

    pub fn velocity_at(&self, q: &Point) -> Point {
        self.velocity.evaluate(q)
    }

    pub fn noise_vector(&self) -> Point {
        if self.noise.is_empty() {
            return Point::zeros(2 * self.len());
        }
        Point::from_iterator(2 * self.len(), self.noise.iter().flatten().copied())
    }

    /// The configured threshold, or `2 (h L + 4 s sqrt(h))` where `L` bounds
    /// how fast any pair gap can close and `s` bounds the relative noise.
    pub fn activation(&self) -> f64 {
        if let Some(rho) = self.rho {
            return rho;
        }
        let rate = self
            .disks
            .iter()
            .map(|d| d.radius.lipschitz())
            .fold(0.0, f64::max);
        let gap_rate = 2.0 * self.velocity.speed_bound() + 2.0 * rate;
        let sigma = 2.0 * self.noise.iter().map(|s| s[0].hypot(s[1])).fold(0.0, f64::max);
        2.0 * (self.step * gap_rate + 4.0 * sigma * self.step.sqrt())
    }

    /// All disk pairs followed by the walls, as constraint functions.
    pub fn constraints(&self) -> Vec<SmoothConstraint> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * (n - 1) / 2 + self.walls.len());
        for i in 0..n {
            for j in i + 1..n {
                out.push(SmoothConstraint::DiskContact {
                    i,
                    j,
                    ri: self.disks[i].radius,
                    rj: self.disks[j].radius,
                });
            }
        }
        out.extend(self.walls.iter().cloned());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Config("crowd needs at least one disk".into()));
        }
        self.grid()?;
        for (i, d) in self.disks.iter().enumerate() {
            if !d.center.iter().all(|c| c.is_finite()) {
                return Err(Error::Config(format!("disk {i} has a non-finite center")));
            }
            let r_min = d.radius.min_over(self.horizon);
            if !(r_min > 0.0 && d.radius.at(0.0).is_finite() && d.radius.lipschitz().is_finite()) {
                return Err(Error::Config(format!(
                    "disk {i} radius must stay positive on [0, {}]",
                    self.horizon
                )));
            }
        }
        self.velocity.validate(n)?;
        if !self.noise.is_empty() && self.noise.len() != n {
            return Err(Error::Config(format!("noise has {} entries for {n} disks", self.noise.len())));
        }
        if !self.noise.iter().flatten().all(|s| s.is_finite()) {
            return Err(Error::Config("noise amplitudes must be finite".into()));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::Config(format!("activation threshold must be positive, got {rho}")));
            }
        }
        for w in &self.walls {
            w.validate(2 * n, self.horizon)?;
        }
        let q0 = self.initial_positions();
        for c in self.constraints() {
            let g = c.value(0.0, &q0);
            if g < -DEFAULT_BOUNDARY_TOLERANCE {
                return Err(Error::Config(format!("initial configuration violates {c:?} by {}", -g)));
            }
        }
        Ok(())
    }
}

/// `D_ij(q, t) = |q_i - q_j| - r_i(t) - r_j(t)` and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactConstraint {
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub gradient: Point,
}

/// Pairs `i < j` with `D_ij(q, t) <= rho`.
pub fn contact_constraints(config: &CrowdConfig, q: &Point, t: f64, rho: f64) -> Result<Vec<ContactConstraint>> {
    let n = config.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let c = SmoothConstraint::DiskContact {
                i,
                j,
                ri: config.disks[i].radius,
                rj: config.disks[j].radius,
            };
            let value = c.value(t, q);
            if value <= rho {
                out.push(ContactConstraint {
                    i,
                    j,
                    value,
                    gradient: c.gradient(t, q)?,
                });
            }
        }
    }
    Ok(out)
}

/// Smallest pair gap, `+inf` for a single disk.
pub fn min_gap(config: &CrowdConfig, q: &Point, t: f64) -> f64 {
    let n = config.len();
    let mut m = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let d = (q[2 * i] - q[2 * j]).hypot(q[2 * i + 1] - q[2 * j + 1]);
            m = m.min(d - config.radius(i, t) - config.radius(j, t));
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrowdStep {
    pub q: Point,
    pub predicted: Point,
    /// Number of linearized rows (pairs plus walls) in the polyhedron.
    pub active: usize,
}

/// The polyhedron `Q~(t, q)` built from the pairs and walls with value at
/// most `rho`, or `None` when nothing is active.
pub fn linearized_set(config: &CrowdConfig, q: &Point, t: f64, rho: f64) -> Result<Option<Polyhedron>> {
    let mut rows: Vec<(Point, f64)> = contact_constraints(config, q, t, rho)?
        .into_iter()
        .map(|c| {
            let b = c.gradient.dot(q) - c.value;
            (c.gradient, b)
        })
        .collect();
    for w in &config.walls {
        let value = w.value(t, q);
        if value <= rho {
            let a = w.gradient(t, q)?;
            let b = a.dot(q) - value;
            rows.push((a, b));
        }
    }
    if rows.is_empty() {
        return Ok(None);
    }
    if rows.len() > MAX_GENERATORS {
        return Err(Error::Config(format!(
            "{} active constraints exceed the limit of {MAX_GENERATORS}; lower rho or the step",
            rows.len()
        )));
    }
    Polyhedron::new(rows).map(Some)
}

/// One step from `(t_n, q_n)`: predict `q_n + h U(q_n) + sigma dB`, then
/// project onto `Q~(t_n + h, q_n)`.
pub fn crowd_step(config: &CrowdConfig, q: &Point, t: f64, h: f64, db: f64) -> Result<CrowdStep> {
    let mut predicted = q.clone();
    predicted.axpy(h, &config.velocity_at(q), 1.0);
    predicted.axpy(db, &config.noise_vector(), 1.0);
    match linearized_set(config, q, t + h, config.activation())? {
        None => Ok(CrowdStep {
            q: predicted.clone(),
            predicted,
            active: 0,
        }),
        Some(poly) => {
            let proj = polyhedron_project(&predicted, &poly)?;
            Ok(CrowdStep {
                q: proj.point,
                predicted,
                active: poly.len(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// The step into `node` failed; the trajectory stops at `node - 1`.
    Aborted { node: usize, error: Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrowdTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
    pub min_gap: Vec<f64>,
    /// Rows in the polyhedron of the step that produced each node.
    pub active: Vec<usize>,
    /// Accumulated projection displacement `sum |q_{n+1} - p_{n+1}|`.
    pub cumulative_k: Vec<f64>,
    pub status: RunStatus,
}

impl CrowdTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn overall_min_gap(&self) -> f64 {
        self.min_gap.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `t, x_1, y_1, ..., x_N, y_N, min_D, active_pairs`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let n = self.positions.first().map_or(0, |q| q.len() / 2);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for i in 1..=n {
            header.push(format!("x_{i}"));
            header.push(format!("y_{i}"));
        }
        header.push("min_D".into());
        header.push("active_pairs".into());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.positions[k].iter().map(f64::to_string));
            row.push(self.min_gap[k].to_string());
            row.push(self.active[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs [`crowd_step`] along a Brownian path whose grid must match the
/// configuration. Step failures end the run with a partial trajectory.
pub fn simulate_with_path(config: &CrowdConfig, path: &BrownianPath) -> Result<CrowdTrajectory> {
    config.validate()?;
    let grid = config.grid()?;
    if *path.grid() != grid {
        return Err(Error::Config("Brownian path grid differs from the crowd grid".into()));
    }
    let q0 = config.initial_positions();
    let mut traj = CrowdTrajectory {
        times: vec![0.0],
        min_gap: vec![min_gap(config, &q0, 0.0)],
        positions: vec![q0],
        active: vec![0],
        cumulative_k: vec![0.0],
        status: RunStatus::Completed,
    };
    for (n, &db) in path.increments().iter().enumerate() {
        let t = grid.node(n);
        let t_next = grid.node(n + 1);
        match crowd_step(config, &traj.positions[n], t, t_next - t, db) {
            Ok(step) => {
                let k = traj.cumulative_k[n] + (&step.q - &step.predicted).norm();
                traj.min_gap.push(min_gap(config, &step.q, t_next));
                traj.times.push(t_next);
                traj.positions.push(step.q);
                traj.active.push(step.active);
                traj.cumulative_k.push(k);
            }
            Err(e) => {
                traj.status = RunStatus::Aborted {
                    node: n + 1,
                    error: e.at_node(n + 1),
                };
                break;
            }
        }
    }
    Ok(traj)
}

pub fn simulate(config: &CrowdConfig, seed: u64) -> Result<CrowdTrajectory> {
    let grid = config.grid()?;
    simulate_with_path(config, &brownian_path(seed, grid))
}

/// Exact projection onto `{ |q_1 - q_2| >= r_1 + r_2 }` for two disks:
/// keeps the midpoint and pushes the centers apart along their axis.
pub fn two_disk_projection(p: &Point, separation: f64) -> Result<Point> {
    if p.len() != 4 {
        return Err(Error::Config("two-disk projection needs exactly two disks".into()));
    }
    let (dx, dy) = (p[0] - p[2], p[1] - p[3]);
    let d = dx.hypot(dy);
    if d >= separation {
        return Ok(p.clone());
    }
    if d == 0.0 {
        return Err(Error::Degenerate("coincident centers in two-disk projection".into()));
    }
    let (mx, my) = (0.5 * (p[0] + p[2]), 0.5 * (p[1] + p[3]));
    let s = 0.5 * separation / d;
    Ok(Point::from_vec(vec![mx + s * dx, my + s * dy, mx - s * dx, my - s * dy]))
}
