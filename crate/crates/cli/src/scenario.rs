//! Scenario files: a versioned JSON envelope around one experiment.

use serde::{Deserialize, Serialize};
use sweep_core::crowd::CrowdConfig;
use sweep_core::geometry::{
    dilate, BallExterior, ConstraintSet, HalfSpace, MovingSet, SmoothConstraint, Unconstrained,
    Window,
};
use sweep_core::sde::FieldPair;
use sweep_core::skorohod::Driver;
use sweep_core::{Point, TimeGrid};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Master seed; overridden by `--seed`.
    #[serde(default)]
    pub seed: u64,
    pub scenario: Scenario,
}

impl ScenarioFile {
    pub fn from_value(value: serde_json::Value) -> CliResult<Self> {
        let file: ScenarioFile =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid scenario: {e}")))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                file.schema_version
            )));
        }
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    Skorohod(SkorohodScenario),
    Sde(SdeScenario),
    Stability(StabilityScenario),
    Crowd(CrowdConfig),
    GeometryCheck(GeometryScenario),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Skorohod(_) => "skorohod",
            Scenario::Sde(_) => "sde",
            Scenario::Stability(_) => "stability",
            Scenario::Crowd(_) => "crowd",
            Scenario::GeometryCheck(_) => "geometry-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkorohodScenario {
    pub set: SetSpec,
    pub driver: DriverSpec,
    pub u0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    /// Coarser dyadic steps compared against `step` in an error table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refine: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeScenario {
    pub set: SetSpec,
    pub fields: FieldSpec,
    pub u0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    #[serde(default = "one")]
    pub paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathwise: Option<PathwiseSpec>,
}

fn one() -> usize {
    1
}

/// Bridge-refinement study: `seeds` paths refined `levels` times from `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathwiseSpec {
    pub levels: usize,
    pub seeds: usize,
    #[serde(default = "default_ratio")]
    pub min_ratio: f64,
}

fn default_ratio() -> f64 {
    1.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityScenario {
    pub set: SetSpec,
    pub fields: FieldSpec,
    pub u0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub epsilons: Vec<f64>,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryScenario {
    pub set: SetSpec,
    #[serde(default)]
    pub probes: Vec<Probe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypomonotonicity: Option<HypomonotonicitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hausdorff: Option<HausdorffSpec>,
    /// Time window over which constraint constants are derived.
    #[serde(default = "unit")]
    pub horizon: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypomonotonicitySpec {
    #[serde(default)]
    pub t: f64,
    /// Claimed constant; the set's own when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub samples: usize,
    pub window: Window,
    #[serde(default = "default_hypo_tolerance")]
    pub tolerance: f64,
}

fn default_hypo_tolerance() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HausdorffSpec {
    pub pairs: Vec<[f64; 2]>,
    pub window: Window,
    pub samples: usize,
}

/// Set catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    /// `[lower + rate t, inf)` on the real line.
    HalfLine {
        #[serde(default)]
        lower: f64,
        #[serde(default)]
        rate: f64,
    },
    #[serde(rename = "halfspace")]
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
        #[serde(default)]
        rate: f64,
    },
    BallExterior {
        center: Vec<f64>,
        radius: f64,
    },
    Unconstrained {
        dim: usize,
    },
    /// The complement of a union of open balls, handled as a constraint set.
    BallExteriorUnion {
        centers: Vec<Vec<f64>>,
        radii: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
    Dilated {
        base: Box<SetSpec>,
        radius: f64,
    },
    ConstraintSet {
        dim: usize,
        constraints: Vec<SmoothConstraint>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        activation: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
}

impl SetSpec {
    pub fn build(&self, horizon: f64) -> CliResult<Box<dyn MovingSet>> {
        Ok(match self {
            SetSpec::HalfLine { lower, rate } => Box::new(HalfSpace::moving(Point::from_element(1, 1.0), *lower, *rate)?),
            SetSpec::HalfSpace { normal, offset, rate } => {
                Box::new(HalfSpace::moving(Point::from_vec(normal.clone()), *offset, *rate)?)
            }
            SetSpec::BallExterior { center, radius } => {
                Box::new(BallExterior::new(Point::from_vec(center.clone()), *radius)?)
            }
            SetSpec::Unconstrained { dim } => {
                if *dim == 0 {
                    return Err(CliError::Config("unconstrained set needs dim >= 1".into()));
                }
                Box::new(Unconstrained { dim: *dim })
            }
            SetSpec::Dilated { base, radius } => Box::new(dilate(base.build(horizon)?, *radius)?),
            SetSpec::BallExteriorUnion { .. } | SetSpec::ConstraintSet { .. } => Box::new(self.constraint_set(horizon)?.expect("constraint spec")),
        })
    }

    /// The constraint set behind a `constraint_set` or `ball_exterior_union`
    /// entry, `None` otherwise.
    pub fn constraint_set(&self, horizon: f64) -> CliResult<Option<ConstraintSet>> {
        if let SetSpec::BallExteriorUnion { centers, radii, eta } = self {
            if centers.is_empty() || centers.len() != radii.len() {
                return Err(CliError::Config("ball_exterior_union needs one radius per center".into()));
            }
            let dim = centers[0].len();
            let constraints = centers
                .iter()
                .zip(radii)
                .map(|(c, &r)| SmoothConstraint::BallExterior { center: c.clone(), radius: r })
                .collect();
            let mut set = ConstraintSet::new(dim, constraints, horizon)?;
            if let Some(e) = eta {
                set = set.with_prox_constant(*e)?;
            }
            return Ok(Some(set));
        }
        let SetSpec::ConstraintSet {
            dim,
            constraints,
            activation,
            gamma,
            eta,
        } = self
        else {
            return Ok(None);
        };
        let mut set = ConstraintSet::new(*dim, constraints.clone(), horizon)?;
        if let Some(rho) = activation {
            set = set.with_activation(*rho)?;
        }
        if let Some(g) = gamma {
            set = set.with_gamma(*g)?;
        }
        if let Some(e) = eta {
            set = set.with_prox_constant(*e)?;
        }
        Ok(Some(set))
    }
}

/// Deterministic driver catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverSpec {
    /// `start + slope t`.
    Linear { start: Vec<f64>, slope: Vec<f64> },
    /// Scalar `start + amplitude sin(frequency t)`.
    Sine {
        #[serde(default)]
        start: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// Linear interpolation through `(times[k], values[k])`, constant
    /// outside the listed times.
    PiecewiseLinear { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl DriverSpec {
    pub fn build(&self, grid: TimeGrid) -> CliResult<Driver> {
        match self {
            DriverSpec::Linear { start, slope } => {
                if start.len() != slope.len() || start.is_empty() {
                    return Err(CliError::Config("linear driver start and slope lengths differ".into()));
                }
                let (a, b) = (Point::from_vec(start.clone()), Point::from_vec(slope.clone()));
                Ok(Driver::from_fn(grid, |t| &a + &b * t))
            }
            DriverSpec::Sine {
                start,
                amplitude,
                frequency,
            } => Ok(Driver::from_fn(grid, |t| {
                Point::from_element(1, start + amplitude * (frequency * t).sin())
            })),
            DriverSpec::PiecewiseLinear { times, values } => {
                let dim = values.first().map_or(0, Vec::len);
                if times.is_empty()
                    || times.len() != values.len()
                    || dim == 0
                    || values.iter().any(|v| v.len() != dim)
                    || times.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(CliError::Config(
                        "piecewise-linear driver needs increasing times and equally sized values".into(),
                    ));
                }
                let knots: Vec<Point> = values.iter().map(|v| Point::from_vec(v.clone())).collect();
                Ok(Driver::from_fn(grid, |t| interpolate(times, &knots, t)))
            }
        }
    }
}

fn interpolate(times: &[f64], knots: &[Point], t: f64) -> Point {
    if t <= times[0] {
        return knots[0].clone();
    }
    let k = times.partition_point(|&s| s <= t);
    if k == times.len() {
        return knots[k - 1].clone();
    }
    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
    &knots[k - 1] * (1.0 - w) + &knots[k] * w
}

/// Field catalogue; only constant pairs for now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { drift: Vec<f64>, diffusion: Vec<f64> },
}

impl FieldSpec {
    pub fn build(&self, dim: usize) -> CliResult<FieldPair> {
        match self {
            FieldSpec::Constant { drift, diffusion } => {
                if drift.len() != dim || diffusion.len() != dim {
                    return Err(CliError::Config(format!("constant fields must have dimension {dim}")));
                }
                if drift.iter().chain(diffusion).any(|v| !v.is_finite()) {
                    return Err(CliError::Config("field values must be finite".into()));
                }
                Ok(FieldPair::constant(Point::from_vec(drift.clone()), Point::from_vec(diffusion.clone())))
            }
        }
    }
}
