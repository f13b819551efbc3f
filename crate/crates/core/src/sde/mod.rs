//! Stochastic sweeping process: seeded Brownian paths, the projected Euler
//! scheme and Monte Carlo studies built on it.

mod brownian;
mod fields;
mod scheme;
mod studies;

pub use brownian::{brownian_path, brownian_refine, sub_seed, BrownianPath};
pub use fields::{FieldPair, VectorField};
pub use scheme::euler_project;
pub use studies::{
    monte_carlo, pathwise_convergence, pathwise_study, stability_sweep, write_convergence_csv,
    write_sweep_csv,
    ConvergenceRow, ConvergenceTable, MonteCarloSummary, PathwiseStudy, StabilityReport,
    SweepRow, MIN_PATHS_FOR_POWER,
};
