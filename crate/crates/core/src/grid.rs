use crate::{Error, Result};

/// Uniform partition `t_n = n h` of `[0, T]`, last node clamped to `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    step: f64,
    steps: usize,
}

// Absorbs representation error in `T / h` for steps such as 1e-3.
const STEP_COUNT_SLACK: f64 = 1e-9;

impl TimeGrid {
    pub fn new(horizon: f64, step: f64) -> Result<Self> {
        if !(horizon.is_finite() && step.is_finite()) {
            return Err(Error::Config("grid horizon and step must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::Config(format!("grid step must be positive, got {step}")));
        }
        if step > horizon {
            return Err(Error::Config(format!(
                "grid step {step} exceeds the horizon {horizon}"
            )));
        }
        let steps = (horizon / step - STEP_COUNT_SLACK).ceil().max(1.0) as usize;
        Ok(TimeGrid {
            horizon,
            step,
            steps,
        })
    }

    /// Grid with exactly `steps` equal steps.
    pub fn with_steps(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("grid needs at least one step".into()));
        }
        TimeGrid::new(horizon, horizon / steps as f64).map(|mut g| {
            g.steps = steps;
            g
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of steps; there are `steps() + 1` nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, n: usize) -> f64 {
        assert!(n <= self.steps, "node {n} out of range");
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.step
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.node(n)).collect()
    }

    /// Length of step `n`, i.e. `t_{n+1} - t_n`.
    pub fn step_len(&self, n: usize) -> f64 {
        self.node(n + 1) - self.node(n)
    }

    /// True when every step, including the last, has length `h`.
    pub fn is_uniform(&self) -> bool {
        (self.steps as f64 * self.step - self.horizon).abs() <= 1e-12 * self.horizon.max(1.0)
    }

    /// The grid with half the step. Shared nodes coincide exactly.
    pub fn refine(&self) -> Result<TimeGrid> {
        if !self.is_uniform() {
            return Err(Error::Config(format!(
                "grid with step {} does not divide horizon {}; cannot halve",
                self.step, self.horizon
            )));
        }
        Ok(TimeGrid {
            horizon: self.horizon,
            step: self.step / 2.0,
            steps: self.steps * 2,
        })
    }

    /// If `coarse` is a dyadic coarsening of `self`, returns the number of
    /// fine steps per coarse step.
    pub fn coarsening_ratio(&self, coarse: &TimeGrid) -> Option<usize> {
        if !self.is_uniform() || !coarse.is_uniform() {
            return None;
        }
        if (self.horizon - coarse.horizon).abs() > 1e-12 * self.horizon.max(1.0) {
            return None;
        }
        if coarse.steps == 0 || !self.steps.is_multiple_of(coarse.steps) {
            return None;
        }
        let ratio = self.steps / coarse.steps;
        ratio.is_power_of_two().then_some(ratio)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_increasing_and_end_at_horizon() {
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        assert_eq!(g.steps(), 1000);
        let nodes = g.nodes();
        assert_eq!(nodes[0], 0.0);
        assert_eq!(*nodes.last().unwrap(), 1.0);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ragged_last_step_is_clamped() {
        let g = TimeGrid::new(1.0, 0.3).unwrap();
        assert_eq!(g.steps(), 4);
        assert_eq!(g.node(4), 1.0);
        assert!((g.step_len(3) - 0.1).abs() < 1e-12);
        assert!(!g.is_uniform());
        assert!(g.refine().is_err());
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, -0.1).is_err());
        assert!(TimeGrid::new(1.0, 2.0).is_err());
        assert!(TimeGrid::new(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn refinement_shares_nodes_exactly() {
        let g = TimeGrid::new(1.0, 0.0625).unwrap();
        let f = g.refine().unwrap().refine().unwrap();
        assert_eq!(f.coarsening_ratio(&g), Some(4));
        for n in 0..=g.steps() {
            assert_eq!(g.node(n), f.node(4 * n));
        }
        let odd = TimeGrid::with_steps(1.0, 3).unwrap();
        assert_eq!(f.coarsening_ratio(&odd), None);
    }
}
