use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::Window;
use crate::{Error, Point, Result};

pub type VectorField = Arc<dyn Fn(f64, &Point) -> Point + Send + Sync>;

/// Drift `f(t, x)` and vector diffusion `sigma(t, x)` driven by one real
/// Brownian motion, with a declared common bound and Lipschitz constant.
#[derive(Clone)]
pub struct FieldPair {
    drift: VectorField,
    diffusion: VectorField,
    bound: f64,
    lipschitz: f64,
}

impl fmt::Debug for FieldPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldPair")
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl FieldPair {
    pub fn new(drift: VectorField, diffusion: VectorField, bound: f64, lipschitz: f64) -> Self {
        FieldPair {
            drift,
            diffusion,
            bound,
            lipschitz,
        }
    }

    pub fn constant(drift: Point, diffusion: Point) -> Self {
        let bound = drift.norm().max(diffusion.norm());
        FieldPair {
            drift: Arc::new(move |_, _| drift.clone()),
            diffusion: Arc::new(move |_, _| diffusion.clone()),
            bound,
            lipschitz: 0.0,
        }
    }

    pub fn drift(&self, t: f64, x: &Point) -> Point {
        (self.drift)(t, x)
    }

    pub fn diffusion(&self, t: f64, x: &Point) -> Point {
        (self.diffusion)(t, x)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// The pair `(f, eps sigma)`.
    pub fn scale_diffusion(&self, eps: f64) -> FieldPair {
        let base = Arc::clone(&self.diffusion);
        FieldPair {
            drift: Arc::clone(&self.drift),
            diffusion: Arc::new(move |t, x| base(t, x) * eps),
            bound: self.bound,
            lipschitz: self.lipschitz,
        }
    }

    /// The pair `(f, 0)`.
    pub fn without_noise(&self) -> FieldPair {
        self.scale_diffusion(0.0)
    }

    /// Samples `n` pairs of points in `window` at time `t` and checks the
    /// declared bound and Lipschitz constant.
    pub fn spot_check(&self, window: &Window, t: f64, n: usize, seed: u64) -> Result<()> {
        window.validate()?;
        let slack = 1e-9;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n {
            let x = window.sample(&mut rng);
            let y = window.sample(&mut rng);
            let (fx, sx) = (self.drift(t, &x), self.diffusion(t, &x));
            let (fy, sy) = (self.drift(t, &y), self.diffusion(t, &y));
            let size = fx.norm().max(sx.norm());
            if size > self.bound * (1.0 + slack) + slack {
                return Err(Error::Config(format!(
                    "field norm {size} exceeds declared bound {}",
                    self.bound
                )));
            }
            let dist = (&x - &y).norm();
            if dist > 0.0 {
                let ratio = (&fx - &fy).norm().max((&sx - &sy).norm()) / dist;
                if ratio > self.lipschitz * (1.0 + slack) + slack {
                    return Err(Error::Config(format!(
                        "empirical Lipschitz ratio {ratio} exceeds declared {}",
                        self.lipschitz
                    )));
                }
            }
        }
        Ok(())
    }
}
