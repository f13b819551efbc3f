use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Result, TimeGrid};

/// Increments of a real Brownian motion on a grid.
///
/// Increments at refinement level `ell` are drawn from the ChaCha stream
/// `ell` of the generator seeded by `seed`, in step order, so a path is a
/// pure function of `(seed, level, grid)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    seed: u64,
    level: u32,
    grid: TimeGrid,
    increments: Vec<f64>,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of the `index`-th independent path of a Monte Carlo run. Depends
/// only on `(master, index)`, never on scheduling.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

pub fn brownian_path(seed: u64, grid: TimeGrid) -> BrownianPath {
    let mut rng = stream(seed, 0);
    let increments = (0..grid.steps())
        .map(|n| {
            let z: f64 = StandardNormal.sample(&mut rng);
            grid.step_len(n).sqrt() * z
        })
        .collect();
    BrownianPath {
        seed,
        level: 0,
        grid,
        increments,
    }
}

/// Halves the grid by Brownian-bridge sampling of every midpoint: the
/// first half-increment is `dB / 2 + sqrt(h / 4) Z`, the second is the
/// remainder, so sums over coarse steps are preserved.
pub fn brownian_refine(path: &BrownianPath) -> Result<BrownianPath> {
    let grid = path.grid.refine()?;
    let level = path.level + 1;
    let mut rng = stream(path.seed, u64::from(level));
    let half_sd = (path.grid.step() / 4.0).sqrt();
    let mut increments = Vec::with_capacity(2 * path.increments.len());
    for &db in &path.increments {
        let z: f64 = StandardNormal.sample(&mut rng);
        let first = 0.5 * db + half_sd * z;
        increments.push(first);
        increments.push(db - first);
    }
    Ok(BrownianPath {
        seed: path.seed,
        level,
        grid,
        increments,
    })
}

impl BrownianPath {
    /// The identically zero path, used for noiseless runs.
    pub fn zero(grid: TimeGrid) -> Self {
        BrownianPath {
            seed: 0,
            level: 0,
            grid,
            increments: vec![0.0; grid.steps()],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `B(t_n)` for every node, starting from `B(0) = 0`.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut b = 0.0;
        out.push(b);
        for &db in &self.increments {
            b += db;
            out.push(b);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 1.0 / 16.0).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(brownian_path(5, grid()), brownian_path(5, grid()));
        assert_ne!(brownian_path(5, grid()).increments(), brownian_path(6, grid()).increments());
    }

    #[test]
    fn sample_moments() {
        let h = 1e-3;
        let n = 100_000;
        let g = TimeGrid::new(n as f64 * h, h).unwrap();
        let p = brownian_path(2024, g);
        let inc = p.increments();
        let mean = inc.iter().sum::<f64>() / n as f64;
        let var = inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 * (h / n as f64).sqrt(), "mean {mean}");
        assert!((var / h - 1.0).abs() < 0.05, "variance ratio {}", var / h);
    }

    #[test]
    fn refinement_preserves_coarse_increments() {
        let p = brownian_path(9, grid());
        let f = brownian_refine(&p).unwrap();
        assert_eq!(f.level(), 1);
        assert_eq!(f.increments().len(), 2 * p.increments().len());
        for (k, &db) in p.increments().iter().enumerate() {
            let (first, second) = (f.increments()[2 * k], f.increments()[2 * k + 1]);
            let scale = db.abs().max(first.abs()).max(second.abs());
            assert!((first + second - db).abs() <= 2.0 * f64::EPSILON * scale);
        }
    }

    #[test]
    fn repeated_refinement_is_reproducible() {
        let p = brownian_path(9, grid());
        let twice = brownian_refine(&brownian_refine(&p).unwrap()).unwrap();
        let again = brownian_refine(&brownian_refine(&p).unwrap()).unwrap();
        assert_eq!(twice, again);
        let (coarse, fine) = (p.values(), twice.values());
        for n in 0..coarse.len() {
            assert!((coarse[n] - fine[4 * n]).abs() < 1e-14);
        }
    }

    #[test]
    fn bridge_midpoint_variance() {
        let h = 1e-2;
        let n = 100_000;
        let g = TimeGrid::new(n as f64 * h, h).unwrap();
        let p = brownian_path(77, g);
        let f = brownian_refine(&p).unwrap();
        // Deviation of each midpoint from the mean of its endpoints.
        let devs: Vec<f64> = p
            .increments()
            .iter()
            .enumerate()
            .map(|(k, &db)| f.increments()[2 * k] - 0.5 * db)
            .collect();
        let var = devs.iter().map(|d| d * d).sum::<f64>() / n as f64;
        assert!((var / (h / 4.0) - 1.0).abs() < 0.05, "ratio {}", var / (h / 4.0));
    }

    #[test]
    fn sub_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| sub_seed(1, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(sub_seed(1, 3), sub_seed(1, 3));
    }
}
