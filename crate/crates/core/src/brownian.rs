//! Brownian increments keyed by `(seed, path_id)`.
//!
//! Each path draws from its own ChaCha8 stream: the 64-bit seed fixes the key
//! and the path id selects the stream, so paths are independent and every
//! grid can be regenerated in isolation regardless of how work is scheduled.
//! Normals come from `rand_distr::StandardNormal` (ziggurat) in `f64` and are
//! scaled by `sqrt(dt_fine)`. Bitwise reproducibility holds for a fixed
//! `rand_chacha`/`rand_distr` version.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance for "horizon is an integer number of steps".
pub const STEP_TOL: f64 = 1e-9;

/// `round(horizon / dt)` when it is integral to within `STEP_TOL`.
pub fn step_count<T: Scalar>(horizon: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) || !(horizon > T::zero()) {
        return Err(Error::Config(format!("horizon {horizon} and step {dt} must be positive")));
    }
    let n = (horizon / dt).round();
    let n_usize = n
        .to_usize()
        .ok_or_else(|| Error::Config(format!("step count for T = {horizon}, dt = {dt} overflows")))?;
    if n_usize == 0 || (n * dt - horizon).abs() > T::lit(STEP_TOL) * horizon {
        return Err(Error::Config(format!("T = {horizon} is not an integer multiple of dt = {dt}")));
    }
    Ok(n_usize)
}

/// Integer ratio `coarse / fine` when it is integral to within `STEP_TOL`.
pub fn step_ratio<T: Scalar>(coarse: T, fine: T) -> Result<usize> {
    let r = (coarse / fine).round();
    let ru = r.to_usize().unwrap_or(0);
    if ru == 0 || (r * fine - coarse).abs() > T::lit(STEP_TOL) * coarse {
        return Err(Error::Config(format!("step {coarse} is not a multiple of the fine step {fine}")));
    }
    Ok(ru)
}

/// Fine-grid Brownian increments for one path, stored step-major
/// (`increments[k * m + j]` is coordinate `j` of step `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianGrid<T> {
    pub seed: u64,
    pub path_id: u64,
    pub horizon: T,
    pub dt_fine: T,
    pub noise_dim: usize,
    increments: Vec<T>,
}

impl<T: Scalar> BrownianGrid<T> {
    pub fn generate(seed: u64, path_id: u64, horizon: T, dt_fine: T, noise_dim: usize) -> Result<Self> {
        let steps = step_count(horizon, dt_fine)?;
        if noise_dim == 0 {
            return Err(Error::Config("noise dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_id);
        let scale = dt_fine.as_f64().sqrt();
        let increments = (0..steps * noise_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z * scale)
            })
            .collect();
        Ok(Self {
            seed,
            path_id,
            horizon,
            dt_fine,
            noise_dim,
            increments,
        })
    }

    /// Grid with caller-supplied increments, e.g. zero noise.
    pub fn from_increments(horizon: T, dt_fine: T, noise_dim: usize, increments: Vec<T>) -> Result<Self> {
        let steps = step_count(horizon, dt_fine)?;
        if noise_dim == 0 || increments.len() != steps * noise_dim {
            return Err(Error::Config(format!(
                "expected {} increments, got {}",
                steps * noise_dim,
                increments.len()
            )));
        }
        Ok(Self {
            seed: 0,
            path_id: 0,
            horizon,
            dt_fine,
            noise_dim,
            increments,
        })
    }

    pub fn zero(horizon: T, dt_fine: T, noise_dim: usize) -> Result<Self> {
        let steps = step_count(horizon, dt_fine)?;
        Self::from_increments(horizon, dt_fine, noise_dim, vec![T::zero(); steps * noise_dim])
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.noise_dim
    }

    pub fn increments(&self) -> &[T] {
        &self.increments
    }

    pub fn increment(&self, k: usize) -> &[T] {
        &self.increments[k * self.noise_dim..(k + 1) * self.noise_dim]
    }

    /// Increments at step `factor * dt_fine`: element `j` is the sum of fine
    /// increments `[j r, (j+1) r)` accumulated in index order.
    pub fn coarsen(&self, factor: usize) -> Result<Vec<T>> {
        let steps = self.steps();
        if factor == 0 || steps % factor != 0 {
            return Err(Error::Config(format!("factor {factor} does not divide {steps} fine steps")));
        }
        let m = self.noise_dim;
        let mut out = Vec::with_capacity(steps / factor * m);
        for block in self.increments.chunks_exact(factor * m) {
            let mut acc = block[..m].to_vec();
            for step in block[m..].chunks_exact(m) {
                for (a, &b) in acc.iter_mut().zip(step) {
                    *a = *a + b;
                }
            }
            out.extend_from_slice(&acc);
        }
        Ok(out)
    }

    /// `B(t_k + j dt_fine) - B(t_k)` for the coarse grid with ratio `factor`.
    pub fn partial_sum(&self, factor: usize, k: usize, j: usize) -> Vec<T> {
        let m = self.noise_dim;
        let mut acc = vec![T::zero(); m];
        for s in k * factor..k * factor + j {
            for (a, &b) in acc.iter_mut().zip(self.increment(s)) {
                *a = *a + b;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_stream() {
        let a = BrownianGrid::<f64>::generate(9, 3, 1.0, 0.01, 2).unwrap();
        let b = BrownianGrid::<f64>::generate(9, 3, 1.0, 0.01, 2).unwrap();
        assert!(a.increments().iter().zip(b.increments()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn coarsen_pairs() {
        let g = BrownianGrid::from_increments(4.0, 1.0, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.coarsen(2).unwrap(), vec![3.0, 7.0]);
        assert_eq!(g.coarsen(1).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(g.coarsen(3).is_err());
        assert!(g.coarsen(0).is_err());
    }

    #[test]
    fn coarsen_identity_keeps_negative_zero() {
        let g = BrownianGrid::<f64>::from_increments(2.0, 1.0, 1, vec![-0.0, 1.0]).unwrap();
        assert_eq!(g.coarsen(1).unwrap()[0].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn step_count_rejects_partial_steps() {
        assert_eq!(step_count(1.0, 0.25).unwrap(), 4);
        assert!(step_count(1.0, 0.3).is_err());
        assert_eq!(step_count(10.0f64, 0.005).unwrap(), 2000);
    }

    #[test]
    fn partial_sums() {
        let g = BrownianGrid::from_increments(4.0, 1.0, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.partial_sum(2, 1, 1), vec![3.0]);
        assert_eq!(g.partial_sum(2, 0, 2), vec![3.0]);
        assert_eq!(g.partial_sum(2, 1, 0), vec![0.0]);
    }
}
