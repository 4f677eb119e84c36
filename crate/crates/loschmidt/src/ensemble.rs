//! Seeded random builders: GUE operators and Haar-like random states.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::{HermitianOperator, StateVector};
use crate::C64;

/// Deterministic stream for a given seed; every random builder draws from
/// one of these, never from global state.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// GUE draw: diagonal entries N(0, σ²) real, off-diagonal entries complex
/// with E|H_jk|² = σ². `variance` is σ²; σ² = 1/dim gives spectral support
/// on roughly [-2, 2].
pub fn gue(dim: usize, variance: f64, rng: &mut impl Rng) -> Result<HermitianOperator> {
    let sigma = variance.sqrt();
    let mut entries = Array2::zeros((dim, dim));
    for j in 0..dim {
        entries[(j, j)] = C64::new(sigma * normal(rng), 0.0);
        for k in (j + 1)..dim {
            let re = sigma * normal(rng) / 2f64.sqrt();
            let im = sigma * normal(rng) / 2f64.sqrt();
            entries[(j, k)] = C64::new(re, im);
            entries[(k, j)] = C64::new(re, -im);
        }
    }
    HermitianOperator::new(entries)
}

/// Random unit vector, isotropic in the Hilbert space.
pub fn random_state(dim: usize, rng: &mut impl Rng) -> Result<StateVector> {
    StateVector::normalized(Array1::from(random_amplitudes(dim, rng)))
}

/// Complex Gaussian amplitudes normalized to Σ|a|² = 1.
pub fn random_amplitudes(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    let raw: Vec<C64> = (0..n).map(|_| C64::new(normal(rng), normal(rng))).collect();
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|z| z / norm).collect()
}
