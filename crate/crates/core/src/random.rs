//! Seeded generators for weights and test data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Tensor;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut SeededRng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

/// Uniform on `[-1, 1)` from a fresh generator.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    uniform_tensor(shape, -1.0, 1.0, &mut seeded(seed))
}
