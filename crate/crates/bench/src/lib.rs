//! Shared fixtures for the criterion benches.

use comamba_core::random::{seeded, uniform_tensor};
use comamba_core::ssm::SelectiveInputs;
use comamba_core::{FeatureStack, Tensor};

/// Selective-scan inputs of length `len` with `d` channels and `n` states.
pub struct ScanFixture {
    pub u: Tensor,
    pub sel: SelectiveInputs,
    pub a_log: Tensor,
    pub d_skip: Tensor,
}

pub fn scan_fixture(len: usize, d: usize, n: usize, seed: u64) -> ScanFixture {
    let mut rng = seeded(seed);
    ScanFixture {
        u: uniform_tensor(&[len, d], -1.0, 1.0, &mut rng),
        sel: SelectiveInputs::new(
            uniform_tensor(&[len, d], 1e-3, 0.5, &mut rng),
            uniform_tensor(&[len, n], -1.0, 1.0, &mut rng),
            uniform_tensor(&[len, n], -1.0, 1.0, &mut rng),
        )
        .expect("consistent shapes"),
        a_log: uniform_tensor(&[d, n], -2.0, 1.0, &mut rng),
        d_skip: uniform_tensor(&[d], -1.0, 1.0, &mut rng),
    }
}

pub fn feature_stack(k: usize, h: usize, w: usize, c: usize, seed: u64) -> FeatureStack {
    let mut rng = seeded(seed);
    FeatureStack::new(uniform_tensor(&[k, h, w, c], -1.0, 1.0, &mut rng)).expect("nonempty shape")
}
