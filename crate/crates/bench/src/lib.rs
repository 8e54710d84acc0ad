//! Seeded fixtures shared by the benchmarks.

use binfv::bitdesc::FeatureSet;
use binfv::bmm::{BmmModel, DEFAULT_EPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform weights and bit probabilities drawn from `[0.05, 0.95)`.
pub fn random_model(n: usize, dims: usize, seed: u64) -> BmmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = (0..n * dims).map(|_| rng.random_range(0.05..0.95)).collect();
    BmmModel::from_flat(vec![1.0 / n as f64; n], mu, dims, DEFAULT_EPS).expect("valid parameters")
}

/// `count` descriptors sampled from `model`.
pub fn sample(model: &BmmModel, count: usize, seed: u64) -> FeatureSet {
    model.sample_set(&mut ChaCha8Rng::seed_from_u64(seed), count)
}
