#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subdiff::TimeMesh;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mesh with `n` steps, `τ_1 = 1` and ratios `ρ_k` drawn uniformly from `[lo, hi]`.
pub fn fuzz_mesh(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> TimeMesh {
    let mut nodes = vec![0.0, 1.0];
    let mut tau = 1.0;
    for _ in 1..n {
        tau *= rng.random_range(lo..=hi);
        nodes.push(nodes.last().unwrap() + tau);
    }
    TimeMesh::from_nodes(nodes).unwrap()
}

/// Order drawn uniformly from `[0.05, 0.95]`.
pub fn fuzz_alpha(rng: &mut impl Rng) -> f64 {
    rng.random_range(0.05..=0.95)
}
