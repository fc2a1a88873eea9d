//! Seeded fixtures shared by the benchmarks.

use ipgap_core::chain::{stationary_distribution, Distribution, GeneratorMatrix, Observable, TransitionMatrix};
use ipgap_core::generate::{random_centered, random_generator, random_stochastic};
use ipgap_core::simulate::replica_rng;

pub fn chain(size: usize, seed: u64) -> (TransitionMatrix, Distribution, Observable) {
    let p = random_stochastic(size, 0.5, &mut replica_rng(seed, 0)).expect("valid size");
    let mu = stationary_distribution(&p).expect("irreducible");
    let f = random_centered(&mu, 1.0, &mut replica_rng(seed, 1)).expect("valid law");
    (p, mu, f)
}

pub fn generator(size: usize, seed: u64) -> (GeneratorMatrix, Distribution, Observable) {
    let q = random_generator(size, 0.5, 2.0, &mut replica_rng(seed, 0)).expect("valid size");
    let mu = stationary_distribution(&q).expect("irreducible");
    let f = random_centered(&mu, 1.0, &mut replica_rng(seed, 1)).expect("valid law");
    (q, mu, f)
}
