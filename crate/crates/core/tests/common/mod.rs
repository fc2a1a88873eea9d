#![allow(dead_code)]

use ipgap_core::chain::{stationary_distribution, Distribution, GeneratorMatrix, Observable, TransitionMatrix};
use ipgap_core::generate::{random_centered, random_generator, random_reversible, random_stochastic};
use ipgap_core::simulate::replica_rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    replica_rng(seed, 0)
}

/// Random irreducible chain on `n` states with its invariant law.
pub fn chain(seed: u64, n: usize, density: f64) -> (TransitionMatrix, Distribution) {
    let p = random_stochastic(n, density, &mut rng(seed)).unwrap();
    let mu = stationary_distribution(&p).unwrap();
    (p, mu)
}

pub fn reversible(seed: u64, n: usize) -> (TransitionMatrix, Distribution) {
    let p = random_reversible(n, 0.5, &mut rng(seed)).unwrap();
    let mu = stationary_distribution(&p).unwrap();
    (p, mu)
}

pub fn generator(seed: u64, n: usize, max_rate: f64) -> (GeneratorMatrix, Distribution) {
    let q = random_generator(n, 0.5, max_rate, &mut rng(seed)).unwrap();
    let mu = stationary_distribution(&q).unwrap();
    (q, mu)
}

pub fn centered(seed: u64, mu: &Distribution) -> Observable {
    random_centered(mu, 1.0, &mut replica_rng(seed, 1)).unwrap()
}
