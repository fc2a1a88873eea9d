//! Random irreducible instances for tests, benchmarks and acceptance runs.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::chain::{make_observable, Distribution, GeneratorMatrix, Observable, StateSpace, TransitionMatrix};
use crate::error::Result;

fn cycle<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Nonnegative weights with a random Hamiltonian cycle (so the pattern is
/// irreducible) plus each other entry present with probability `density`.
fn irreducible_weights<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < density {
                w[(i, j)] = rng.random::<f64>();
            }
        }
    }
    let order = cycle(n, rng);
    for k in 0..n {
        let (i, j) = (order[k], order[(k + 1) % n]);
        w[(i, j)] += 0.1 + rng.random::<f64>();
    }
    w
}

/// Irreducible stochastic matrix on `n` states.
pub fn random_stochastic<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<TransitionMatrix> {
    let mut w = irreducible_weights(n, density, rng);
    for mut row in w.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    TransitionMatrix::from_matrix(w)
}

/// Reversible chain `P = D^{-1} W` from a symmetric weight matrix `W`.
pub fn random_reversible<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<TransitionMatrix> {
    let w = irreducible_weights(n, density, rng);
    let mut sym = &w + w.transpose();
    for mut row in sym.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    TransitionMatrix::from_matrix(sym)
}

/// Irreducible generator with off-diagonal rates scaled by `max_rate`.
pub fn random_generator<R: Rng + ?Sized>(n: usize, density: f64, max_rate: f64, rng: &mut R) -> Result<GeneratorMatrix> {
    let mut w = irreducible_weights(n, density, rng) * max_rate;
    w.fill_diagonal(0.0);
    for i in 0..n {
        w[(i, i)] = -w.row(i).sum();
    }
    GeneratorMatrix::from_matrix(w)
}

/// Strictly positive distribution with weights bounded away from zero.
pub fn random_distribution<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Distribution> {
    let w: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    Distribution::new(StateSpace::indexed(n)?, w.into_iter().map(|x| x / s).collect())
}

/// Values uniform on `[-scale, scale]`, centered under `mu`.
pub fn random_centered<R: Rng + ?Sized>(mu: &Distribution, scale: f64, rng: &mut R) -> Result<Observable> {
    let values: Vec<f64> = (0..mu.size()).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    make_observable(&values, mu, true)
}
