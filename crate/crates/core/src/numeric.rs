//! Small numeric helpers shared by the oracles and the simulator.

/// Pairwise (cascade) summation in index order; the result depends only on
/// the input order, not on how the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Absolute slack used when testing `|average| >= delta`, so that exact ties
/// count as deviations in every estimator.
pub const TIE_SLACK: f64 = 1e-12;

/// `|average| >= delta` up to [`TIE_SLACK`].
pub fn deviation_reached(average: f64, delta: f64) -> bool {
    average.abs() >= delta - TIE_SLACK
}

/// `expm1(d) / d`, continuous at 0.
pub fn exprel(d: f64) -> f64 {
    if d.abs() < 1e-12 {
        1.0 + 0.5 * d
    } else {
        d.exp_m1() / d
    }
}
