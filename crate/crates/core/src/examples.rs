//! Built-in instances with known spectral facts.

use nalgebra::DMatrix;

/// Irreducible 4-state chain with uniform invariant law and zero absolute gap.
pub fn four_state_rows() -> Vec<Vec<f64>> {
    vec![
        vec![0.5, 0.5, 0.0, 0.0],
        vec![0.0, 0.0, 0.5, 0.5],
        vec![0.5, 0.5, 0.0, 0.0],
        vec![0.0, 0.0, 0.5, 0.5],
    ]
}

/// Deterministic two-state flip `[[0,1],[1,0]]`.
pub fn flip_rows() -> Vec<Vec<f64>> {
    vec![vec![0.0, 1.0], vec![1.0, 0.0]]
}

/// Plane rotation by a quarter turn: skew-symmetric, so its real numerical radius is 0.
pub fn skew_rotation() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// Names of the built-in example instances.
pub const NAMES: [&str; 3] = ["appendix-a", "skew-radius", "flip-chain"];
