use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chain::{Distribution, MarkovKernel, TransitionMatrix};
use crate::error::{Error, Result};
use crate::numeric::{deviation_reached, pairwise_sum};

/// Largest number of paths, or occupation-count cells, an exact oracle will visit.
pub const ENUMERATION_CAP: f64 = 1e7;
const LATTICE_MAX_DENOMINATOR: u32 = 64;
const LATTICE_TOL: f64 = 1e-12;
const DP_WORK_CAP: f64 = 1e9;

/// Common step `s` and integers `k_i` with `f_i = k_i s`, if one exists with a
/// small denominator relative to the smallest nonzero `|f_i|`.
pub fn lattice_of(values: &[f64]) -> Option<(f64, Vec<i64>)> {
    let base = values
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !base.is_finite() {
        return Some((1.0, vec![0; values.len()]));
    }
    'denominators: for k in 1..=LATTICE_MAX_DENOMINATOR {
        let step = base / k as f64;
        let mut ints = Vec::with_capacity(values.len());
        for &v in values {
            let r = v / step;
            let rounded = r.round();
            if (r - rounded).abs() > LATTICE_TOL * rounded.abs().max(1.0) || rounded.abs() > 1e6 {
                continue 'denominators;
            }
            ints.push(rounded as i64);
        }
        return Some((step, ints));
    }
    None
}

/// Exact `P(|(1/n) sum_{k=1}^n f(Z_k)| >= delta)` with `Z_1 ~ init`.
///
/// Uses dynamic programming over (state, integer partial sum) when `f` lives
/// on a lattice. Otherwise the path sum depends only on the visit counts, so
/// it runs a DP over (state, visit counts) or enumerates all `|Omega|^n`
/// paths, whichever is smaller.
pub fn exact_tail_discrete(
    p: &TransitionMatrix,
    init: &Distribution,
    f: &[f64],
    n: u64,
    delta: f64,
) -> Result<f64> {
    let size = p.size();
    for len in [init.size(), f.len()] {
        if len != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: len,
            });
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(1.0);
    }
    if let Some((step, ints)) = lattice_of(f) {
        let span = ints.iter().map(|k| k.unsigned_abs()).max().unwrap_or(0) as f64;
        let cells = size as f64 * (2.0 * span * n as f64 + 1.0);
        if cells * size as f64 * n as f64 <= DP_WORK_CAP {
            return Ok(lattice_dp(p.entries(), init.weights(), &ints, step, n as usize, delta));
        }
    }
    let paths = (size as f64).powf(n as f64);
    let cells = size as f64 * multiset_count(size, n);
    if paths.min(cells) > ENUMERATION_CAP {
        return Err(Error::TooLarge {
            required: paths.min(cells),
            cap: ENUMERATION_CAP,
        });
    }
    if cells < paths {
        Ok(occupation_dp(p.entries(), init.weights(), f, n as usize, delta))
    } else {
        Ok(enumerate(p.entries(), init.weights(), f, n as usize, delta))
    }
}

// Number of visit-count vectors: C(n + size - 1, size - 1).
fn multiset_count(size: usize, n: u64) -> f64 {
    (1..size).map(|i| (n as f64 + i as f64) / i as f64).product()
}

fn lattice_dp(p: &DMatrix<f64>, init: &[f64], ints: &[i64], step: f64, n: usize, delta: f64) -> f64 {
    let size = ints.len();
    let span = ints.iter().map(|k| k.unsigned_abs()).max().unwrap_or(0) as usize;
    let offset = span * n;
    let width = 2 * offset + 1;
    let idx = |k: i64| (k + offset as i64) as usize;
    // mass[state * width + sum_index]
    let mut mass = vec![0.0; size * width];
    for z in 0..size {
        mass[z * width + idx(ints[z])] += init[z];
    }
    for _ in 1..n {
        let mut next = vec![0.0; size * width];
        for i in 0..size {
            let row = &mass[i * width..(i + 1) * width];
            for j in 0..size {
                let w = p[(i, j)];
                if w == 0.0 {
                    continue;
                }
                let shift = ints[j];
                let dst = &mut next[j * width..(j + 1) * width];
                for (s, &m) in row.iter().enumerate() {
                    if m != 0.0 {
                        dst[(s as i64 + shift) as usize] += w * m;
                    }
                }
            }
        }
        mass = next;
    }
    let mut hits = Vec::new();
    for z in 0..size {
        for s in 0..width {
            let m = mass[z * width + s];
            if m != 0.0 {
                let avg = (s as i64 - offset as i64) as f64 * step / n as f64;
                if deviation_reached(avg, delta) {
                    hits.push(m);
                }
            }
        }
    }
    pairwise_sum(&hits).min(1.0)
}

fn occupation_dp(p: &DMatrix<f64>, init: &[f64], f: &[f64], n: usize, delta: f64) -> f64 {
    let size = f.len();
    // counts -> mass per current state; BTreeMap keeps the reduction order fixed
    let mut layer: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
    for z in 0..size {
        if init[z] > 0.0 {
            let mut counts = vec![0; size];
            counts[z] = 1;
            layer.entry(counts).or_insert_with(|| vec![0.0; size])[z] += init[z];
        }
    }
    for _ in 1..n {
        let mut next: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
        for (counts, mass) in &layer {
            for (i, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                for j in 0..size {
                    let w = p[(i, j)];
                    if w > 0.0 {
                        let mut c = counts.clone();
                        c[j] += 1;
                        next.entry(c).or_insert_with(|| vec![0.0; size])[j] += w * m;
                    }
                }
            }
        }
        layer = next;
    }
    let mut hits = Vec::new();
    for (counts, mass) in &layer {
        let sum: f64 = counts.iter().zip(f).map(|(&c, &v)| c as f64 * v).sum();
        if deviation_reached(sum / n as f64, delta) {
            hits.push(pairwise_sum(mass));
        }
    }
    pairwise_sum(&hits).min(1.0)
}

fn enumerate(p: &DMatrix<f64>, init: &[f64], f: &[f64], n: usize, delta: f64) -> f64 {
    fn walk(p: &DMatrix<f64>, f: &[f64], n: usize, delta: f64, state: usize, depth: usize, prob: f64, sum: f64) -> f64 {
        if depth == n {
            return if deviation_reached(sum / n as f64, delta) { prob } else { 0.0 };
        }
        let mut acc = 0.0;
        for next in 0..p.nrows() {
            let w = p[(state, next)];
            if w > 0.0 {
                acc += walk(p, f, n, delta, next, depth + 1, prob * w, sum + f[next]);
            }
        }
        acc
    }
    // One block per starting state, reduced in index order.
    let blocks: Vec<f64> = (0..f.len())
        .into_par_iter()
        .map(|z| {
            if init[z] == 0.0 {
                0.0
            } else {
                walk(p, f, n, delta, z, 1, init[z], f[z])
            }
        })
        .collect();
    pairwise_sum(&blocks).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{four_state_rows, flip_rows};

    #[test]
    fn lattice_detection() {
        let (step, ints) = lattice_of(&[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(step, 1.0);
        assert_eq!(ints, vec![1, 0, 0, -1]);
        let (step, ints) = lattice_of(&[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]).unwrap();
        assert!((step - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ints, vec![2, -1, -1]);
        let (_, ints) = lattice_of(&[0.5, -0.75]).unwrap();
        assert_eq!(ints, vec![2, -3]);
        assert!(lattice_of(&[1.0, std::f64::consts::PI]).is_none());
        assert_eq!(lattice_of(&[0.0, 0.0]).unwrap().1, vec![0, 0]);
    }

    #[test]
    fn trivial_deltas() {
        let p = TransitionMatrix::from_rows(&four_state_rows()).unwrap();
        let init = Distribution::uniform(p.space().clone());
        let f = [1.0, 0.0, 0.0, -1.0];
        assert_eq!(exact_tail_discrete(&p, &init, &f, 6, 0.0).unwrap(), 1.0);
        assert_eq!(exact_tail_discrete(&p, &init, &f, 6, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn flip_chain_cancellation() {
        let p = TransitionMatrix::from_rows(&flip_rows()).unwrap();
        let init = Distribution::uniform(p.space().clone());
        assert_eq!(exact_tail_discrete(&p, &init, &[1.0, -1.0], 2, 0.5).unwrap(), 0.0);
        // odd n: |sum| = 1 always
        assert_eq!(exact_tail_discrete(&p, &init, &[1.0, -1.0], 3, 1.0 / 3.0).unwrap(), 1.0);
    }

    #[test]
    fn dp_and_enumeration_agree() {
        let p = TransitionMatrix::from_rows(&[
            vec![0.1, 0.6, 0.3],
            vec![0.4, 0.2, 0.4],
            vec![0.5, 0.25, 0.25],
        ])
        .unwrap();
        let init = Distribution::new(p.space().clone(), vec![0.2, 0.3, 0.5]).unwrap();
        let f = [1.0, -0.5, 0.25];
        let (step, ints) = lattice_of(&f).unwrap();
        for n in [1usize, 2, 5, 8] {
            for delta in [0.05, 0.1, 0.25, 0.4, 0.7, 1.0] {
                let dp = lattice_dp(p.entries(), init.weights(), &ints, step, n, delta);
                let en = enumerate(p.entries(), init.weights(), &f, n, delta);
                assert!((dp - en).abs() < 1e-13, "n={n} delta={delta}: {dp} vs {en}");
            }
        }
    }

    #[test]
    fn occupation_dp_agrees_with_enumeration() {
        let p = TransitionMatrix::from_rows(&[
            vec![0.1, 0.6, 0.3],
            vec![0.4, 0.2, 0.4],
            vec![0.5, 0.25, 0.25],
        ])
        .unwrap();
        let init = Distribution::new(p.space().clone(), vec![0.2, 0.3, 0.5]).unwrap();
        let f = [0.7, -std::f64::consts::FRAC_1_SQRT_2, 0.1];
        for n in [1usize, 2, 5, 8] {
            for delta in [0.01, 0.05, 0.1, 0.3, 0.6] {
                let dp = occupation_dp(p.entries(), init.weights(), &f, n, delta);
                let en = enumerate(p.entries(), init.weights(), &f, n, delta);
                assert!((dp - en).abs() < 1e-13, "n={n} delta={delta}: {dp} vs {en}");
            }
        }
    }

    #[test]
    fn too_large_without_lattice() {
        let p = TransitionMatrix::from_rows(&vec![vec![0.25; 4]; 4]).unwrap();
        let init = Distribution::uniform(p.space().clone());
        let f = [1.0, std::f64::consts::PI, -1.0, 0.1];
        assert!(matches!(
            exact_tail_discrete(&p, &init, &f, 12, 0.1),
            Ok(_)
        ));
        let big = TransitionMatrix::from_rows(&vec![vec![1.0 / 12.0; 12]; 12]).unwrap();
        let init = Distribution::uniform(big.space().clone());
        let f: Vec<f64> = (0..12).map(|i| (i as f64).sqrt() - 2.0).collect();
        assert!(matches!(
            exact_tail_discrete(&big, &init, &f, 30, 0.1),
            Err(Error::TooLarge { .. })
        ));
    }
}
