//! Validated chains, generators, distributions and observables.
//!
//! Every type here is immutable once constructed. Transition matrices are
//! renormalized on construction so each row sums to one in working precision;
//! generators have their diagonal reset to minus the off-diagonal row sum.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of an input row sum from 1 (or 0 for generators).
pub const INPUT_ROW_SUM_TOL: f64 = 1e-9;
/// Row sums after renormalization.
pub const NORMALIZED_ROW_SUM_TOL: f64 = 1e-12;
/// `|E_mu[f]|` below this counts as centered.
pub const CENTERING_TOL: f64 = 1e-10;
/// Max-norm residual accepted for `mu P = mu` / `mu Q = 0`, per unit of rate scale.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-12;
/// Residual accepted when checking that a supplied `mu` is invariant.
pub const INVARIANCE_CHECK_TOL: f64 = 1e-10;
/// Above this size the stationary solve switches to power iteration.
pub const DIRECT_SOLVE_MAX_STATES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyStateSpace);
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// States labelled `"0"`, `"1"`, ...
    pub fn indexed(size: usize) -> Result<Self> {
        Self::new((0..size).map(|i| i.to_string()))
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn matrix_from_rows(raw: &[Vec<f64>], size: usize) -> Result<DMatrix<f64>> {
    if raw.len() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            found: raw.len(),
        });
    }
    for row in raw {
        if row.len() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: row.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(size, size, |i, j| raw[i][j]))
}

fn check_square(m: &DMatrix<f64>, size: usize) -> Result<()> {
    if m.nrows() != size || m.ncols() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            found: if m.nrows() != size { m.nrows() } else { m.ncols() },
        });
    }
    for i in 0..size {
        for j in 0..size {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Common view of a discrete-time kernel `P` and a jump-process generator `Q`.
pub trait MarkovKernel {
    fn space(&self) -> &StateSpace;

    /// Raw matrix (`P` or `Q`).
    fn matrix(&self) -> &DMatrix<f64>;

    /// `P - I` for chains, `Q` itself for generators.
    fn laplacian(&self) -> DMatrix<f64>;

    fn size(&self) -> usize {
        self.space().size()
    }

    /// Off-diagonal support edge `i -> j`.
    fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.matrix()[(i, j)] > 0.0
    }

    /// Largest absolute entry of the Laplacian, used to scale residual checks.
    fn rate_scale(&self) -> f64 {
        self.laplacian().amax().max(1.0)
    }
}

/// Row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    space: StateSpace,
    entries: DMatrix<f64>,
    row_sum_tolerance: f64,
}

impl TransitionMatrix {
    pub fn new(space: StateSpace, entries: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(space, entries, INPUT_ROW_SUM_TOL)
    }

    pub fn with_tolerance(
        space: StateSpace,
        mut entries: DMatrix<f64>,
        row_sum_tolerance: f64,
    ) -> Result<Self> {
        let n = space.size();
        check_square(&entries, n)?;
        for i in 0..n {
            for j in 0..n {
                if entries[(i, j)] < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j });
                }
            }
        }
        for i in 0..n {
            let sum: f64 = entries.row(i).iter().sum();
            if (sum - 1.0).abs() > row_sum_tolerance {
                return Err(Error::RowSumViolation { row: i, sum });
            }
            entries.row_mut(i).scale_mut(1.0 / sum);
        }
        Ok(Self {
            space,
            entries,
            row_sum_tolerance,
        })
    }

    /// Builds from an unlabelled matrix; states are named by index.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let space = StateSpace::indexed(entries.nrows())?;
        Self::new(space, entries)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let space = StateSpace::indexed(rows.len())?;
        validate_transition_matrix(rows, space.labels())
    }

    pub fn identity(size: usize) -> Result<Self> {
        Self::from_matrix(DMatrix::identity(size, size))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn row_sum_tolerance(&self) -> f64 {
        self.row_sum_tolerance
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `P^k` as a transition matrix.
    pub fn power(&self, k: u32) -> Result<Self> {
        let n = self.size();
        let mut acc = DMatrix::identity(n, n);
        let mut base = self.entries.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        Self::new(self.space.clone(), acc)
    }

    /// Product `self * other` of two kernels on the same space.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        Self::new(self.space.clone(), &self.entries * &other.entries)
    }

    /// `mu P`.
    pub fn push_forward(&self, mu: &Distribution) -> DVector<f64> {
        self.entries.tr_mul(mu.as_vector())
    }
}

impl MarkovKernel for TransitionMatrix {
    fn space(&self) -> &StateSpace {
        &self.space
    }

    fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    fn laplacian(&self) -> DMatrix<f64> {
        let n = self.size();
        &self.entries - DMatrix::identity(n, n)
    }
}

/// Rate matrix of a continuous-time jump process.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    space: StateSpace,
    entries: DMatrix<f64>,
}

impl GeneratorMatrix {
    pub fn new(space: StateSpace, mut entries: DMatrix<f64>) -> Result<Self> {
        let n = space.size();
        check_square(&entries, n)?;
        for i in 0..n {
            for j in 0..n {
                if i != j && entries[(i, j)] < 0.0 {
                    return Err(Error::NegativeOffDiagonal { row: i, col: j });
                }
            }
        }
        for i in 0..n {
            let sum: f64 = entries.row(i).iter().sum();
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| entries[(i, j)]).sum();
            if sum.abs() > INPUT_ROW_SUM_TOL * off.max(1.0) {
                return Err(Error::RowSumViolation { row: i, sum });
            }
            entries[(i, i)] = -off;
        }
        Ok(Self { space, entries })
    }

    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let space = StateSpace::indexed(entries.nrows())?;
        Self::new(space, entries)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let space = StateSpace::indexed(rows.len())?;
        validate_generator(rows, space.labels())
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Total jump rate out of state `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.entries[(i, i)]
    }
}

impl MarkovKernel for GeneratorMatrix {
    fn space(&self) -> &StateSpace {
        &self.space
    }

    fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    fn laplacian(&self) -> DMatrix<f64> {
        self.entries.clone()
    }
}

/// Probability vector over a state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    space: StateSpace,
    weights: DVector<f64>,
    support: Vec<usize>,
}

impl Distribution {
    pub fn new(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.size() {
            return Err(Error::DimensionMismatch {
                expected: space.size(),
                found: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
            if w < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: 0 });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > INPUT_ROW_SUM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        let weights = DVector::from_iterator(weights.len(), weights.into_iter().map(|w| w / sum));
        let support = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        Ok(Self {
            space,
            weights,
            support,
        })
    }

    pub fn uniform(space: StateSpace) -> Self {
        let n = space.size();
        Self {
            weights: DVector::from_element(n, 1.0 / n as f64),
            support: (0..n).collect(),
            space,
        }
    }

    pub fn point_mass(space: StateSpace, state: usize) -> Result<Self> {
        if state >= space.size() {
            return Err(Error::DimensionMismatch {
                expected: space.size(),
                found: state + 1,
            });
        }
        let mut w = vec![0.0; space.size()];
        w[state] = 1.0;
        Self::new(space, w)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.support.len() == self.size()
    }

    /// `E[h]` under this distribution.
    pub fn expect(&self, h: &[f64]) -> f64 {
        self.weights.iter().zip(h).map(|(w, x)| w * x).sum()
    }

    /// `Var[h]` under this distribution.
    pub fn variance(&self, h: &[f64]) -> f64 {
        let m = self.expect(h);
        self.weights
            .iter()
            .zip(h)
            .map(|(w, x)| w * (x - m) * (x - m))
            .sum::<f64>()
            .max(0.0)
    }

    /// `<f, g>_mu`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// `||h||_mu`.
    pub fn norm(&self, h: &[f64]) -> f64 {
        self.inner(h, h).sqrt()
    }

    fn ensure_positive(&self) -> Result<()> {
        match (0..self.size()).find(|&i| self.weights[i] <= 0.0) {
            Some(i) => Err(Error::ZeroMass(i)),
            None => Ok(()),
        }
    }
}

/// Real function on the states together with its moments under `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    values: Vec<f64>,
    mean_mu: f64,
    sup_norm: f64,
    sigma2: f64,
    centered: bool,
}

impl Observable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `E_mu[f]` of the stored values.
    pub fn mean_mu(&self) -> f64 {
        self.mean_mu
    }

    /// `M = max |f|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `Var_mu[f]`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Validates a raw square matrix as a transition kernel over `labels`.
pub fn validate_transition_matrix<S: AsRef<str>>(
    raw: &[Vec<f64>],
    labels: &[S],
) -> Result<TransitionMatrix> {
    let space = StateSpace::new(labels.iter().map(|s| s.as_ref().to_string()))?;
    let m = matrix_from_rows(raw, space.size())?;
    TransitionMatrix::new(space, m)
}

/// Validates a raw square matrix as a generator over `labels`.
pub fn validate_generator<S: AsRef<str>>(
    raw: &[Vec<f64>],
    labels: &[S],
) -> Result<GeneratorMatrix> {
    let space = StateSpace::new(labels.iter().map(|s| s.as_ref().to_string()))?;
    let m = matrix_from_rows(raw, space.size())?;
    GeneratorMatrix::new(space, m)
}

/// Strong connectivity of the off-diagonal support graph.
pub fn is_irreducible<K: MarkovKernel + ?Sized>(kernel: &K) -> bool {
    let n = kernel.size();
    if n == 1 {
        return true;
    }
    // Reachability from state 0 in the graph and in its reverse.
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let edge = if forward {
                    kernel.has_edge(u, v)
                } else {
                    kernel.has_edge(v, u)
                };
                if edge && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

fn stationary_residual(laplacian: &DMatrix<f64>, mu: &DVector<f64>) -> f64 {
    laplacian.tr_mul(mu).amax()
}

/// Unique invariant distribution: `mu P = mu` or `mu Q = 0`.
pub fn stationary_distribution<K: MarkovKernel + ?Sized>(kernel: &K) -> Result<Distribution> {
    if !is_irreducible(kernel) {
        return Err(Error::NotIrreducible);
    }
    let n = kernel.size();
    let lap = kernel.laplacian();
    let tol = STATIONARY_RESIDUAL_TOL * kernel.rate_scale();
    let mut mu = if n <= DIRECT_SOLVE_MAX_STATES {
        solve_augmented(&lap)?
    } else {
        power_iterate(&lap, tol)
    };
    for w in mu.iter_mut() {
        *w = w.max(0.0);
    }
    let s = mu.sum();
    mu /= s;
    let residual = stationary_residual(&lap, &mu);
    if !(residual <= tol) {
        return Err(Error::SolverFailure { residual });
    }
    Distribution::new(kernel.space().clone(), mu.iter().copied().collect())
}

// L^T mu = 0 with the last balance equation replaced by sum(mu) = 1, plus one
// round of iterative refinement.
fn solve_augmented(lap: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = lap.nrows();
    let mut a = lap.transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu
        .solve(&b)
        .ok_or(Error::SolverFailure { residual: f64::INFINITY })?;
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

fn power_iterate(lap: &DMatrix<f64>, tol: f64) -> DVector<f64> {
    // Uniformized lazy kernel I + L / (2 * max exit rate) is aperiodic and
    // has the same invariant measure.
    let n = lap.nrows();
    let rate = (0..n).map(|i| -lap[(i, i)]).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let kernel = DMatrix::identity(n, n) + lap / (2.0 * rate);
    let mut mu = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..1_000_000 {
        let next = kernel.tr_mul(&mu);
        let next = &next / next.sum();
        let done = (&next - &mu).amax() <= tol * 1e-2;
        mu = next;
        if done {
            break;
        }
    }
    mu
}

fn check_invariant(p: &TransitionMatrix, mu: &Distribution) -> Result<()> {
    if mu.size() != p.size() {
        return Err(Error::DimensionMismatch {
            expected: p.size(),
            found: mu.size(),
        });
    }
    mu.ensure_positive()?;
    let residual = (p.push_forward(mu) - mu.as_vector()).amax();
    if residual > INVARIANCE_CHECK_TOL {
        return Err(Error::NotInvariant { residual });
    }
    Ok(())
}

/// Checks `mu` is strictly positive and `mu L = 0` for any kernel.
pub fn check_invariant_for<K: MarkovKernel + ?Sized>(kernel: &K, mu: &Distribution) -> Result<()> {
    if mu.size() != kernel.size() {
        return Err(Error::DimensionMismatch {
            expected: kernel.size(),
            found: mu.size(),
        });
    }
    mu.ensure_positive()?;
    let residual = stationary_residual(&kernel.laplacian(), mu.as_vector());
    if residual > INVARIANCE_CHECK_TOL * kernel.rate_scale() {
        return Err(Error::NotInvariant { residual });
    }
    Ok(())
}

/// Time reversal `P*(i, j) = mu(j) P(j, i) / mu(i)`.
pub fn adjoint(p: &TransitionMatrix, mu: &Distribution) -> Result<TransitionMatrix> {
    check_invariant(p, mu)?;
    let w = mu.weights();
    let n = p.size();
    let entries = DMatrix::from_fn(n, n, |i, j| w[j] * p.get(j, i) / w[i]);
    TransitionMatrix::with_tolerance(p.space().clone(), entries, INVARIANCE_CHECK_TOL * 10.0)
}

/// `A = (P + P*) / 2`, self-adjoint in `L2(mu)`.
pub fn additive_symmetrization(p: &TransitionMatrix, mu: &Distribution) -> Result<TransitionMatrix> {
    let star = adjoint(p, mu)?;
    let entries = (p.entries() + star.entries()) * 0.5;
    TransitionMatrix::new(p.space().clone(), entries)
}

/// Max-norm of `D_mu P - P^T D_mu`; zero exactly when `P` is reversible.
pub fn detailed_balance_deviation(p: &DMatrix<f64>, mu: &Distribution) -> f64 {
    let w = mu.weights();
    let n = p.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((w[i] * p[(i, j)] - w[j] * p[(j, i)]).abs());
        }
    }
    worst
}

/// `|| nu / mu ||_{L_p(mu)}` for `p` in `(1, inf]`.
pub fn radon_nikodym_norm(nu: &Distribution, mu: &Distribution, p: f64) -> Result<f64> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::InvalidP(p));
    }
    if nu.size() != mu.size() {
        return Err(Error::DimensionMismatch {
            expected: mu.size(),
            found: nu.size(),
        });
    }
    let (nw, mw) = (nu.weights(), mu.weights());
    let mut ratios = Vec::with_capacity(nw.len());
    for i in 0..nw.len() {
        if nw[i] > 0.0 && mw[i] <= 0.0 {
            return Err(Error::NotAbsolutelyContinuous(i));
        }
        if mw[i] > 0.0 {
            ratios.push((mw[i], nw[i] / mw[i]));
        }
    }
    let rmax = ratios.iter().map(|&(_, r)| r).fold(0.0_f64, f64::max);
    if p.is_infinite() {
        return Ok(rmax);
    }
    // Scaled by the largest ratio so large p cannot overflow.
    let scaled: f64 = ratios.iter().map(|&(m, r)| m * (r / rmax).powf(p)).sum();
    Ok(rmax * scaled.powf(1.0 / p))
}

/// Builds an observable, centering it under `mu` when `auto_center` is set.
pub fn make_observable(values: &[f64], mu: &Distribution, auto_center: bool) -> Result<Observable> {
    if values.len() != mu.size() {
        return Err(Error::DimensionMismatch {
            expected: mu.size(),
            found: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let mean = mu.expect(values);
    let values: Vec<f64> = if auto_center {
        values.iter().map(|v| v - mean).collect()
    } else if mean.abs() > CENTERING_TOL {
        return Err(Error::NotCentered { mean });
    } else {
        values.to_vec()
    };
    let mean_mu = mu.expect(&values);
    let sup_norm = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let second: f64 = mu.inner(&values, &values);
    let sigma2 = (second - mean_mu * mean_mu).clamp(0.0, sup_norm * sup_norm);
    Ok(Observable {
        centered: mean_mu.abs() <= CENTERING_TOL,
        values,
        mean_mu,
        sup_norm,
        sigma2,
    })
}
