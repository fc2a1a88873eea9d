//! Spectral-gap quantities in the `L2(mu)` geometry.
//!
//! Operators are moved into the Euclidean picture with the similarity
//! `D^{1/2} Op D^{-1/2}` (`D = diag(mu)`), under which `L2(mu)` inner products
//! become ordinary dot products and the constants become the unit vector
//! `sqrt(mu)`. Every gap is then a singular value or eigenvalue of the
//! embedded matrix restricted to the complement of `sqrt(mu)`:
//!
//! ```text
//! eta_p = min  ||M_L g|| ,  eta_a = 1 - max ||M_P g|| ,  eta_s = 1 - max <g, M_P g>
//! ```
//!
//! over unit `g` orthogonal to `sqrt(mu)`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chain::{
    check_invariant_for, detailed_balance_deviation, Distribution, GeneratorMatrix, MarkovKernel,
    TransitionMatrix,
};
use crate::error::{Error, Result};

/// Deflation weight for the `sqrt(mu)` direction; above the `eta_p <= 2` cap.
pub const DEFLATION_SHIFT: f64 = 3.0;
/// Allowed `|D P - P^T D|` for a chain to count as reversible.
pub const REVERSIBILITY_TOL: f64 = 1e-10;
/// Relative threshold below which a singular value is treated as zero.
pub const ZERO_SINGULAR_RTOL: f64 = 1e-10;
/// Slack used by [`verify_iterated_poincare`].
pub const POINCARE_SLACK: f64 = 1e-9;
pub const DEFAULT_PSEUDO_KMAX: u32 = 20;
pub const DEFAULT_RADIUS_GRID: usize = 720;

/// `D^{1/2} Op D^{-1/2}` together with `sqrt(mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedOperator {
    matrix: DMatrix<f64>,
    sqrt_mu: DVector<f64>,
}

impl WeightedOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn sqrt_mu(&self) -> &DVector<f64> {
        &self.sqrt_mu
    }

    /// `I - sqrt(mu) sqrt(mu)^T`.
    pub fn complement_projector(&self) -> DMatrix<f64> {
        let n = self.sqrt_mu.len();
        DMatrix::identity(n, n) - &self.sqrt_mu * self.sqrt_mu.transpose()
    }

    /// Matrix with the `sqrt(mu)` direction pushed to singular value `shift`.
    fn deflated(&self, shift: f64) -> DMatrix<f64> {
        &self.matrix + shift * (&self.sqrt_mu * self.sqrt_mu.transpose())
    }
}

/// Embeds an arbitrary square operator; `mu` must be strictly positive.
pub fn embed_weighted(op: &DMatrix<f64>, mu: &Distribution) -> Result<WeightedOperator> {
    let n = mu.size();
    if op.nrows() != n || op.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: op.nrows(),
        });
    }
    if let Some(i) = mu.weights().iter().position(|&w| w <= 0.0) {
        return Err(Error::ZeroMass(i));
    }
    let sqrt_mu = DVector::from_iterator(n, mu.weights().iter().map(|w| w.sqrt()));
    let matrix = DMatrix::from_fn(n, n, |i, j| sqrt_mu[i] * op[(i, j)] / sqrt_mu[j]);
    Ok(WeightedOperator { matrix, sqrt_mu })
}

fn prepare<K: MarkovKernel + ?Sized>(kernel: &K, mu: &Distribution) -> Result<()> {
    if kernel.size() == 1 {
        return Err(Error::DegenerateStateSpace);
    }
    check_invariant_for(kernel, mu)
}

fn smallest_singular(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let svd = m.clone().svd(false, true);
    let (idx, &value) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let v_t = svd.v_t.expect("requested right singular vectors");
    (value, v_t.row(idx).transpose())
}

fn largest_singular(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

fn largest_eigenvalue(sym: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym).eigenvalues.max()
}

/// Iterated Poincare gap with its minimizing direction, for chains or generators.
///
/// Returns `(eta_p, h)` where `h` is mean-zero with `||h||_mu = 1` and
/// `||L h||_mu = eta_p`.
pub fn ip_gap_with_minimizer<K: MarkovKernel + ?Sized>(
    kernel: &K,
    mu: &Distribution,
) -> Result<(f64, Vec<f64>)> {
    prepare(kernel, mu)?;
    let embedded = embed_weighted(&kernel.laplacian(), mu)?;
    // M_L maps sqrt(mu) to 0 and preserves its complement, so adding a large
    // rank-one term isolates the complement's smallest singular value.
    let shift = DEFLATION_SHIFT.max(1.0 + embedded.matrix.norm());
    let (gap, g) = smallest_singular(&embedded.deflated(shift));
    let h = g
        .iter()
        .zip(embedded.sqrt_mu.iter())
        .map(|(gi, si)| gi / si)
        .collect();
    Ok((gap, h))
}

/// `eta_p` of a transition matrix, in `[0, 2]`.
pub fn ip_gap(p: &TransitionMatrix, mu: &Distribution) -> Result<f64> {
    ip_gap_with_minimizer(p, mu).map(|(g, _)| g)
}

/// `eta_p` of a generator, in units of 1/time.
pub fn ip_gap_generator(q: &GeneratorMatrix, mu: &Distribution) -> Result<f64> {
    ip_gap_with_minimizer(q, mu).map(|(g, _)| g)
}

/// `lambda_s`: top eigenvalue of `(P + P*) / 2` on mean-zero functions.
pub fn symmetric_lambda(p: &TransitionMatrix, mu: &Distribution) -> Result<f64> {
    prepare(p, mu)?;
    let embedded = embed_weighted(p.entries(), mu)?;
    let m = &embedded.matrix;
    // The constant direction has eigenvalue 1; shifting it to -2 leaves the
    // largest remaining eigenvalue as lambda_s.
    let sym = (m + m.transpose()) * 0.5
        - DEFLATION_SHIFT * (&embedded.sqrt_mu * embedded.sqrt_mu.transpose());
    Ok(largest_eigenvalue(sym))
}

/// `eta_s = 1 - lambda_s`; not clamped.
pub fn symmetric_gap(p: &TransitionMatrix, mu: &Distribution) -> Result<f64> {
    symmetric_lambda(p, mu).map(|l| 1.0 - l)
}

/// `lambda_a`: operator norm of `P` on mean-zero functions.
pub fn absolute_lambda(p: &TransitionMatrix, mu: &Distribution) -> Result<f64> {
    prepare(p, mu)?;
    let embedded = embed_weighted(p.entries(), mu)?;
    let proj = embedded.complement_projector();
    Ok(largest_singular(&(&proj * &embedded.matrix * &proj)))
}

/// `eta_a = 1 - lambda_a`.
pub fn absolute_gap(p: &TransitionMatrix, mu: &Distribution) -> Result<f64> {
    absolute_lambda(p, mu).map(|l| 1.0 - l)
}

/// Classical gap `1 - lambda_2`; only defined for reversible chains.
pub fn ordinary_gap(p: &TransitionMatrix, mu: &Distribution) -> Result<f64> {
    prepare(p, mu)?;
    let deviation = detailed_balance_deviation(p.entries(), mu);
    if deviation > REVERSIBILITY_TOL {
        return Err(Error::NotReversible { deviation });
    }
    symmetric_gap(p, mu)
}

/// Truncated pseudo spectral gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoGap {
    /// `max_{k <= k_max} gap((P*)^k P^k) / k`; a lower bound on the supremum over all `k`.
    pub value: f64,
    pub k: u32,
    pub k_max: u32,
}

/// Pseudo spectral gap truncated at `k_max`.
pub fn pseudo_gap(p: &TransitionMatrix, mu: &Distribution, k_max: u32) -> Result<PseudoGap> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    prepare(p, mu)?;
    let embedded = embed_weighted(p.entries(), mu)?;
    let rank_one = &embedded.sqrt_mu * embedded.sqrt_mu.transpose();
    let mut power = embedded.matrix.clone();
    let mut best = PseudoGap {
        value: f64::NEG_INFINITY,
        k: 1,
        k_max,
    };
    for k in 1..=k_max {
        if k > 1 {
            power = &power * &embedded.matrix;
        }
        // Embedding of (P*)^k P^k is (M^k)^T M^k.
        let product = power.transpose() * &power;
        let sym = (&product + product.transpose()) * 0.5 - DEFLATION_SHIFT * &rank_one;
        let gap = (1.0 - largest_eigenvalue(sym)) / k as f64;
        if gap > best.value {
            best.value = gap;
            best.k = k;
        }
    }
    Ok(best)
}

/// Outcome of checking `Var_mu[h] <= eta_p^{-2} E_mu[(L h)^2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub eta_p: f64,
    pub holds: bool,
}

/// Evaluates both sides of the iterated Poincare inequality for `h`.
pub fn verify_iterated_poincare<K: MarkovKernel + ?Sized>(
    kernel: &K,
    mu: &Distribution,
    h: &[f64],
) -> Result<PoincareCheck> {
    let eta_p = ip_gap_with_minimizer(kernel, mu)?.0;
    poincare_sides(kernel, mu, h, eta_p)
}

/// Same as [`verify_iterated_poincare`] with a precomputed gap.
pub fn poincare_sides<K: MarkovKernel + ?Sized>(
    kernel: &K,
    mu: &Distribution,
    h: &[f64],
    eta_p: f64,
) -> Result<PoincareCheck> {
    if h.len() != kernel.size() {
        return Err(Error::DimensionMismatch {
            expected: kernel.size(),
            found: h.len(),
        });
    }
    let lhs = mu.variance(h);
    let lh = kernel.laplacian() * DVector::from_column_slice(h);
    let energy = mu.inner(lh.as_slice(), lh.as_slice());
    let scale = embed_scale(kernel);
    if eta_p <= ZERO_SINGULAR_RTOL * scale {
        if lhs <= POINCARE_SLACK * scale {
            return Ok(PoincareCheck {
                lhs,
                rhs: 0.0,
                eta_p,
                holds: true,
            });
        }
        return Err(Error::GapZero { variance: lhs });
    }
    let rhs = energy / (eta_p * eta_p);
    Ok(PoincareCheck {
        lhs,
        rhs,
        eta_p,
        holds: lhs <= rhs + POINCARE_SLACK * rhs.max(1.0),
    })
}

fn embed_scale<K: MarkovKernel + ?Sized>(kernel: &K) -> f64 {
    kernel.rate_scale()
}

/// Real numerical radius `sup |<Bx, x>|` over real unit `x`.
pub fn numerical_radius_real(b: &DMatrix<f64>) -> f64 {
    let sym = (b + b.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
}

// Spectral radius of Re(e^{i phi} B) = cos(phi) S + i sin(phi) K via its real
// symmetric embedding [[S, -K], [K, S]].
fn hermitian_part_radius(sym: &DMatrix<f64>, skew: &DMatrix<f64>, phi: f64) -> f64 {
    let n = sym.nrows();
    let (c, s) = (phi.cos(), phi.sin());
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let a = c * sym[(i, j)];
            let k = s * skew[(i, j)];
            big[(i, j)] = a;
            big[(i + n, j + n)] = a;
            big[(i, j + n)] = -k;
            big[(i + n, j)] = k;
        }
    }
    SymmetricEigen::new(big)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Complex numerical radius `sup |<Bx, x>|` over complex unit `x`.
///
/// Evaluated as `max_phi rho(Re(e^{i phi} B))` on `grid_points` angles in
/// `[0, pi)`, followed by one local refinement pass around the best angle.
/// The result never exceeds the true radius.
pub fn numerical_radius_complex(b: &DMatrix<f64>, grid_points: usize) -> Result<f64> {
    if grid_points < 8 {
        return Err(Error::InvalidArgument("grid_points must be at least 8".into()));
    }
    if b.nrows() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            found: b.ncols(),
        });
    }
    let sym = (b + b.transpose()) * 0.5;
    let skew = (b - b.transpose()) * 0.5;
    let step = std::f64::consts::PI / grid_points as f64;
    let (mut best_phi, mut best) = (0.0, f64::NEG_INFINITY);
    for k in 0..grid_points {
        let phi = k as f64 * step;
        let r = hermitian_part_radius(&sym, &skew, phi);
        if r > best {
            best = r;
            best_phi = phi;
        }
    }
    const SUBDIVISIONS: usize = 64;
    let sub = 2.0 * step / SUBDIVISIONS as f64;
    for k in 0..=SUBDIVISIONS {
        let phi = best_phi - step + k as f64 * sub;
        best = best.max(hermitian_part_radius(&sym, &skew, phi));
    }
    Ok(best)
}

/// Numerical radius evaluated directly on complex unit vectors; slow, for tests.
pub fn rayleigh_abs(b: &DMatrix<f64>, x: &[Complex<f64>]) -> f64 {
    let n = b.nrows();
    let mut acc = Complex::new(0.0, 0.0);
    let mut norm = 0.0;
    for i in 0..n {
        norm += x[i].norm_sqr();
        for j in 0..n {
            acc += x[i].conj() * b[(i, j)] * x[j];
        }
    }
    acc.norm() / norm
}

/// Tolerances recorded alongside a [`GapReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapTolerances {
    pub reversibility: f64,
    pub zero_singular_rtol: f64,
    pub deflation_shift: f64,
}

impl Default for GapTolerances {
    fn default() -> Self {
        Self {
            reversibility: REVERSIBILITY_TOL,
            zero_singular_rtol: ZERO_SINGULAR_RTOL,
            deflation_shift: DEFLATION_SHIFT,
        }
    }
}

/// All gap quantities for one operator.
///
/// For generators only `eta_p` is defined and the discrete-time fields are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub eta_p: f64,
    pub eta_s: Option<f64>,
    pub eta_a: Option<f64>,
    pub eta: Option<f64>,
    pub pseudo: Option<PseudoGap>,
    pub degenerate: bool,
    pub tolerances: GapTolerances,
}

impl GapReport {
    fn degenerate(discrete: bool, k_max: u32) -> Self {
        let zero = discrete.then_some(0.0);
        Self {
            eta_p: 0.0,
            eta_s: zero,
            eta_a: zero,
            eta: zero,
            pseudo: discrete.then_some(PseudoGap {
                value: 0.0,
                k: 1,
                k_max,
            }),
            degenerate: true,
            tolerances: GapTolerances::default(),
        }
    }
}

/// Every gap of a transition matrix. One-state chains get zeros and `degenerate = true`.
pub fn gap_report(p: &TransitionMatrix, mu: &Distribution, k_max: u32) -> Result<GapReport> {
    if p.size() == 1 {
        return Ok(GapReport::degenerate(true, k_max));
    }
    let eta = match ordinary_gap(p, mu) {
        Ok(v) => Some(v),
        Err(Error::NotReversible { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(GapReport {
        eta_p: ip_gap(p, mu)?,
        eta_s: Some(symmetric_gap(p, mu)?),
        eta_a: Some(absolute_gap(p, mu)?),
        eta,
        pseudo: Some(pseudo_gap(p, mu, k_max)?),
        degenerate: false,
        tolerances: GapTolerances::default(),
    })
}

/// Gap report for a generator (only `eta_p` is populated).
pub fn gap_report_generator(q: &GeneratorMatrix, mu: &Distribution) -> Result<GapReport> {
    if q.size() == 1 {
        return Ok(GapReport::degenerate(false, 0));
    }
    Ok(GapReport {
        eta_p: ip_gap_generator(q, mu)?,
        eta_s: None,
        eta_a: None,
        eta: None,
        pseudo: None,
        degenerate: false,
        tolerances: GapTolerances::default(),
    })
}
