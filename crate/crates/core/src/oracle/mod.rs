//! Exact (non-random) moment generating functions, identity checks and small
//! tail probabilities, used as ground truth for the bounds.
//!
//! Discrete time uses the transfer operator `T_theta = P diag(e^{theta f})`:
//!
//! ```text
//! E_{Z_1 ~ nu} exp(theta sum_{k<=n} f(Z_k)) = nu^T diag(e^{theta f}) T_theta^{n-1} 1
//! ```
//!
//! Continuous time uses the Feynman-Kac form `nu^T exp(t (Q + theta diag f)) 1`.

mod expm;
mod tail;

pub use expm::matrix_exponential;
pub use tail::{exact_tail_discrete, lattice_of, ENUMERATION_CAP};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::Horizon;
use crate::chain::{stationary_distribution, Distribution, GeneratorMatrix, MarkovKernel, TransitionMatrix};
use crate::error::{Error, Result};
use crate::numeric::exprel;

/// `P diag(e^{theta f})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOperator {
    matrix: DMatrix<f64>,
    weights: DVector<f64>,
    theta: f64,
}

impl TransferOperator {
    pub fn new(p: &TransitionMatrix, f: &[f64], theta: f64) -> Result<Self> {
        check_len(p.size(), f.len())?;
        let weights = DVector::from_iterator(f.len(), f.iter().map(|v| (theta * v).exp()));
        let mut matrix = p.entries().clone();
        for (j, mut col) in matrix.column_iter_mut().enumerate() {
            col *= weights[j];
        }
        Ok(Self {
            matrix,
            weights,
            theta,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `e^{theta f}` as a vector.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `G(z) = E[exp(theta F) | start at z]`, stored as `scaled * exp(log_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMgf {
    scaled: Vec<f64>,
    log_scale: f64,
    pub horizon: Horizon,
    pub theta: f64,
}

impl ConditionalMgf {
    pub fn values(&self) -> Vec<f64> {
        let s = self.log_scale.exp();
        self.scaled.iter().map(|v| v * s).collect()
    }

    pub fn log_values(&self) -> Vec<f64> {
        self.scaled.iter().map(|v| v.ln() + self.log_scale).collect()
    }

    /// `log E_{Z ~ init}[G(Z)]`.
    pub fn log_average(&self, init: &Distribution) -> f64 {
        init.expect(&self.scaled).ln() + self.log_scale
    }

    pub fn average(&self, init: &Distribution) -> f64 {
        self.log_average(init).exp()
    }
}

/// `G_n = diag(e^{theta f}) (P diag(e^{theta f}))^{n-1} 1`, rescaled after
/// every product so long horizons do not overflow.
pub fn conditional_mgf_discrete(p: &TransitionMatrix, f: &[f64], theta: f64, n: u64) -> Result<ConditionalMgf> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let op = TransferOperator::new(p, f, theta)?;
    let mut v = DVector::from_element(p.size(), 1.0);
    let mut log_scale = 0.0;
    for _ in 1..n {
        v = op.matrix() * v;
        let s = v.max();
        v /= s;
        log_scale += s.ln();
    }
    v.component_mul_assign(op.weights());
    let s = v.max();
    v /= s;
    log_scale += s.ln();
    Ok(ConditionalMgf {
        scaled: v.iter().copied().collect(),
        log_scale,
        horizon: Horizon::Steps(n),
        theta,
    })
}

/// `log E_{Z_1 ~ init} exp(theta sum_{k=1}^n f(Z_k))`.
pub fn log_exact_mgf_discrete(
    p: &TransitionMatrix,
    init: &Distribution,
    f: &[f64],
    theta: f64,
    n: u64,
) -> Result<f64> {
    check_len(p.size(), init.size())?;
    let log_mgf = conditional_mgf_discrete(p, f, theta, n)?.log_average(init);
    Ok(if theta == 0.0 { 0.0 } else { log_mgf })
}

/// `E_{Z_1 ~ init} exp(theta sum_{k=1}^n f(Z_k))`.
pub fn exact_mgf_discrete(
    p: &TransitionMatrix,
    init: &Distribution,
    f: &[f64],
    theta: f64,
    n: u64,
) -> Result<f64> {
    log_exact_mgf_discrete(p, init, f, theta, n).map(f64::exp)
}

/// Outcome of a numerical identity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let gap = (lhs - rhs).abs();
        Self {
            lhs,
            rhs,
            gap,
            tolerance,
            passed: gap <= tolerance,
        }
    }
}

/// Checks `(P G_n - G_n)(z)` against the path expansion
/// `sum_paths prob * theta (f(z_{n+1}) - f(z_1)) * (e^B - e^A) / (B - A)`,
/// with `A = theta F(z_{1:n})` and `B = theta F(z_{2:n+1})`.
pub fn verify_laplacian_identity(
    p: &TransitionMatrix,
    f: &[f64],
    theta: f64,
    n: u64,
    z: usize,
) -> Result<IdentityCheck> {
    let size = p.size();
    check_len(size, f.len())?;
    if z >= size {
        return Err(Error::InvalidArgument(format!("state {z} out of range")));
    }
    let required = (size as f64).powf(n as f64 + 1.0);
    if required > ENUMERATION_CAP {
        return Err(Error::TooLarge {
            required,
            cap: ENUMERATION_CAP,
        });
    }
    let g = DVector::from_vec(conditional_mgf_discrete(p, f, theta, n)?.values());
    let pg = p.entries() * &g;
    let lhs = pg[z] - g[z];

    // Depth-first over z_2..z_{n+1}; `a` accumulates theta F(z_{1:k}).
    struct Walk<'a> {
        p: &'a DMatrix<f64>,
        f: &'a [f64],
        theta: f64,
        n: usize,
        start: usize,
        total: f64,
    }
    impl Walk<'_> {
        fn go(&mut self, state: usize, depth: usize, prob: f64, a: f64) {
            if depth == self.n + 1 {
                // a = theta F(z_{1:n+1}); split into A and B.
                let big_a = a - self.theta * self.f[state];
                let big_b = a - self.theta * self.f[self.start];
                let d = big_b - big_a;
                let integral = big_a.exp() * exprel(d);
                self.total += prob * d * integral;
                return;
            }
            for next in 0..self.p.nrows() {
                let w = self.p[(state, next)];
                if w > 0.0 {
                    self.go(next, depth + 1, prob * w, a + self.theta * self.f[next]);
                }
            }
        }
    }
    let mut walk = Walk {
        p: p.entries(),
        f,
        theta,
        n: n as usize,
        start: z,
        total: 0.0,
    };
    walk.go(z, 1, 1.0, theta * f[z]);
    Ok(IdentityCheck::new(lhs, walk.total, 1e-10 * lhs.abs().max(1.0)))
}

fn feynman_kac(q: &GeneratorMatrix, f: &[f64], theta: f64, t: f64) -> Result<DVector<f64>> {
    check_len(q.size(), f.len())?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let mut a = q.entries().clone();
    for i in 0..f.len() {
        a[(i, i)] += theta * f[i];
    }
    let e = matrix_exponential(&a, t)?;
    Ok(e * DVector::from_element(f.len(), 1.0))
}

/// `G_t(z) = E[exp(theta int_0^t f(Z_s) ds) | Z_0 = z]`.
pub fn conditional_mgf_continuous(q: &GeneratorMatrix, f: &[f64], theta: f64, t: f64) -> Result<ConditionalMgf> {
    let g = feynman_kac(q, f, theta, t)?;
    let s = g.max();
    Ok(ConditionalMgf {
        scaled: g.iter().map(|v| v / s).collect(),
        log_scale: s.ln(),
        horizon: Horizon::Time(t),
        theta,
    })
}

/// `E_{Z_0 ~ init} exp(theta int_0^t f(Z_s) ds)`.
pub fn exact_mgf_continuous(
    q: &GeneratorMatrix,
    init: &Distribution,
    f: &[f64],
    theta: f64,
    t: f64,
) -> Result<f64> {
    check_len(q.size(), init.size())?;
    if t == 0.0 || theta == 0.0 {
        check_len(q.size(), f.len())?;
        return Ok(1.0);
    }
    let g = feynman_kac(q, f, theta, t)?;
    Ok(init.expect(g.as_slice()))
}

/// Checks `a'(t) = E_mu[theta f G_t]` for `a(t) = E_mu[G_t]`, with the
/// derivative taken by Richardson-extrapolated central differences.
pub fn verify_a_prime_identity(q: &GeneratorMatrix, f: &[f64], theta: f64, t: f64) -> Result<IdentityCheck> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let mu = stationary_distribution(q)?;
    let a = |s: f64| -> Result<f64> { exact_mgf_continuous(q, &mu, f, theta, s) };
    let rate = q.rate_scale() + theta.abs() * f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let h = (0.5 * t).min(1e-2 / rate);
    let central = |h: f64| -> Result<f64> { Ok((a(t + h)? - a(t - h)?) / (2.0 * h)) };
    let lhs = (4.0 * central(0.5 * h)? - central(h)?) / 3.0;
    let g = feynman_kac(q, f, theta, t)?;
    let weighted: Vec<f64> = f.iter().zip(g.iter()).map(|(fv, gv)| theta * fv * gv).collect();
    let rhs = mu.expect(&weighted);
    Ok(IdentityCheck::new(lhs, rhs, 1e-6_f64.max(1e-4 * lhs.abs())))
}
