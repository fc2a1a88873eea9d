//! Closed-form MGF and Bernstein-type tail bounds driven by the iterated
//! Poincare gap.
//!
//! With `c(theta) = sqrt(1 - 4 theta^2 M^2 / eta_p^2)` the MGF bounds are
//!
//! ```text
//! discrete:    E_mu exp(theta S_n)   <= exp(n sigma M theta^2 (2 + 6 eta_p) / (c(theta) eta_p))
//! continuous:  E_mu exp(theta I_t)   <= exp(2 sigma M theta^2 t / (c(theta) eta_p))
//! ```
//!
//! and the two-sided tail bounds, for an initial law `nu` with
//! `||nu/mu||_p` finite and `q = p / (p - 1)`, are
//!
//! ```text
//! discrete:    2 ||nu/mu||_p exp(-n eta_p delta^2 / (4 q M sqrt((2 + 6 eta_p)^2 sigma^2 + delta^2)))
//! continuous:  2 ||nu/mu||_p exp(-t eta_p delta^2 / (4 q M sqrt(4 sigma^2 + delta^2)))
//! ```
//!
//! Exponents are formed first and exponentiated last.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents below this report a probability bound of exactly 0.
pub const UNDERFLOW_EXPONENT: f64 = -745.0;
/// Relative slack allowed in `sigma2 <= M^2`.
const VARIANCE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Discrete,
    Continuous,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Discrete => "discrete",
            Mode::Continuous => "continuous",
        })
    }
}

/// Number of steps for chains, elapsed time for jump processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Steps(u64),
    Time(f64),
}

impl Horizon {
    pub fn mode(&self) -> Mode {
        match self {
            Horizon::Steps(_) => Mode::Discrete,
            Horizon::Time(_) => Mode::Continuous,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Horizon::Steps(n) => n as f64,
            Horizon::Time(t) => t,
        }
    }
}

/// `q = p / (p - 1)`, with `p = inf` giving exactly 1.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::InvalidP(p));
    }
    if p.is_infinite() {
        return Ok(1.0);
    }
    Ok(p / (p - 1.0))
}

/// Validated inputs to a tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    horizon: Horizon,
    delta: f64,
    m: f64,
    sigma2: f64,
    eta_p: f64,
    p: f64,
    q: f64,
    nu_norm: f64,
}

impl BoundQuery {
    pub fn new(
        horizon: Horizon,
        delta: f64,
        m: f64,
        sigma2: f64,
        eta_p: f64,
        p: f64,
        nu_norm: f64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidQuery(msg));
        match horizon {
            Horizon::Steps(0) => return bad("n must be at least 1".into()),
            Horizon::Time(t) if !(t.is_finite() && t > 0.0) => {
                return bad(format!("t must be positive and finite, got {t}"))
            }
            _ => {}
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return bad(format!("delta must be finite and >= 0, got {delta}"));
        }
        if !(m.is_finite() && m > 0.0) {
            return bad(format!("M must be positive and finite, got {m}"));
        }
        if !(eta_p.is_finite() && eta_p > 0.0) {
            return bad(format!("eta_p must be positive and finite, got {eta_p}"));
        }
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return bad(format!("sigma2 must be finite and >= 0, got {sigma2}"));
        }
        if sigma2 > m * m * (1.0 + VARIANCE_SLACK) {
            return bad(format!("sigma2 = {sigma2} exceeds M^2 = {}", m * m));
        }
        if !(nu_norm.is_finite() && nu_norm >= 1.0 - 1e-12) {
            return bad(format!("nu_norm must be finite and >= 1, got {nu_norm}"));
        }
        let q = conjugate_exponent(p)?;
        Ok(Self {
            horizon,
            delta,
            m,
            sigma2,
            eta_p,
            p,
            q,
            nu_norm,
        })
    }

    /// Query with `p = inf` and `nu = mu`.
    pub fn stationary(horizon: Horizon, delta: f64, m: f64, sigma2: f64, eta_p: f64) -> Result<Self> {
        Self::new(horizon, delta, m, sigma2, eta_p, f64::INFINITY, 1.0)
    }

    pub fn mode(&self) -> Mode {
        self.horizon.mode()
    }
    pub fn horizon(&self) -> Horizon {
        self.horizon
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn sup_norm(&self) -> f64 {
        self.m
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
    pub fn eta_p(&self) -> f64 {
        self.eta_p
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn nu_norm(&self) -> f64 {
        self.nu_norm
    }

    pub fn with_horizon(&self, horizon: Horizon) -> Result<Self> {
        Self::new(horizon, self.delta, self.m, self.sigma2, self.eta_p, self.p, self.nu_norm)
    }
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.horizon, delta, self.m, self.sigma2, self.eta_p, self.p, self.nu_norm)
    }
    pub fn with_eta_p(&self, eta_p: f64) -> Result<Self> {
        Self::new(self.horizon, self.delta, self.m, self.sigma2, eta_p, self.p, self.nu_norm)
    }
    pub fn with_sup_norm(&self, m: f64) -> Result<Self> {
        Self::new(self.horizon, self.delta, m, self.sigma2, self.eta_p, self.p, self.nu_norm)
    }
    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.horizon, self.delta, self.m, sigma2, self.eta_p, self.p, self.nu_norm)
    }
    pub fn with_nu_norm(&self, nu_norm: f64) -> Result<Self> {
        Self::new(self.horizon, self.delta, self.m, self.sigma2, self.eta_p, self.p, nu_norm)
    }
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.horizon, self.delta, self.m, self.sigma2, self.eta_p, p, self.nu_norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// `2 ||nu/mu|| exp(exponent)`; may exceed 1.
    pub probability_bound: f64,
    pub exponent: f64,
    pub theta_used: f64,
    /// `c(q theta_used)`; 0 in the `sigma = 0` boundary limit.
    pub c_theta: f64,
    pub vacuous: bool,
    /// Set when `sigma = 0` and the bound is the limit of the closed form.
    pub boundary_limit: bool,
}

impl BoundResult {
    fn assemble(nu_norm: f64, exponent: f64, theta_used: f64, c_theta: f64, boundary_limit: bool) -> Self {
        let probability_bound = if exponent < UNDERFLOW_EXPONENT {
            0.0
        } else {
            2.0 * nu_norm * exponent.exp()
        };
        Self {
            probability_bound,
            exponent,
            theta_used,
            c_theta,
            vacuous: probability_bound >= 1.0,
            boundary_limit,
        }
    }
}

/// Largest admissible `|theta|`, i.e. `eta_p / (2M)`.
pub fn theta_limit(m: f64, eta_p: f64) -> f64 {
    eta_p / (2.0 * m)
}

/// `c(theta) = sqrt(1 - 4 theta^2 M^2 / eta_p^2)`.
pub fn c_theta(theta: f64, m: f64, eta_p: f64) -> Result<f64> {
    let limit = theta_limit(m, eta_p);
    if !(theta.abs() < limit) {
        return Err(Error::ThetaOutOfRange { theta, limit });
    }
    let r = 2.0 * theta * m / eta_p;
    Ok(((1.0 - r) * (1.0 + r)).sqrt())
}

/// Log of the discrete MGF bound.
pub fn log_mgf_bound_discrete(theta: f64, n: u64, m: f64, sigma: f64, eta_p: f64) -> Result<f64> {
    let c = c_theta(theta, m, eta_p)?;
    Ok(n as f64 * sigma * m * theta * theta * (2.0 + 6.0 * eta_p) / (c * eta_p))
}

pub fn mgf_bound_discrete(theta: f64, n: u64, m: f64, sigma: f64, eta_p: f64) -> Result<f64> {
    log_mgf_bound_discrete(theta, n, m, sigma, eta_p).map(f64::exp)
}

/// Log of the continuous-time MGF bound.
pub fn log_mgf_bound_continuous(theta: f64, t: f64, m: f64, sigma: f64, eta_p: f64) -> Result<f64> {
    let c = c_theta(theta, m, eta_p)?;
    Ok(2.0 * sigma * m * theta * theta * t / (c * eta_p))
}

pub fn mgf_bound_continuous(theta: f64, t: f64, m: f64, sigma: f64, eta_p: f64) -> Result<f64> {
    log_mgf_bound_continuous(theta, t, m, sigma, eta_p).map(f64::exp)
}

fn optimal_theta(delta: f64, m: f64, sigma_scale: f64, eta_p: f64, q: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    delta * eta_p / (2.0 * q * m * sigma_scale.hypot(delta))
}

/// `theta = delta eta_p / (2 q M sqrt((2 + 6 eta_p)^2 sigma^2 + delta^2))`.
pub fn optimal_theta_discrete(delta: f64, m: f64, sigma: f64, eta_p: f64, q: f64) -> Result<f64> {
    check_theta_inputs(delta, m, sigma, eta_p, q)?;
    Ok(optimal_theta(delta, m, (2.0 + 6.0 * eta_p) * sigma, eta_p, q))
}

/// `theta = delta eta_p / (2 q M sqrt(4 sigma^2 + delta^2))`.
pub fn optimal_theta_continuous(delta: f64, m: f64, sigma: f64, eta_p: f64, q: f64) -> Result<f64> {
    check_theta_inputs(delta, m, sigma, eta_p, q)?;
    Ok(optimal_theta(delta, m, 2.0 * sigma, eta_p, q))
}

fn check_theta_inputs(delta: f64, m: f64, sigma: f64, eta_p: f64, q: f64) -> Result<()> {
    let ok = delta >= 0.0 && m > 0.0 && sigma >= 0.0 && eta_p > 0.0 && q >= 1.0;
    if !ok || ![delta, m, sigma, eta_p, q].iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidQuery(format!(
            "need delta >= 0, M > 0, sigma >= 0, eta_p > 0, q >= 1 (got {delta}, {m}, {sigma}, {eta_p}, {q})"
        )));
    }
    Ok(())
}

// Shared assembly; `sigma_scale` is (2 + 6 eta_p) sigma or 2 sigma.
fn tail_bound_with(query: &BoundQuery, sigma_scale: f64) -> BoundResult {
    let (h, d, m, eta, q) = (
        query.horizon.value(),
        query.delta,
        query.m,
        query.eta_p,
        query.q,
    );
    let radical = sigma_scale.hypot(d);
    let (exponent, theta, c) = if d == 0.0 {
        (0.0, 0.0, 1.0)
    } else {
        (
            -h * eta * d * d / (4.0 * q * m * radical),
            optimal_theta(d, m, sigma_scale, eta, q),
            sigma_scale / radical,
        )
    };
    let boundary = sigma_scale == 0.0 && d > 0.0;
    BoundResult::assemble(query.nu_norm, exponent, theta, c, boundary)
}

/// Discrete-time two-sided tail bound.
pub fn tail_bound_discrete(query: &BoundQuery) -> Result<BoundResult> {
    if query.mode() != Mode::Discrete {
        return Err(Error::InvalidQuery("query horizon is not a step count".into()));
    }
    Ok(tail_bound_with(query, (2.0 + 6.0 * query.eta_p) * query.sigma()))
}

/// Continuous-time two-sided tail bound.
pub fn tail_bound_continuous(query: &BoundQuery) -> Result<BoundResult> {
    if query.mode() != Mode::Continuous {
        return Err(Error::InvalidQuery("query horizon is not a time".into()));
    }
    Ok(tail_bound_with(query, 2.0 * query.sigma()))
}

/// Dispatches on the query's mode.
pub fn tail_bound(query: &BoundQuery) -> BoundResult {
    match query.mode() {
        Mode::Discrete => tail_bound_with(query, (2.0 + 6.0 * query.eta_p) * query.sigma()),
        Mode::Continuous => tail_bound_with(query, 2.0 * query.sigma()),
    }
}

/// Log of the one-step Chernoff assembly behind the tail bound,
/// `log(2 ||nu/mu|| e^{-theta h delta} mgf_bound(q theta)^{1/q})`, for any
/// admissible `theta`.
pub fn assembled_log_bound(query: &BoundQuery, theta: f64) -> Result<f64> {
    let (q, m, s, eta) = (query.q, query.m, query.sigma(), query.eta_p);
    let log_mgf = match query.horizon {
        Horizon::Steps(n) => log_mgf_bound_discrete(q * theta, n, m, s, eta)?,
        Horizon::Time(t) => log_mgf_bound_continuous(q * theta, t, m, s, eta)?,
    };
    Ok((2.0 * query.nu_norm).ln() - theta * query.horizon.value() * query.delta + log_mgf / q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    T,
    Delta,
    EtaP,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::T => "t",
            SweepAxis::Delta => "delta",
            SweepAxis::EtaP => "eta_p",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepAxis::N),
            "t" => Ok(SweepAxis::T),
            "delta" => Ok(SweepAxis::Delta),
            "eta_p" | "eta-p" => Ok(SweepAxis::EtaP),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep axis {other:?} (expected n, t, delta, eta_p)"
            ))),
        }
    }
}

/// One evaluated point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub exponent: f64,
    pub bound: f64,
    pub theta: f64,
    pub c_theta: f64,
    pub vacuous: bool,
}

impl SweepRow {
    pub fn new(axis: SweepAxis, value: f64, result: &BoundResult) -> Self {
        Self {
            axis,
            value,
            exponent: result.exponent,
            bound: result.probability_bound,
            theta: result.theta_used,
            c_theta: result.c_theta,
            vacuous: result.vacuous,
        }
    }
}

fn sweep_point(template: &BoundQuery, axis: SweepAxis, value: f64) -> Result<BoundQuery> {
    match axis {
        SweepAxis::N => {
            if template.mode() != Mode::Discrete {
                return Err(Error::InvalidQuery("axis n needs a discrete query".into()));
            }
            if !(value >= 1.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                return Err(Error::InvalidQuery(format!("n must be a positive integer, got {value}")));
            }
            template.with_horizon(Horizon::Steps(value as u64))
        }
        SweepAxis::T => {
            if template.mode() != Mode::Continuous {
                return Err(Error::InvalidQuery("axis t needs a continuous query".into()));
            }
            template.with_horizon(Horizon::Time(value))
        }
        SweepAxis::Delta => template.with_delta(value),
        SweepAxis::EtaP => template.with_eta_p(value),
    }
}

/// Evaluates the tail bound along one axis; each value succeeds or fails on its own.
pub fn bound_sweep(template: &BoundQuery, axis: SweepAxis, values: &[f64]) -> Vec<Result<BoundResult>> {
    values
        .iter()
        .map(|&v| sweep_point(template, axis, v).map(|q| tail_bound(&q)))
        .collect()
}
