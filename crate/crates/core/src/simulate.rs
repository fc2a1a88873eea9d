//! Monte Carlo estimation of tail probabilities and MGFs.
//!
//! Replica `r` draws from its own ChaCha8 stream `(seed, r)`, so results are
//! bit-identical for a fixed seed regardless of thread count, and adding
//! replicas never changes earlier ones.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::bounds::{BoundResult, Horizon};
use crate::chain::{is_irreducible, Distribution, GeneratorMatrix, MarkovKernel, Observable, TransitionMatrix};
use crate::error::{Error, Result};
use crate::numeric::{deviation_reached, pairwise_sum};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Independent, reproducible stream for one replica.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Inverse-CDF sampling from a discrete law.
#[derive(Debug, Clone)]
struct Categorical {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Categorical {
    fn new(weights: impl Iterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let mut last_positive = 0;
        let cumulative = weights
            .enumerate()
            .map(|(i, w)| {
                if w > 0.0 {
                    last_positive = i;
                }
                acc += w;
                acc
            })
            .collect();
        Self {
            cumulative,
            last_positive,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.cumulative[self.cumulative.len() - 1];
        let u = rng.random::<f64>() * total;
        // first index whose cumulative mass exceeds u; zero-weight states are skipped
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.last_positive)
    }
}

#[derive(Debug, Clone)]
struct DtmcSampler {
    init: Categorical,
    rows: Vec<Categorical>,
}

impl DtmcSampler {
    fn new(p: &TransitionMatrix, init: &Distribution) -> Self {
        let rows = (0..p.size())
            .map(|i| Categorical::new(p.entries().row(i).iter().copied()))
            .collect();
        Self {
            init: Categorical::new(init.weights().iter().copied()),
            rows,
        }
    }

    fn for_each_state<R: Rng + ?Sized>(&self, n: u64, rng: &mut R, mut visit: impl FnMut(usize)) {
        let mut z = self.init.sample(rng);
        visit(z);
        for _ in 1..n {
            z = self.rows[z].sample(rng);
            visit(z);
        }
    }
}

#[derive(Debug, Clone)]
struct CtmcSampler {
    init: Categorical,
    exit_rates: Vec<f64>,
    jumps: Vec<Option<Categorical>>,
}

impl CtmcSampler {
    fn new(q: &GeneratorMatrix, init: &Distribution) -> Self {
        let n = q.size();
        let exit_rates: Vec<f64> = (0..n).map(|i| q.exit_rate(i)).collect();
        let jumps = (0..n)
            .map(|i| {
                (exit_rates[i] > 0.0).then(|| {
                    Categorical::new((0..n).map(|j| if i == j { 0.0 } else { q.entries()[(i, j)] }))
                })
            })
            .collect();
        Self {
            init: Categorical::new(init.weights().iter().copied()),
            exit_rates,
            jumps,
        }
    }

    /// Calls `visit(state, duration)` for each segment up to time `t`.
    fn for_each_segment<R: Rng + ?Sized>(&self, t: f64, rng: &mut R, mut visit: impl FnMut(usize, f64)) {
        let mut z = self.init.sample(rng);
        let mut elapsed = 0.0;
        loop {
            let rate = self.exit_rates[z];
            let hold = if rate > 0.0 {
                // 1 - U lies in (0, 1], so the log is finite
                -(1.0 - rng.random::<f64>()).ln() / rate
            } else {
                f64::INFINITY
            };
            if elapsed + hold >= t {
                visit(z, t - elapsed);
                return;
            }
            visit(z, hold);
            elapsed += hold;
            z = self.jumps[z].as_ref().expect("positive exit rate").sample(rng);
        }
    }
}

/// Path `Z_1, ..., Z_n` with `Z_1 ~ init`.
pub fn sample_dtmc<R: Rng + ?Sized>(p: &TransitionMatrix, init: &Distribution, n: u64, rng: &mut R) -> Vec<usize> {
    let mut path = Vec::with_capacity(n as usize);
    DtmcSampler::new(p, init).for_each_state(n, rng, |z| path.push(z));
    path
}

/// Jump path on `[0, t]` as `(state, holding_time)` segments; the last segment
/// is truncated so the durations sum to `t`.
pub fn sample_ctmc<R: Rng + ?Sized>(q: &GeneratorMatrix, init: &Distribution, t: f64, rng: &mut R) -> Vec<(usize, f64)> {
    let mut path = Vec::new();
    CtmcSampler::new(q, init).for_each_segment(t, rng, |z, d| path.push((z, d)));
    path
}

/// Chain or jump process to simulate.
#[derive(Debug, Clone, Copy)]
pub enum Dynamics<'a> {
    Discrete(&'a TransitionMatrix),
    Continuous(&'a GeneratorMatrix),
}

impl Dynamics<'_> {
    pub fn size(&self) -> usize {
        match self {
            Dynamics::Discrete(p) => p.size(),
            Dynamics::Continuous(q) => q.size(),
        }
    }

    pub fn is_irreducible(&self) -> bool {
        match self {
            Dynamics::Discrete(p) => is_irreducible(*p),
            Dynamics::Continuous(q) => is_irreducible(*q),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub replicas: u64,
    pub horizon: Horizon,
    pub seed: u64,
    pub init: Distribution,
    pub delta: f64,
    pub theta: f64,
    pub alpha: f64,
}

impl SimConfig {
    pub fn new(replicas: u64, horizon: Horizon, seed: u64, init: Distribution) -> Self {
        Self {
            replicas,
            horizon,
            seed,
            init,
            delta: 0.0,
            theta: 0.0,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn validate(&self, dynamics: &Dynamics<'_>, f: &Observable) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::InvalidArgument("replicas must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) || !self.theta.is_finite() {
            return Err(Error::InvalidArgument("delta must be >= 0 and theta finite".into()));
        }
        match (dynamics, self.horizon) {
            (Dynamics::Discrete(_), Horizon::Steps(n)) if n >= 1 => {}
            (Dynamics::Continuous(_), Horizon::Time(t)) if t > 0.0 && t.is_finite() => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "horizon must be a positive step count for chains and a positive time for generators".into(),
                ))
            }
        }
        for len in [self.init.size(), f.len()] {
            if len != dynamics.size() {
                return Err(Error::DimensionMismatch {
                    expected: dynamics.size(),
                    found: len,
                });
            }
        }
        Ok(())
    }
}

/// Monte Carlo estimate with its confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicas_used: u64,
    pub seed: u64,
    pub bound_compared: Option<BoundResult>,
    /// `bound >= ci_low` when a bound was compared.
    pub consistent: Option<bool>,
    /// MGF only: the top 1% of samples carry more than half of the mean.
    pub heavy_tail: bool,
}

impl SimReport {
    pub fn compare_with(mut self, bound: BoundResult) -> Self {
        self.consistent = Some(bound.probability_bound >= self.ci_low);
        self.bound_compared = Some(bound);
        self
    }
}

/// Per-replica path integrals: `sum_k f(Z_k)` for chains, `int_0^t f(Z_s) ds` for generators.
pub fn path_sums(config: &SimConfig, dynamics: Dynamics<'_>, f: &Observable) -> Result<Vec<f64>> {
    config.validate(&dynamics, f)?;
    let values = f.values();
    let seed = config.seed;
    let sums = match (dynamics, config.horizon) {
        (Dynamics::Discrete(p), Horizon::Steps(n)) => {
            let sampler = DtmcSampler::new(p, &config.init);
            (0..config.replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replica_rng(seed, r);
                    let mut s = 0.0;
                    sampler.for_each_state(n, &mut rng, |z| s += values[z]);
                    s
                })
                .collect()
        }
        (Dynamics::Continuous(q), Horizon::Time(t)) => {
            let sampler = CtmcSampler::new(q, &config.init);
            (0..config.replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replica_rng(seed, r);
                    let mut s = 0.0;
                    sampler.for_each_segment(t, &mut rng, |z, d| s += values[z] * d);
                    s
                })
                .collect()
        }
        _ => unreachable!("validated above"),
    };
    Ok(sums)
}

/// Tail report for one `delta` from precomputed path sums.
pub fn tail_from_sums(sums: &[f64], horizon: Horizon, delta: f64, alpha: f64, seed: u64) -> Result<SimReport> {
    let h = horizon.value();
    let hits = sums.iter().filter(|&&s| deviation_reached(s / h, delta)).count() as u64;
    let trials = sums.len() as u64;
    let (ci_low, ci_high) = clopper_pearson(hits, trials, alpha)?;
    Ok(SimReport {
        estimate: hits as f64 / trials as f64,
        ci_low,
        ci_high,
        replicas_used: trials,
        seed,
        bound_compared: None,
        consistent: None,
        heavy_tail: false,
    })
}

/// Fraction of replicas with `|time average of f| >= delta`, with a
/// Clopper-Pearson interval.
pub fn empirical_tail(config: &SimConfig, dynamics: Dynamics<'_>, f: &Observable) -> Result<SimReport> {
    if !f.is_centered() {
        return Err(Error::NotCentered { mean: f.mean_mu() });
    }
    let sums = path_sums(config, dynamics, f)?;
    tail_from_sums(&sums, config.horizon, config.delta, config.alpha, config.seed)
}

/// [`empirical_tail`] compared against a bound; requires an irreducible input.
pub fn empirical_tail_against(
    config: &SimConfig,
    dynamics: Dynamics<'_>,
    f: &Observable,
    bound: BoundResult,
) -> Result<SimReport> {
    if !dynamics.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    Ok(empirical_tail(config, dynamics, f)?.compare_with(bound))
}

/// Sample mean of `exp(theta * path sum)` with a normal-approximation interval.
pub fn empirical_mgf(config: &SimConfig, dynamics: Dynamics<'_>, f: &Observable) -> Result<SimReport> {
    let sums = path_sums(config, dynamics, f)?;
    let theta = config.theta;
    let samples: Vec<f64> = sums.iter().map(|s| (theta * s).exp()).collect();
    let n = samples.len() as f64;
    let mean = pairwise_sum(&samples) / n;
    let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if samples.len() > 1 { pairwise_sum(&sq) / (n - 1.0) } else { 0.0 };
    let z = Normal::standard().inverse_cdf(1.0 - config.alpha / 2.0);
    let half = z * (var / n).sqrt();

    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = samples.len().div_ceil(100);
    let total = pairwise_sum(&samples);
    let heavy_tail = total > 0.0 && pairwise_sum(&sorted[..top]) > 0.5 * total;

    Ok(SimReport {
        estimate: mean,
        ci_low: mean - half,
        ci_high: mean + half,
        replicas_used: samples.len() as u64,
        seed: config.seed,
        bound_compared: None,
        consistent: None,
        heavy_tail,
    })
}

/// Exact two-sided binomial interval at level `1 - alpha`.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::InvalidCounts { successes, trials });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0,1), got {alpha}")));
    }
    let (x, n) = (successes as f64, trials as f64);
    let tail = alpha / 2.0;
    let beta_quantile = |a: f64, b: f64, p: f64| -> Result<f64> {
        let d = Beta::new(a, b).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(d.inverse_cdf(p))
    };
    let low = if successes == 0 {
        0.0
    } else if successes == trials {
        tail.powf(1.0 / n)
    } else {
        beta_quantile(x, n - x + 1.0, tail)?
    };
    let high = if successes == trials {
        1.0
    } else if successes == 0 {
        1.0 - tail.powf(1.0 / n)
    } else {
        beta_quantile(x + 1.0, n - x, 1.0 - tail)?
    };
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{make_observable, stationary_distribution, StateSpace};
    use crate::examples::flip_rows;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_chain_stays_put() {
        let p = TransitionMatrix::identity(3).unwrap();
        let init = Distribution::uniform(p.space().clone());
        let mut rng = replica_rng(7, 0);
        let path = sample_dtmc(&p, &init, 5, &mut rng);
        assert_eq!(path.len(), 5);
        assert!(path.iter().all(|&z| z == path[0]));
    }

    #[test]
    fn flip_chain_alternates() {
        let p = TransitionMatrix::from_rows(&flip_rows()).unwrap();
        let init = Distribution::point_mass(p.space().clone(), 0).unwrap();
        let path = sample_dtmc(&p, &init, 6, &mut replica_rng(1, 3));
        assert_eq!(path, vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn one_step_frequencies_match_rows() {
        let p = TransitionMatrix::from_rows(&[
            vec![0.2, 0.5, 0.3],
            vec![0.6, 0.1, 0.3],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap();
        let init = Distribution::uniform(p.space().clone());
        let path = sample_dtmc(&p, &init, 100_001, &mut replica_rng(42, 0));
        let mut counts = [[0u64; 3]; 3];
        for w in path.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        for i in 0..3 {
            let row: u64 = counts[i].iter().sum();
            for j in 0..3 {
                let pij = p.get(i, j);
                let sd = (pij * (1.0 - pij) / row as f64).sqrt();
                let freq = counts[i][j] as f64 / row as f64;
                assert!((freq - pij).abs() <= 3.0 * sd + 1e-12, "({i},{j}) {freq} vs {pij}");
            }
        }
    }

    #[test]
    fn zero_generator_single_segment() {
        let q = GeneratorMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let init = Distribution::point_mass(q.space().clone(), 1).unwrap();
        let path = sample_ctmc(&q, &init, 2.5, &mut replica_rng(0, 0));
        assert_eq!(path, vec![(1, 2.5)]);
    }

    #[test]
    fn ctmc_occupation_and_holding_times() {
        let q = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap();
        let init = Distribution::point_mass(q.space().clone(), 0).unwrap();
        let t = 1e4;
        let path = sample_ctmc(&q, &init, t, &mut replica_rng(9, 0));
        let total: f64 = path.iter().map(|s| s.1).sum();
        assert!((total - t).abs() < 1e-6);
        let in_zero: f64 = path.iter().filter(|s| s.0 == 0).map(|s| s.1).sum();
        // Occupation fraction of a two-state chain has asymptotic variance
        // 2 a b / (a + b)^3 / t with a = 1, b = 2.
        let sd = (2.0 * 1.0 * 2.0 / 27.0 / t).sqrt();
        assert!((in_zero / t - 2.0 / 3.0).abs() < 3.0 * sd, "{}", in_zero / t);

        // complete holding times in state 0 are Exp(1)
        let holds: Vec<f64> = path[..path.len() - 1].iter().filter(|s| s.0 == 0).map(|s| s.1).collect();
        let mean = holds.iter().sum::<f64>() / holds.len() as f64;
        assert!(holds.len() > 3000);
        assert!((mean - 1.0).abs() < 3.0 / (holds.len() as f64).sqrt(), "{mean}");
    }

    #[test]
    fn clopper_pearson_examples() {
        let (lo, hi) = clopper_pearson(0, 100, 0.05).unwrap();
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 0.03621669264517646, epsilon = 1e-15);
        let (lo, hi) = clopper_pearson(100, 100, 0.05).unwrap();
        assert_eq!(hi, 1.0);
        assert_abs_diff_eq!(lo, 0.025f64.powf(0.01), epsilon = 1e-15);
        let (lo, hi) = clopper_pearson(5, 100, 0.05).unwrap();
        // scipy.stats.beta.ppf reference values
        assert_abs_diff_eq!(lo, 0.016431879182052155, epsilon = 1e-8);
        assert_abs_diff_eq!(hi, 0.11283491110546275, epsilon = 1e-8);
        assert!(clopper_pearson(3, 2, 0.05).is_err());
        assert!(clopper_pearson(0, 0, 0.05).is_err());
    }

    fn four_state_setup() -> (TransitionMatrix, Distribution, Observable) {
        let p = TransitionMatrix::from_rows(&crate::examples::four_state_rows()).unwrap();
        let mu = stationary_distribution(&p).unwrap();
        let f = make_observable(&[1.0, 0.0, 0.0, -1.0], &mu, true).unwrap();
        (p, mu, f)
    }

    #[test]
    fn tail_trivial_deltas() {
        let (p, mu, f) = four_state_setup();
        let cfg = SimConfig::new(200, Horizon::Steps(10), 5, mu.clone());
        let r = empirical_tail(&cfg, Dynamics::Discrete(&p), &f).unwrap();
        assert_eq!((r.estimate, r.ci_high), (1.0, 1.0));
        let r = empirical_tail(&cfg.clone().with_delta(1.5), Dynamics::Discrete(&p), &f).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_abs_diff_eq!(r.ci_high, 1.0 - 0.025f64.powf(1.0 / 200.0), epsilon = 1e-15);
    }

    #[test]
    fn mgf_trivial_cases() {
        let (p, mu, f) = four_state_setup();
        let cfg = SimConfig::new(500, Horizon::Steps(10), 5, mu);
        let r = empirical_mgf(&cfg, Dynamics::Discrete(&p), &f).unwrap();
        assert_eq!((r.estimate, r.ci_low, r.ci_high), (1.0, 1.0, 1.0));

        let flip = TransitionMatrix::from_rows(&flip_rows()).unwrap();
        let u = Distribution::uniform(StateSpace::indexed(2).unwrap());
        let g = make_observable(&[1.0, -1.0], &u, false).unwrap();
        let cfg = SimConfig::new(300, Horizon::Steps(2), 1, u).with_theta(0.9);
        let r = empirical_mgf(&cfg, Dynamics::Discrete(&flip), &g).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.ci_high - r.ci_low, 0.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let (p, mu, f) = four_state_setup();
        let cfg = SimConfig::new(2000, Horizon::Steps(30), 11, mu).with_delta(0.2);
        let a = empirical_tail(&cfg, Dynamics::Discrete(&p), &f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| empirical_tail(&cfg, Dynamics::Discrete(&p), &f).unwrap());
        assert_eq!(a, b);
        // growing the replica count keeps the first replicas
        let short = path_sums(&cfg, Dynamics::Discrete(&p), &f).unwrap();
        let mut longer = cfg.clone();
        longer.replicas = 3000;
        let long = path_sums(&longer, Dynamics::Discrete(&p), &f).unwrap();
        assert_eq!(&long[..2000], &short[..]);
    }

    #[test]
    fn bound_comparison_requires_irreducible() {
        let q = GeneratorMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, -1.0]]).unwrap();
        let u = Distribution::uniform(q.space().clone());
        let f = make_observable(&[1.0, -1.0], &u, false).unwrap();
        let cfg = SimConfig::new(10, Horizon::Time(1.0), 0, u);
        let bound = BoundResult {
            probability_bound: 1.0,
            exponent: 0.0,
            theta_used: 0.0,
            c_theta: 1.0,
            vacuous: true,
            boundary_limit: false,
        };
        assert_eq!(
            empirical_tail_against(&cfg, Dynamics::Continuous(&q), &f, bound).unwrap_err(),
            Error::NotIrreducible
        );
        assert!(empirical_tail(&cfg, Dynamics::Continuous(&q), &f).is_ok());
    }

    #[test]
    fn mismatched_horizon_is_rejected() {
        let (p, mu, f) = four_state_setup();
        let cfg = SimConfig::new(10, Horizon::Time(1.0), 0, mu);
        assert!(empirical_tail(&cfg, Dynamics::Discrete(&p), &f).is_err());
    }
}
