//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails or exceeds its time budget.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ipgap_core::bounds::{
    log_mgf_bound_continuous, log_mgf_bound_discrete, tail_bound, theta_limit, BoundQuery, Horizon,
};
use ipgap_core::chain::{
    radon_nikodym_norm, stationary_distribution, Distribution, GeneratorMatrix, StateSpace, TransitionMatrix,
};
use ipgap_core::examples::four_state_rows;
use ipgap_core::generate::{random_centered, random_distribution, random_generator, random_stochastic};
use ipgap_core::make_observable;
use ipgap_core::oracle::{
    exact_mgf_continuous, exact_tail_discrete, log_exact_mgf_discrete, verify_a_prime_identity,
    verify_laplacian_identity,
};
use ipgap_core::simulate::{empirical_tail_against, replica_rng, Dynamics, SimConfig};
use ipgap_core::spectral::{
    absolute_gap, absolute_lambda, ip_gap, ip_gap_generator, ip_gap_with_minimizer, numerical_radius_complex,
    numerical_radius_real, poincare_sides, symmetric_gap, DEFAULT_RADIUS_GRID,
};
use nalgebra::DMatrix;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn chain(seed: u64, n: usize, density: f64) -> Result<(TransitionMatrix, Distribution), String> {
    let p = random_stochastic(n, density, &mut replica_rng(seed, 0)).map_err(e)?;
    let mu = stationary_distribution(&p).map_err(e)?;
    Ok((p, mu))
}

fn theta_grid(limit: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| limit * 0.98 * (2.0 * k as f64 / (points - 1) as f64 - 1.0))
        .collect()
}

fn four_state() -> Result<(TransitionMatrix, Distribution), String> {
    let p = TransitionMatrix::from_rows(&four_state_rows()).map_err(e)?;
    let mu = stationary_distribution(&p).map_err(e)?;
    Ok((p, mu))
}

fn golden_four_state() -> Outcome {
    let (p, mu) = four_state()?;
    for &w in mu.weights() {
        ensure((w - 0.25).abs() <= 1e-12, || format!("mu = {:?}", mu.weights()))?;
    }
    let eta_a = absolute_gap(&p, &mu).map_err(e)?;
    let eta_s = symmetric_gap(&p, &mu).map_err(e)?;
    let eta_p = ip_gap(&p, &mu).map_err(e)?;
    ensure(eta_a.abs() <= 1e-10, || format!("eta_a = {eta_a}"))?;
    ensure(eta_s > 0.4 && eta_p > 0.4, || format!("eta_s = {eta_s}, eta_p = {eta_p}"))?;
    ensure(eta_p >= eta_s && eta_s >= eta_a, || format!("ordering: {eta_p} {eta_s} {eta_a}"))?;
    Ok(format!("eta_p = {eta_p:.6}, eta_s = {eta_s:.6}, eta_a = {eta_a:.1e}"))
}

fn gap_ordering_fuzz() -> Outcome {
    let mut worst = f64::INFINITY;
    for i in 0..1000u64 {
        let size = 2 + (i % 19) as usize;
        let density = 0.2 + 0.6 * ((i * 7919) % 100) as f64 / 100.0;
        let (p, mu) = chain(1_000 + i, size, density)?;
        let eta_p = ip_gap(&p, &mu).map_err(e)?;
        let eta_s = symmetric_gap(&p, &mu).map_err(e)?;
        let eta_a = absolute_gap(&p, &mu).map_err(e)?;
        let lambda_a = absolute_lambda(&p, &mu).map_err(e)?;
        ensure(eta_p >= eta_s - 1e-9 && eta_s - 1e-9 >= eta_a - 2e-9, || {
            format!("chain {i} (size {size}): eta_p {eta_p}, eta_s {eta_s}, eta_a {eta_a}")
        })?;
        ensure(eta_p > 0.0 && eta_p <= 2.0 + 1e-12, || format!("chain {i}: eta_p {eta_p}"))?;
        ensure(lambda_a <= 1.0 + 1e-12, || format!("chain {i}: lambda_a {lambda_a}"))?;
        worst = worst.min(eta_p - eta_s);
    }
    Ok(format!("1000 chains, min(eta_p - eta_s) = {worst:.3e}"))
}

fn iterated_poincare() -> Outcome {
    let mut worst_ratio = 0.0_f64;
    let mut worst_equality = 0.0_f64;
    for i in 0..100u64 {
        let size = 2 + (i % 11) as usize;
        let (p, mu) = chain(2_000 + i, size, 0.4)?;
        let (eta_p, minimizer) = ip_gap_with_minimizer(&p, &mu).map_err(e)?;
        let mut rng = replica_rng(2_000 + i, 1);
        for _ in 0..100 {
            let h: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c = poincare_sides(&p, &mu, &h, eta_p).map_err(e)?;
            ensure(c.lhs <= c.rhs * (1.0 + 1e-9), || format!("chain {i}: {} > {}", c.lhs, c.rhs))?;
            worst_ratio = worst_ratio.max(c.lhs / c.rhs);
        }
        let c = poincare_sides(&p, &mu, &minimizer, eta_p).map_err(e)?;
        let rel = (c.lhs - c.rhs).abs() / c.rhs;
        ensure(rel <= 1e-8, || format!("chain {i}: equality off by {rel}"))?;
        worst_equality = worst_equality.max(rel);
    }
    Ok(format!("max Var/rhs = {worst_ratio:.6}, equality error {worst_equality:.1e}"))
}

fn mgf_dominance() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let size = 2 + (i % 5) as usize;
        let (p, mu) = chain(3_000 + i, size, 0.5)?;
        let f = random_centered(&mu, 1.0, &mut replica_rng(3_000 + i, 1)).map_err(e)?;
        let eta = ip_gap(&p, &mu).map_err(e)?;
        let (m, s) = (f.sup_norm(), f.sigma());
        for theta in theta_grid(theta_limit(m, eta), 11) {
            for n in [1u64, 5, 20, 50] {
                let exact = log_exact_mgf_discrete(&p, &mu, f.values(), theta, n).map_err(e)?;
                let bound = log_mgf_bound_discrete(theta, n, m, s, eta).map_err(e)?;
                ensure(exact <= bound + (1.0 + 1e-9_f64).ln(), || {
                    format!("chain {i}, theta {theta}, n {n}: log mgf {exact} > {bound}")
                })?;
                if theta != 0.0 {
                    worst = worst.max(exact - bound);
                }
            }
        }
    }
    Ok(format!("max log(exact/bound) over theta != 0: {worst:.4}"))
}

fn exact_tail_dominance() -> Outcome {
    let mut cases = 0;
    let mut worst = 0.0_f64;
    let mut check = |p: &TransitionMatrix, mu: &Distribution, f: &[f64], label: &str| -> Result<(), String> {
        let obs = make_observable(f, mu, true).map_err(e)?;
        let eta = ip_gap(p, mu).map_err(e)?;
        let m = obs.sup_norm();
        for n in 1..=12u64 {
            for k in 1..=10 {
                let delta = m * k as f64 / 10.0;
                let exact = exact_tail_discrete(p, mu, obs.values(), n, delta).map_err(e)?;
                let q = BoundQuery::stationary(Horizon::Steps(n), delta, m, obs.sigma2(), eta).map_err(e)?;
                let bound = tail_bound(&q).probability_bound;
                ensure(exact <= bound, || format!("{label}, n {n}, delta {delta}: {exact} > {bound}"))?;
                if exact > 0.0 {
                    worst = worst.max(exact / bound);
                }
                cases += 1;
            }
        }
        Ok(())
    };
    let (p, mu) = four_state()?;
    check(&p, &mu, &[1.0, 0.0, 0.0, -1.0], "four-state")?;
    for i in 0..30u64 {
        let size = 2 + (i % 3) as usize;
        let (p, mu) = chain(5_000 + i, size, 0.5)?;
        let f: Vec<f64> = {
            let mut rng = replica_rng(5_000 + i, 1);
            (0..size).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        check(&p, &mu, &f, &format!("chain {i}"))?;
    }
    Ok(format!("{cases} (chain, n, delta) points, max exact/bound = {worst:.4}"))
}

fn monte_carlo_dominance() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(e)?;
    let path = dir.path().join("four_state.json");
    let file = serde_json::json!({
        "labels": ["1", "2", "3", "4"],
        "P": four_state_rows(),
        "f": [1, 0, 0, -1]
    });
    std::fs::write(&path, file.to_string()).map_err(e)?;
    let out = Command::new(env!("CARGO_BIN_EXE_ipgap"))
        .args(["verify", path.to_str().unwrap(), "--n", "200", "--delta-grid", "0.1,0.2,0.3", "--replicas", "10000"])
        .output()
        .map_err(e)?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    ensure(out.status.code() == Some(0), || {
        format!("exit {:?}: {}{}", out.status.code(), stdout, String::from_utf8_lossy(&out.stderr))
    })?;
    let mut reader = csv::Reader::from_reader(stdout.as_bytes());
    let mut rows = 0;
    let mut summary = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(e)?;
        let parse = |k: usize| rec[k].parse::<f64>().map_err(e);
        let (delta, estimate, lo, bound) = (parse(0)?, parse(1)?, parse(2)?, parse(4)?);
        ensure(lo <= bound, || format!("delta {delta}: ci_low {lo} > bound {bound}"))?;
        summary.push(format!("delta {delta}: est {estimate:.4} <= bound {bound:.4}"));
        rows += 1;
    }
    ensure(rows == 3, || format!("expected 3 rows, got {rows}"))?;
    Ok(summary.join("; "))
}

fn continuous_dominance() -> Outcome {
    let two = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]]).map_err(e)?;
    let mut generators = vec![two];
    for i in 0..10u64 {
        generators.push(random_generator(4, 0.6, 3.0, &mut replica_rng(7_000 + i, 0)).map_err(e)?);
    }
    let mut worst = f64::NEG_INFINITY;
    let mut mc = Vec::new();
    for (i, q) in generators.iter().enumerate() {
        let mu = stationary_distribution(q).map_err(e)?;
        let f = random_centered(&mu, 1.0, &mut replica_rng(7_000 + i as u64, 1)).map_err(e)?;
        let eta = ip_gap_generator(q, &mu).map_err(e)?;
        let (m, s) = (f.sup_norm(), f.sigma());
        for theta in theta_grid(theta_limit(m, eta), 9) {
            for t in [0.1, 1.0, 5.0, 20.0, 100.0] {
                let exact = exact_mgf_continuous(q, &mu, f.values(), theta, t).map_err(e)?;
                let log_bound = log_mgf_bound_continuous(theta, t, m, s, eta).map_err(e)?;
                ensure(exact.ln() <= log_bound + 1e-9, || {
                    format!("generator {i}, theta {theta}, t {t}: {exact} > exp({log_bound})")
                })?;
                if theta != 0.0 {
                    worst = worst.max(exact.ln() - log_bound);
                }
            }
        }
        if i < 2 {
            let t = 100.0;
            for delta in [0.02, 0.05, 0.1] {
                let delta = delta * m;
                let query = BoundQuery::stationary(Horizon::Time(t), delta, m, f.sigma2(), eta).map_err(e)?;
                let cfg = SimConfig::new(10_000, Horizon::Time(t), 11 + i as u64, mu.clone()).with_delta(delta);
                let r = empirical_tail_against(&cfg, Dynamics::Continuous(q), &f, tail_bound(&query)).map_err(e)?;
                ensure(r.consistent == Some(true), || format!("generator {i}, delta {delta}: {r:?}"))?;
                mc.push(format!("{:.4}<={:.4}", r.estimate, tail_bound(&query).probability_bound));
            }
        }
    }
    Ok(format!("max log(exact/bound) over theta != 0: {worst:.4}; Monte Carlo t=100: {}", mc.join(" ")))
}

fn identities() -> Outcome {
    let (mut worst_l, mut worst_a) = (0.0_f64, 0.0_f64);
    for i in 0..40u64 {
        let (p, mu) = chain(8_000 + i, 3, 0.6)?;
        let f = random_centered(&mu, 1.0, &mut replica_rng(8_000 + i, 1)).map_err(e)?;
        let mut rng = replica_rng(8_000 + i, 2);
        for n in 1..=4u64 {
            let theta = rng.random_range(-1.0..1.0);
            for z in 0..3 {
                let c = verify_laplacian_identity(&p, f.values(), theta, n, z).map_err(e)?;
                ensure(c.gap <= 1e-10, || format!("chain {i}, n {n}, z {z}: {c:?}"))?;
                worst_l = worst_l.max(c.gap);
            }
        }
        let q = random_generator(3, 0.6, 2.0, &mut replica_rng(8_500 + i, 0)).map_err(e)?;
        let nu = stationary_distribution(&q).map_err(e)?;
        let g = random_centered(&nu, 1.0, &mut replica_rng(8_500 + i, 1)).map_err(e)?;
        let theta = rng.random_range(-1.0..1.0);
        let t = rng.random_range(0.1..5.0);
        let c = verify_a_prime_identity(&q, g.values(), theta, t).map_err(e)?;
        ensure(c.gap <= 1e-6, || format!("generator {i}: {c:?}"))?;
        worst_a = worst_a.max(c.gap);
    }
    Ok(format!("max Laplacian gap {worst_l:.1e}, max a' gap {worst_a:.1e}"))
}

fn numerical_radius() -> Outcome {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let w = numerical_radius_real(&a);
    let w2 = numerical_radius_real(&(&a * &a));
    ensure(w.abs() <= 1e-12, || format!("w_R(A) = {w}"))?;
    ensure((w2 - 1.0).abs() <= 1e-12, || format!("w_R(A^2) = {w2}"))?;
    let mut rng = replica_rng(9_000, 0);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..200 {
        let n = 2 + i % 7;
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let w = numerical_radius_complex(&b, DEFAULT_RADIUS_GRID).map_err(e)?;
        let b = b / w;
        let w1 = numerical_radius_complex(&b, DEFAULT_RADIUS_GRID).map_err(e)?;
        let w2 = numerical_radius_complex(&(&b * &b), DEFAULT_RADIUS_GRID).map_err(e)?;
        ensure(w2 <= w1 * w1 + 2e-3, || format!("matrix {i}: w(A^2) = {w2}, w(A) = {w1}"))?;
        worst = worst.max(w2 - w1 * w1);
    }
    Ok(format!("w_R(A) = {w:.1e}, w_R(A^2) = {w2}; complex max w(A^2) - w(A)^2 = {worst:.4}"))
}

fn initial_distributions() -> Outcome {
    for i in 0..20u64 {
        let (_, mu) = chain(10_000 + i, 2 + (i % 6) as usize, 0.5)?;
        for p in [1.01, 1.5, 2.0, 4.0, f64::INFINITY] {
            let r = radon_nikodym_norm(&mu, &mu, p).map_err(e)?;
            ensure((r - 1.0).abs() <= 1e-12, || format!("chain {i}, p {p}: {r}"))?;
        }
        let nu = random_distribution(mu.size(), &mut replica_rng(10_000 + i, 1)).map_err(e)?;
        radon_nikodym_norm(&nu, &mu, 2.0).map_err(e)?;
    }
    let (p, mu) = four_state()?;
    let point = Distribution::point_mass(StateSpace::indexed(4).map_err(e)?, 0).map_err(e)?;
    let norm = radon_nikodym_norm(&point, &mu, f64::INFINITY).map_err(e)?;
    ensure((norm - 4.0).abs() <= 1e-12, || format!("point mass norm {norm}"))?;
    let f = make_observable(&[1.0, 0.0, 0.0, -1.0], &mu, true).map_err(e)?;
    let eta = ip_gap(&p, &mu).map_err(e)?;
    let horizon = Horizon::Steps(200);
    let base = BoundQuery::new(horizon, 0.2, f.sup_norm(), f.sigma2(), eta, f64::INFINITY, 1.0).map_err(e)?;
    let inflated = base.with_nu_norm(norm).map_err(e)?;
    let (b1, b4) = (tail_bound(&base).probability_bound, tail_bound(&inflated).probability_bound);
    ensure(b4 == 4.0 * b1, || format!("bound {b4} is not 4 x {b1}"))?;
    let err = BoundQuery::new(horizon, 0.2, f.sup_norm(), f.sigma2(), eta, 1.0, 1.0)
        .err()
        .ok_or_else(|| "p = 1 accepted".to_string())?
        .to_string();
    ensure(err.contains("p = 1 gives q = inf"), || format!("unexpected message: {err}"))?;
    Ok(format!("point mass norm {norm}, bound {b1:.4e} -> {b4:.4e}; p = 1: \"{err}\""))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("golden four-state example", 1, golden_four_state),
        ("gap ordering fuzz", 30, gap_ordering_fuzz),
        ("iterated Poincare inequality", 30, iterated_poincare),
        ("discrete MGF dominance", 60, mgf_dominance),
        ("discrete tail dominance (exact)", 120, exact_tail_dominance),
        ("discrete tail dominance (Monte Carlo)", 60, monte_carlo_dominance),
        ("continuous-time dominance", 120, continuous_dominance),
        ("Laplacian and a' identities", 30, identities),
        ("numerical radius", 60, numerical_radius),
        ("initial distributions and p = 1", 60, initial_distributions),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over the {budget} s budget; {d}")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {status} [{:.2} s] {name}: {detail}", k + 1, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
