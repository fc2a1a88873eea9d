use std::path::Path;

use anyhow::{bail, Result};
use ipgap_core::bounds::{
    bound_sweep, log_mgf_bound_continuous, log_mgf_bound_discrete, tail_bound, theta_limit, BoundQuery, BoundResult,
    Horizon, Mode, SweepRow,
};
use ipgap_core::chain::{make_observable, radon_nikodym_norm, stationary_distribution, Distribution, Observable};
use ipgap_core::examples::{four_state_rows, flip_rows, skew_rotation, NAMES};
use ipgap_core::oracle::{exact_mgf_continuous, exact_mgf_discrete};
use ipgap_core::schema::{Kernel, LoadedChain};
use ipgap_core::simulate::{empirical_mgf, path_sums, tail_from_sums, SimConfig};
use ipgap_core::spectral::{
    gap_report, gap_report_generator, ip_gap, ip_gap_generator, numerical_radius_complex, numerical_radius_real,
    GapReport, DEFAULT_PSEUDO_KMAX, DEFAULT_RADIUS_GRID,
};
use ipgap_core::{Error, TransitionMatrix};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::args::{
    BoundArgs, ExamplesArgs, GapsArgs, HorizonArgs, MgfArgs, ObservableArgs, OutputFormat, RadiusArgs, SweepArgs,
    VerifyArgs,
};
use crate::output::{emit_record, emit_rows, notice, warning};

/// Whether a command found a bound violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Violation,
}

/// Chain file contents resolved against command-line overrides.
struct Context {
    kernel: Kernel,
    mu: Distribution,
    f: Option<Observable>,
    nu: Distribution,
}

impl Context {
    fn load(path: &Path, overrides: Option<&ObservableArgs>, require_f: bool) -> Result<Self> {
        let LoadedChain { kernel, mu, f, nu } = LoadedChain::from_file(path)?;
        let mu = match mu {
            Some(mu) => mu,
            None => match &kernel {
                Kernel::Discrete(p) => stationary_distribution(p)?,
                Kernel::Continuous(q) => stationary_distribution(q)?,
            },
        };
        let space = kernel.space().clone();
        let (f_flag, nu_flag) = match overrides {
            Some(o) => (o.f.clone(), o.nu.clone()),
            None => (None, None),
        };
        if f_flag.is_some() && f.is_some() {
            warning("--f overrides f from the chain file");
        }
        if nu_flag.is_some() && nu.is_some() {
            warning("--nu overrides nu from the chain file");
        }
        let raw_f = f_flag.or(f);
        let f = match raw_f {
            Some(values) => {
                let obs = make_observable(&values, &mu, true)?;
                let mean = mu.expect(&values);
                if mean != 0.0 {
                    notice(format!("centered f by subtracting E_mu[f] = {mean}"));
                }
                Some(obs)
            }
            None if require_f => {
                return Err(Error::InvalidArgument("an observable f is required (chain file or --f)".into()).into())
            }
            None => None,
        };
        let nu = match nu_flag {
            Some(w) => Distribution::new(space, w)?,
            None => nu.unwrap_or_else(|| mu.clone()),
        };
        Ok(Self { kernel, mu, f, nu })
    }

    fn eta_p(&self) -> Result<f64> {
        Ok(match &self.kernel {
            Kernel::Discrete(p) => ip_gap(p, &self.mu)?,
            Kernel::Continuous(q) => ip_gap_generator(q, &self.mu)?,
        })
    }

    fn horizon(&self, args: &HorizonArgs) -> Result<Horizon> {
        let h = args.horizon();
        match (&self.kernel, h) {
            (Kernel::Discrete(_), Horizon::Steps(_)) | (Kernel::Continuous(_), Horizon::Time(_)) => Ok(h),
            (Kernel::Discrete(_), _) => bad("a chain with \"P\" needs --n"),
            (Kernel::Continuous(_), _) => bad("a chain with \"Q\" needs --t"),
        }
    }
}

fn bad<T>(msg: &str) -> Result<T> {
    Err(Error::InvalidArgument(msg.to_string()).into())
}

pub fn gaps(args: &GapsArgs, format: OutputFormat) -> Result<Outcome> {
    let ctx = Context::load(&args.chain, None, false)?;
    let report: GapReport = match &ctx.kernel {
        Kernel::Discrete(p) => gap_report(p, &ctx.mu, args.pseudo_kmax)?,
        Kernel::Continuous(q) => gap_report_generator(q, &ctx.mu)?,
    };
    emit_record(format, &report)?;
    Ok(Outcome::Ok)
}

fn bound_query(args: &BoundArgs) -> Result<BoundQuery> {
    let horizon = args.horizon.horizon();
    if let Some(mode) = args.mode {
        if Mode::from(mode) != horizon.mode() {
            bail!(Error::InvalidArgument(format!(
                "--mode {} does not match the horizon flag (--n is discrete, --t continuous)",
                Mode::from(mode)
            )));
        }
    }
    Ok(BoundQuery::new(horizon, args.delta, args.m, args.sigma2, args.eta_p, args.p, args.nu_norm)?)
}

pub fn bound(args: &BoundArgs, format: OutputFormat) -> Result<Outcome> {
    let result: BoundResult = tail_bound(&bound_query(args)?);
    emit_record(format, &result)?;
    Ok(Outcome::Ok)
}

pub fn sweep(args: &SweepArgs, format: OutputFormat) -> Result<Outcome> {
    let template = bound_query(&args.base)?;
    let rows = bound_sweep(&template, args.axis, &args.values)
        .into_iter()
        .zip(&args.values)
        .map(|(r, &v)| r.map(|res| SweepRow::new(args.axis, v, &res)))
        .collect::<Result<Vec<_>, _>>()?;
    emit_rows(format, &rows)?;
    Ok(Outcome::Ok)
}

/// One `verify` grid point; field names are the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub param: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    pub consistent: bool,
}

pub fn verify(args: &VerifyArgs, format: OutputFormat) -> Result<Outcome> {
    let ctx = Context::load(&args.chain, Some(&args.observable), true)?;
    let horizon = ctx.horizon(&args.horizon)?;
    if !ctx.kernel.dynamics().is_irreducible() {
        bail!(Error::NotIrreducible);
    }
    let f = ctx.f.as_ref().expect("required above");
    if f.sup_norm() == 0.0 {
        bail!(Error::InvalidArgument("f is constant under mu; there is no deviation to verify".into()));
    }
    let computed = ctx.eta_p()?;
    let eta_p = match args.eta_p {
        Some(claimed) => {
            warning(format!("testing the supplied eta_p = {claimed} (computed: {computed})"));
            claimed
        }
        None => computed,
    };
    let nu_norm = radon_nikodym_norm(&ctx.nu, &ctx.mu, args.p)?;
    let template = BoundQuery::new(horizon, 0.0, f.sup_norm(), f.sigma2(), eta_p, args.p, nu_norm)?;
    let config = SimConfig::new(args.sim.replicas, horizon, args.sim.seed, ctx.nu.clone()).with_alpha(args.sim.alpha);
    let sums = path_sums(&config, ctx.kernel.dynamics(), f)?;

    let mut rows = Vec::with_capacity(args.delta_grid.len());
    for &delta in &args.delta_grid {
        let bound = tail_bound(&template.with_delta(delta)?);
        let report = tail_from_sums(&sums, horizon, delta, args.sim.alpha, args.sim.seed)?.compare_with(bound);
        rows.push(VerifyRow {
            param: delta,
            estimate: report.estimate,
            ci_low: report.ci_low,
            ci_high: report.ci_high,
            bound: bound.probability_bound,
            consistent: report.consistent == Some(true),
        });
    }
    emit_rows(format, &rows)?;
    Ok(if rows.iter().all(|r| r.consistent) {
        Outcome::Ok
    } else {
        Outcome::Violation
    })
}

/// One `mgf` grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfRow {
    pub theta: f64,
    pub exact: f64,
    /// Stationary-start bound; empty when `|theta|` is outside its domain.
    pub bound: Option<f64>,
    pub estimate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub heavy_tail: Option<bool>,
    pub consistent: Option<bool>,
}

pub fn mgf(args: &MgfArgs, format: OutputFormat) -> Result<Outcome> {
    let ctx = Context::load(&args.chain, Some(&args.observable), true)?;
    let horizon = ctx.horizon(&args.horizon)?;
    let f = ctx.f.as_ref().expect("required above");
    let eta_p = ctx.eta_p()?;
    if ctx.nu != ctx.mu {
        notice("the bound column assumes a stationary start; exact values use nu");
    }
    let mut rows = Vec::with_capacity(args.theta.len());
    let mut violated = false;
    for &theta in &args.theta {
        let exact = match (&ctx.kernel, horizon) {
            (Kernel::Discrete(p), Horizon::Steps(n)) => exact_mgf_discrete(p, &ctx.nu, f.values(), theta, n)?,
            (Kernel::Continuous(q), Horizon::Time(t)) => exact_mgf_continuous(q, &ctx.nu, f.values(), theta, t)?,
            _ => unreachable!("horizon checked against the kernel"),
        };
        let (m, s) = (f.sup_norm(), f.sigma());
        let bound = if m == 0.0 {
            Some(1.0)
        } else if theta.abs() < theta_limit(m, eta_p) {
            Some(match horizon {
                Horizon::Steps(n) => log_mgf_bound_discrete(theta, n, m, s, eta_p)?.exp(),
                Horizon::Time(t) => log_mgf_bound_continuous(theta, t, m, s, eta_p)?.exp(),
            })
        } else {
            None
        };
        let consistent = (ctx.nu == ctx.mu).then_some(()).and(bound).map(|b| exact <= b * (1.0 + 1e-9));
        violated |= consistent == Some(false);
        let mut row = MgfRow {
            theta,
            exact,
            bound,
            estimate: None,
            ci_low: None,
            ci_high: None,
            heavy_tail: None,
            consistent,
        };
        if args.simulate {
            let config = SimConfig::new(args.sim.replicas, horizon, args.sim.seed, ctx.nu.clone())
                .with_theta(theta)
                .with_alpha(args.sim.alpha);
            let r = empirical_mgf(&config, ctx.kernel.dynamics(), f)?;
            if r.heavy_tail {
                warning(format!("theta = {theta}: MGF samples are heavy-tailed; the interval is unreliable"));
            }
            row.estimate = Some(r.estimate);
            row.ci_low = Some(r.ci_low);
            row.ci_high = Some(r.ci_high);
            row.heavy_tail = Some(r.heavy_tail);
        }
        rows.push(row);
    }
    emit_rows(format, &rows)?;
    Ok(if violated { Outcome::Violation } else { Outcome::Ok })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub real: f64,
    pub complex: f64,
    pub grid_points: usize,
}

pub fn radius(args: &RadiusArgs, format: OutputFormat) -> Result<Outcome> {
    let text = match (&args.file, &args.matrix) {
        (Some(path), _) => std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?,
        (None, Some(m)) => m.clone(),
        (None, None) => unreachable!("clap requires a matrix"),
    };
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        bail!(Error::Schema("matrix must be square and non-empty".into()));
    }
    let b = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let report = RadiusReport {
        real: numerical_radius_real(&b),
        complex: numerical_radius_complex(&b, args.grid)?,
        grid_points: args.grid,
    };
    emit_record(format, &report)?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn close(name: &str, expected: f64, observed: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            expected,
            observed,
            tolerance,
            passed: (observed - expected).abs() <= tolerance,
        }
    }

    /// `observed <= expected + tolerance`.
    fn at_most(name: &str, expected: f64, observed: f64, tolerance: f64) -> Self {
        Self {
            passed: observed <= expected + tolerance,
            ..Self::close(name, expected, observed, tolerance)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub name: String,
    pub matrix: Vec<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub gaps: Option<GapReport>,
    pub checks: Vec<Check>,
    pub note: Option<String>,
    pub passed: bool,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn chain_example(rows: Vec<Vec<f64>>) -> Result<(TransitionMatrix, Distribution, GapReport)> {
    let p = TransitionMatrix::from_rows(&rows)?;
    let mu = stationary_distribution(&p)?;
    let report = gap_report(&p, &mu, DEFAULT_PSEUDO_KMAX)?;
    Ok((p, mu, report))
}

pub fn example_report(name: &str) -> Result<ExampleReport> {
    let report = match name {
        "appendix-a" => {
            let (p, mu, gaps) = chain_example(four_state_rows())?;
            let (eta_p, eta_s, eta_a) = (gaps.eta_p, gaps.eta_s.unwrap_or(f64::NAN), gaps.eta_a.unwrap_or(f64::NAN));
            let mut checks: Vec<Check> = mu
                .weights()
                .iter()
                .enumerate()
                .map(|(i, &w)| Check::close(&format!("mu[{i}] = 1/4"), 0.25, w, 1e-12))
                .collect();
            checks.push(Check::close("eta_a = 0", 0.0, eta_a, 1e-10));
            checks.push(Check::at_most("eta_s <= eta_p", eta_p, eta_s, 1e-9));
            checks.push(Check::at_most("eta_a <= eta_s", eta_s, eta_a, 1e-9));
            ExampleReport {
                name: name.into(),
                matrix: rows_of(p.entries()),
                mu: Some(mu.weights().to_vec()),
                gaps: Some(gaps),
                checks,
                note: Some("absolute spectral gap vanishes while the iterated Poincare gap stays positive".into()),
                passed: false,
            }
        }
        "skew-radius" => {
            let a = skew_rotation();
            let a2 = &a * &a;
            let w = numerical_radius_complex(&a, DEFAULT_RADIUS_GRID)?;
            let w2 = numerical_radius_complex(&a2, DEFAULT_RADIUS_GRID)?;
            ExampleReport {
                name: name.into(),
                matrix: rows_of(&a),
                mu: None,
                gaps: None,
                checks: vec![
                    Check::close("real w(A) = 0", 0.0, numerical_radius_real(&a), 1e-12),
                    Check::close("real w(A^2) = 1", 1.0, numerical_radius_real(&a2), 1e-12),
                    Check::close("complex w(A) = 1", 1.0, w, 1e-12),
                    Check::at_most("complex w(A^2) <= w(A)^2", w * w, w2, 2e-3),
                ],
                note: Some("over real scalars w(A) = 0 but w(A^2) = 1, so the power inequality fails".into()),
                passed: false,
            }
        }
        "flip-chain" => {
            let (p, mu, gaps) = chain_example(flip_rows())?;
            let pseudo = gaps.pseudo.map(|g| g.value).unwrap_or(f64::NAN);
            let checks = vec![
                Check::close("eta_p = 2", 2.0, gaps.eta_p, 1e-12),
                Check::close("eta_s = 2", 2.0, gaps.eta_s.unwrap_or(f64::NAN), 1e-12),
                Check::close("eta_a = 0", 0.0, gaps.eta_a.unwrap_or(f64::NAN), 1e-10),
                Check::close("pseudo gap (k_max = 20) = 0", 0.0, pseudo, 1e-12),
            ];
            ExampleReport {
                name: name.into(),
                matrix: rows_of(p.entries()),
                mu: Some(mu.weights().to_vec()),
                gaps: Some(gaps),
                checks,
                note: Some("periodic chain: the pseudo spectral gap is 0 while eta_p = 2".into()),
                passed: false,
            }
        }
        other => bail!(Error::InvalidArgument(format!(
            "unknown example {other:?}; available: {}",
            NAMES.join(", ")
        ))),
    };
    let passed = report.checks.iter().all(|c| c.passed);
    Ok(ExampleReport { passed, ..report })
}

pub fn examples(args: &ExamplesArgs, format: OutputFormat) -> Result<Outcome> {
    let report = example_report(&args.name)?;
    if format == OutputFormat::Human {
        println!("example: {}", report.name);
        for row in &report.matrix {
            println!("  {row:?}");
        }
        if let Some(mu) = &report.mu {
            println!("mu: {mu:?}");
        }
        if let Some(g) = &report.gaps {
            println!(
                "eta_p = {}, eta_s = {:?}, eta_a = {:?}, pseudo = {:?}",
                g.eta_p,
                g.eta_s,
                g.eta_a,
                g.pseudo.map(|p| p.value)
            );
        }
        for c in &report.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            println!("{tag}  {} (observed {:?})", c.name, c.observed);
        }
        if let Some(note) = &report.note {
            println!("note: {note}");
        }
    } else {
        emit_record(format, &report)?;
    }
    Ok(if report.passed { Outcome::Ok } else { Outcome::Violation })
}
