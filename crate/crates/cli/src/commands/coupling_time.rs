//! Coupling times of coupled particle filters started from two initial
//! particle vectors.

use smc_forget::coupling::{coupling_time, PredictiveLaw};
use smc_forget::exact::LnFactorials;
use smc_forget::rng::{replicate_seed, stream_from_seed};
use smc_forget::smc::initialise;
use smc_forget::stats::{bootstrap_stderr, linear_fit, mean_stderr, median, quantile};
use smc_forget::{DiscreteFkModel, ParticleSystem, Scheme, SmcError};

use super::{Check, Status};
use crate::config::{powers_of_two, InitPair};
use crate::error::CliError;
use crate::output::{write_csv, ResultRecord};
use crate::runner::Context;

pub const CSV_NAME: &str = "coupling_time.csv";
pub const DEFAULT_REPLICATES: usize = 200;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Largest `N` of the exact one-step comparison rows.
pub const EXACT_MAX_N: usize = 10;

/// Summary of one `(N, scheme)` grid point. Timed-out runs enter the
/// statistics at `max_steps`, so these are lower bounds when
/// `timeout_fraction > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPoint {
    pub n_particles: usize,
    pub scheme: Scheme,
    pub sigmas: Vec<f64>,
    pub median: (f64, f64),
    pub mean: (f64, f64),
    pub p90: (f64, f64),
    pub timeout_fraction: f64,
}

/// Fit `median σ ≈ a + b log N` for one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogFit {
    pub scheme: Scheme,
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// One-step coupling probabilities from the all-zeros and all-ones
/// systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactComparison {
    pub n_particles: usize,
    /// `1 − ‖Bin-product(p) − Bin-product(r)‖_TV`.
    pub state: f64,
    /// `(1 − |p − r|)^N`.
    pub individual: f64,
}

pub struct CouplingReport {
    pub points: Vec<CouplingPoint>,
    pub fits: Vec<LogFit>,
    pub exact: Vec<ExactComparison>,
    pub replicates: usize,
    pub checks: Vec<Check>,
}

impl CouplingReport {
    pub fn fit(&self, scheme: Scheme) -> Option<&LogFit> {
        self.fits.iter().find(|f| f.scheme == scheme)
    }

    pub fn medians(&self, scheme: Scheme) -> Vec<(usize, f64)> {
        self.points.iter().filter(|p| p.scheme == scheme).map(|p| (p.n_particles, p.median.0)).collect()
    }
}

fn initial_pair<R: rand::Rng + ?Sized>(
    model: &DiscreteFkModel,
    init: InitPair,
    n: usize,
    rng: &mut R,
) -> Result<(ParticleSystem<usize>, ParticleSystem<usize>), SmcError> {
    Ok(match init {
        InitPair::Extreme => (ParticleSystem::new(vec![0; n], 0)?, ParticleSystem::new(vec![1; n], 0)?),
        InitPair::Identical => {
            let a = initialise(model, n, rng)?;
            (a.clone(), a)
        }
        InitPair::Independent => (initialise(model, n, rng)?, initialise(model, n, rng)?),
    })
}

/// `1 − TV` between the laws of `N` i.i.d. Bernoulli(`p`) and Bernoulli(`r`)
/// vectors, summed over counts.
fn product_overlap(lnf: &LnFactorials, n: usize, p: f64, r: f64) -> f64 {
    let half_l1: f64 = (0..=n)
        .map(|j| {
            let (a, b) = (lnf.ln_binomial_pmf(n, p, j).exp(), lnf.ln_binomial_pmf(n, r, j).exp());
            (a - b).abs()
        })
        .sum::<f64>()
        / 2.0;
    1.0 - half_l1
}

fn exact_comparisons(model: &DiscreteFkModel) -> Result<Vec<ExactComparison>, SmcError> {
    let lnf = LnFactorials::new(EXACT_MAX_N);
    (1..=EXACT_MAX_N)
        .map(|n| {
            let zeros = ParticleSystem::new(vec![0; n], 0)?;
            let ones = ParticleSystem::new(vec![1; n], 0)?;
            let p = PredictiveLaw::new(model, &zeros)?.pmf().map_or(0.0, |m| m.prob(1));
            let r = PredictiveLaw::new(model, &ones)?.pmf().map_or(0.0, |m| m.prob(1));
            Ok(ExactComparison {
                n_particles: n,
                state: product_overlap(&lnf, n, p, r),
                individual: (1.0 - (p - r).abs()).powi(n as i32),
            })
        })
        .collect()
}

fn with_stderr(xs: &[f64], stat: fn(&[f64]) -> f64, seed: u64) -> (f64, f64) {
    let se = bootstrap_stderr(xs, stat, BOOTSTRAP_RESAMPLES, &mut stream_from_seed(seed));
    (stat(xs), se)
}

pub fn compute(ctx: &Context) -> Result<CouplingReport, CliError> {
    let cfg = &ctx.config;
    let ns = cfg.n_grid(powers_of_two(6, 11));
    let schemes = cfg.schemes()?;
    let replicates = cfg.replicates(DEFAULT_REPLICATES);
    let max_steps = cfg.run.max_steps;
    let model = cfg.model(max_steps)?;

    let mut points = Vec::new();
    for &scheme in &schemes {
        for &n in &ns {
            let outcomes = ctx.replicates(replicates, |_, rng| {
                let (a, b) = initial_pair(&model, cfg.run.init, n, rng)?;
                coupling_time(&model, a, b, scheme, max_steps, rng)
            });
            let mut sigmas = Vec::with_capacity(replicates);
            let mut timeouts = 0usize;
            for o in outcomes {
                match o?.sigma() {
                    Some(s) => sigmas.push(s as f64),
                    None => {
                        timeouts += 1;
                        sigmas.push(max_steps as f64);
                    }
                }
            }
            // Bootstrap streams sit far from the replicate indices.
            let boot = replicate_seed(ctx.master_seed, u64::MAX - points.len() as u64);
            points.push(CouplingPoint {
                n_particles: n,
                scheme,
                median: with_stderr(&sigmas, median, boot),
                mean: mean_stderr(&sigmas),
                p90: with_stderr(&sigmas, |x| quantile(x, 0.9), boot ^ 1),
                timeout_fraction: timeouts as f64 / replicates as f64,
                sigmas,
            });
        }
    }

    let mut fits = Vec::new();
    if ns.len() >= 2 {
        for &scheme in &schemes {
            let (x, y): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter(|p| p.scheme == scheme)
                .map(|p| ((p.n_particles as f64).ln(), p.median.0))
                .unzip();
            let f = linear_fit(&x, &y)?;
            fits.push(LogFit { scheme, intercept: f.intercept, slope: f.slope, r_squared: f.r_squared });
        }
    }

    let exact = exact_comparisons(&model)?;
    let bad: Vec<usize> =
        exact.iter().filter(|e| e.state < e.individual - 1e-12).map(|e| e.n_particles).collect();
    let checks = vec![Check::new(
        "state_vs_individual_one_step",
        bad.is_empty(),
        if bad.is_empty() {
            format!("state coupling at least as likely for N = 1..={EXACT_MAX_N}")
        } else {
            format!("state coupling less likely at N = {bad:?}")
        },
    )];
    Ok(CouplingReport { points, fits, exact, replicates, checks })
}

pub fn records(ctx: &Context, report: &CouplingReport) -> Vec<ResultRecord> {
    let cfg = &ctx.config;
    let seed = ctx.master_seed;
    let reps = report.replicates;
    let mut out = Vec::new();
    for p in &report.points {
        let base = |name: &str, v: f64| ResultRecord::new(cfg, name, v).n(p.n_particles).scheme(p.scheme).replicates(reps, seed);
        out.push(base("coupling_time_median", p.median.0).stderr(p.median.1));
        out.push(base("coupling_time_mean", p.mean.0).stderr(p.mean.1));
        out.push(base("coupling_time_p90", p.p90.0).stderr(p.p90.1));
        out.push(base("coupling_time_timeout_fraction", p.timeout_fraction));
    }
    for f in &report.fits {
        let base = |name: &str, v: f64| ResultRecord::new(cfg, name, v).scheme(f.scheme).replicates(reps, seed);
        out.push(base("coupling_time_fit_intercept", f.intercept));
        out.push(base("coupling_time_fit_slope", f.slope));
        out.push(base("coupling_time_fit_r2", f.r_squared));
    }
    for e in &report.exact {
        out.push(ResultRecord::new(cfg, "coupling_prob_state", e.state).n(e.n_particles).k(1).scheme(Scheme::State));
        out.push(
            ResultRecord::new(cfg, "coupling_prob_individual", e.individual)
                .n(e.n_particles)
                .k(1)
                .scheme(Scheme::Individual),
        );
    }
    out
}

pub fn run(ctx: &Context) -> Result<Status, CliError> {
    let report = compute(ctx)?;
    let recs = records(ctx, &report);
    let path = ctx.csv_path(CSV_NAME);
    write_csv(&path, &recs)?;
    for f in &report.fits {
        println!(
            "{}: median sigma = {:.3} + {:.3} log N (R^2 = {:.3})",
            f.scheme, f.intercept, f.slope, f.r_squared
        );
    }
    for p in report.points.iter().filter(|p| p.timeout_fraction > 0.0) {
        eprintln!("warning: N = {} {}: {:.1}% of runs timed out", p.n_particles, p.scheme, 100.0 * p.timeout_fraction);
    }
    for c in &report.checks {
        println!("{c}");
    }
    println!("wrote {} rows to {}", recs.len(), path.display());
    Ok(Status::from_checks(&report.checks))
}
