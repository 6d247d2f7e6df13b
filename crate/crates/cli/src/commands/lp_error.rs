//! Monte Carlo `L²` errors of the particle filter and the conditional
//! particle filter for `φ = 1{x = 1}`.

use smc_forget::fkmodel::ideal_recursion;
use smc_forget::smc::{cpf_filter_estimate, predictive_estimate, run_cpf, run_pf};
use smc_forget::stats::{linear_fit, mean_stderr};
use smc_forget::{FeynmanKac, ReferencePath, SmcError};

use super::Status;
use crate::config::powers_of_two;
use crate::error::CliError;
use crate::output::{write_csv, ResultRecord};
use crate::runner::Context;

pub const CSV_NAME: &str = "lp_error.csv";
pub const DEFAULT_REPLICATES: usize = 800;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// `η_n^N(φ)` from the particle filter.
    PfPredictive,
    /// `π̂_n^N(φ)`, the `(N+1)`-point weighted average of the conditional
    /// particle filter.
    CpfFilter,
    /// `η̂_n^N(φ)`, the plain average of the conditional particle filter's
    /// `N` free particles.
    CpfPredictive,
}

pub const ESTIMATORS: [Estimator; 3] = [Estimator::PfPredictive, Estimator::CpfFilter, Estimator::CpfPredictive];

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::PfPredictive => "pf_predictive",
            Estimator::CpfFilter => "cpf_filter",
            Estimator::CpfPredictive => "cpf_predictive",
        }
    }
}

/// `L²` error of one estimator at one `(N, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpPoint {
    pub estimator: Estimator,
    pub n_particles: usize,
    pub time: usize,
    pub error: f64,
    pub stderr: f64,
}

pub struct LpReport {
    pub points: Vec<LpPoint>,
    /// `(estimator, slope)` of `log max_n error` against `log N`.
    pub slopes: Vec<(Estimator, f64)>,
    pub replicates: usize,
    pub c_lp2: f64,
}

impl LpReport {
    pub fn error(&self, est: Estimator, n_particles: usize, time: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.estimator == est && p.n_particles == n_particles && p.time == time)
            .map(|p| p.error)
    }

    /// `max_n` error per `N`, in grid order.
    pub fn max_over_time(&self, est: Estimator) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for p in self.points.iter().filter(|p| p.estimator == est) {
            match out.last_mut() {
                Some((n, e)) if *n == p.n_particles => *e = e.max(p.error),
                _ => out.push((p.n_particles, p.error)),
            }
        }
        out
    }

    pub fn slope(&self, est: Estimator) -> Option<f64> {
        self.slopes.iter().find(|(e, _)| *e == est).map(|(_, s)| *s)
    }
}

/// `sqrt(mean(e²))` with a delta-method standard error.
fn root_mean_square(sq: &[f64]) -> (f64, f64) {
    let (mse, se) = mean_stderr(sq);
    let rms = mse.sqrt();
    (rms, if rms > 0.0 { se / (2.0 * rms) } else { 0.0 })
}

pub fn compute(ctx: &Context) -> Result<LpReport, CliError> {
    let cfg = &ctx.config;
    let p = cfg.grid.p.unwrap_or(2);
    if p != 2 {
        return Err(CliError::Unsupported(format!("p = {p}: only the L² norm is implemented")));
    }
    let ns = cfg.n_grid(powers_of_two(5, 10));
    let times = cfg.grid.k.clone().unwrap_or_else(|| (1..=50).collect());
    let replicates = cfg.replicates(DEFAULT_REPLICATES);
    let steps = times.iter().copied().max().unwrap_or(0);
    let model = cfg.model(steps + 1)?;
    // A constant path in the state of larger potential pulls hardest on the
    // conditional filter.
    let heavy = usize::from(cfg.model.g1 >= cfg.model.g0);
    let reference = ReferencePath::new(&model, vec![heavy; model.horizon()])?;
    let ideal = ideal_recursion(&model, steps)?;
    let c_lp2 = model.stability_constants()?.c_lp2;

    let mut points = Vec::new();
    for &n in &ns {
        // errors[r][j][e]: squared error of estimator e at times[j] in replicate r.
        let errors: Vec<Result<Vec<[f64; 3]>, SmcError>> = ctx.replicates(replicates, |_, rng| {
            let pf = run_pf(&model, n, steps, rng)?;
            let cpf = run_cpf(&model, n, &reference, steps, rng)?;
            times
                .iter()
                .map(|&t| {
                    let (eta, pi) = &ideal[t];
                    let ind = |x: &usize| (*x == 1) as u8 as f64;
                    let a = predictive_estimate(&pf[t], ind) - eta.prob(1);
                    let b = cpf_filter_estimate(&cpf[t], &model, &reference.states[t], ind)? - pi.prob(1);
                    let c = predictive_estimate(&cpf[t], ind) - eta.prob(1);
                    Ok([a * a, b * b, c * c])
                })
                .collect()
        });
        let errors = errors.into_iter().collect::<Result<Vec<_>, _>>()?;
        for (e, est) in ESTIMATORS.into_iter().enumerate() {
            for (j, &t) in times.iter().enumerate() {
                let sq: Vec<f64> = errors.iter().map(|r| r[j][e]).collect();
                let (error, stderr) = root_mean_square(&sq);
                points.push(LpPoint { estimator: est, n_particles: n, time: t, error, stderr });
            }
        }
    }
    // Keep points grouped by estimator, then N, then time.
    points.sort_by_key(|p| (p.estimator as u8, ns.iter().position(|&n| n == p.n_particles)));

    let mut report = LpReport { points, slopes: Vec::new(), replicates, c_lp2 };
    if ns.len() >= 2 {
        for est in ESTIMATORS {
            let (x, y): (Vec<f64>, Vec<f64>) =
                report.max_over_time(est).into_iter().map(|(n, e)| ((n as f64).ln(), e.ln())).unzip();
            report.slopes.push((est, linear_fit(&x, &y)?.slope));
        }
    }
    Ok(report)
}

pub fn records(ctx: &Context, report: &LpReport) -> Vec<ResultRecord> {
    let cfg = &ctx.config;
    let seed = ctx.master_seed;
    let mut out = Vec::new();
    for est in ESTIMATORS {
        let name = format!("lp_{}", est.name());
        for pt in report.points.iter().filter(|p| p.estimator == est) {
            let mut r = ResultRecord::new(cfg, name.clone(), pt.error)
                .n(pt.n_particles)
                .k(pt.time)
                .p(2)
                .replicates(report.replicates, seed)
                .stderr(pt.stderr);
            if est == Estimator::PfPredictive {
                r = r.bound(report.c_lp2 / (pt.n_particles as f64).sqrt());
            }
            out.push(r);
        }
        for (n, e) in report.max_over_time(est) {
            out.push(ResultRecord::new(cfg, format!("{name}_max"), e).n(n).p(2).replicates(report.replicates, seed));
        }
        if let Some(s) = report.slope(est) {
            out.push(ResultRecord::new(cfg, format!("{name}_slope"), s).p(2).replicates(report.replicates, seed));
        }
    }
    out
}

pub fn run(ctx: &Context) -> Result<Status, CliError> {
    let report = compute(ctx)?;
    let recs = records(ctx, &report);
    let path = ctx.csv_path(CSV_NAME);
    write_csv(&path, &recs)?;
    for (est, s) in &report.slopes {
        println!("{}: log-log slope of max-over-n L2 error = {s:.4}", est.name());
    }
    println!("wrote {} rows to {}", recs.len(), path.display());
    Ok(Status::Success)
}
