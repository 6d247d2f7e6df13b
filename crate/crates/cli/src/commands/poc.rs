//! Propagation-of-chaos total variation over `(N, q, k)`.

use smc_forget::exact::{default_q_grid, exact_poc_tv_grid};

use super::Status;
use crate::config::powers_of_two;
use crate::error::CliError;
use crate::output::{float, write_csv, write_table, ResultRecord};
use crate::runner::Context;

pub const CSV_NAME: &str = "poc.csv";
pub const PLOT_NAME: &str = "poc_plot.csv";
pub const GUIDES_NAME: &str = "poc_guides.csv";

/// Smallest constant `a` with `tv ≤ a · (q/N)^slope` on every point of one
/// `k`, fitted to the data rather than derived.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideLine {
    pub k: usize,
    pub slope: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PocPoint {
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub tv: f64,
    pub bound: f64,
}

pub struct PocReport {
    pub points: Vec<PocPoint>,
    pub guides: Vec<GuideLine>,
    /// `(N, q)` pairs dropped because `q > N`.
    pub skipped: Vec<(usize, usize)>,
}

impl PocReport {
    /// Values at fixed `(k, q)` in increasing `N`.
    pub fn series_in_n(&self, k: usize, q: impl Fn(usize) -> usize) -> Vec<(usize, f64)> {
        self.points.iter().filter(|p| p.k == k && p.q == q(p.n)).map(|p| (p.n, p.tv)).collect()
    }

    /// Values at fixed `(N, k)` in increasing `q`.
    pub fn series_in_q(&self, n: usize, k: usize) -> Vec<(usize, f64)> {
        self.points.iter().filter(|p| p.k == k && p.n == n).map(|p| (p.q, p.tv)).collect()
    }
}

fn fit_guides(points: &[PocPoint], ks: &[usize]) -> Vec<GuideLine> {
    let mut out = Vec::new();
    for &k in ks {
        for slope in [1.0, 0.5] {
            let constant = points
                .iter()
                .filter(|p| p.k == k)
                .map(|p| p.tv / (p.q as f64 / p.n as f64).powf(slope))
                .fold(0.0, f64::max);
            out.push(GuideLine { k, slope, constant });
        }
    }
    out
}

pub fn compute(ctx: &Context) -> Result<PocReport, CliError> {
    let cfg = &ctx.config;
    let ns = cfg.n_grid(powers_of_two(6, 12));
    let ks = cfg.grid.k.clone().unwrap_or_else(|| vec![4, 20]);
    let model = cfg.model(ks.iter().copied().max().unwrap_or(0))?;
    let constants = model.stability_constants()?;

    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for &n in &ns {
        let qs = match &cfg.grid.q {
            None => default_q_grid(n),
            Some(qs) => {
                let (keep, drop): (Vec<usize>, Vec<usize>) = qs.iter().partition(|&&q| q <= n);
                skipped.extend(drop.into_iter().map(|q| (n, q)));
                keep
            }
        };
        if qs.is_empty() {
            continue;
        }
        for &k in &ks {
            jobs.push((n, k, qs.clone()));
        }
    }

    let results = ctx.par_map(&jobs, |(n, k, qs)| exact_poc_tv_grid(&model, *n, qs, *k));
    let mut points = Vec::new();
    for ((n, k, qs), tvs) in jobs.iter().zip(results) {
        for (&q, tv) in qs.iter().zip(tvs?) {
            points.push(PocPoint { n: *n, k: *k, q, tv, bound: constants.poc_bound(*n, q) });
        }
    }
    let guides = fit_guides(&points, &ks);
    Ok(PocReport { points, guides, skipped })
}

pub fn run(ctx: &Context) -> Result<Status, CliError> {
    let report = compute(ctx)?;
    for (n, q) in &report.skipped {
        eprintln!("warning: skipping q = {q} > N = {n}");
    }
    let cfg = &ctx.config;
    let records: Vec<ResultRecord> = report
        .points
        .iter()
        .map(|p| ResultRecord::new(cfg, "poc_tv", p.tv).n(p.n).k(p.k).q(p.q).bound(p.bound))
        .collect();
    let path = ctx.csv_path(CSV_NAME);
    write_csv(&path, &records)?;

    let plot: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| {
            // log2(0) has no finite value; leave the cell empty.
            let log_tv = if p.tv > 0.0 { float(p.tv.log2()) } else { String::new() };
            vec![
                p.n.to_string(),
                p.k.to_string(),
                p.q.to_string(),
                float((p.q as f64 / p.n as f64).log2()),
                log_tv,
            ]
        })
        .collect();
    write_table(&ctx.out_dir.join(PLOT_NAME), &["N", "k", "q", "log2_q_over_N", "log2_tv"], &plot)?;

    let guides: Vec<Vec<String>> = report
        .guides
        .iter()
        .map(|g| vec![g.k.to_string(), float(g.slope), float(g.constant), "artifact-fitted".into()])
        .collect();
    write_table(&ctx.out_dir.join(GUIDES_NAME), &["k", "slope", "constant", "origin"], &guides)?;

    println!("wrote {} rows to {}", records.len(), path.display());
    for g in &report.guides {
        println!("guide line (artifact-fitted) k = {}: tv <= {:.4e} * (q/N)^{}", g.k, g.constant, g.slope);
    }
    Ok(Status::Success)
}
