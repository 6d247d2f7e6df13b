//! Exact forgetting total variation over an `(N, k)` grid.

use smc_forget::exact::{forgetting_lower_bound, forgetting_tv_profile};

use super::{Check, Status};
use crate::config::powers_of_two;
use crate::error::CliError;
use crate::output::{write_csv, ResultRecord};
use crate::runner::Context;

pub const CSV_NAME: &str = "forgetting.csv";

pub struct ForgettingReport {
    pub records: Vec<ResultRecord>,
    pub checks: Vec<Check>,
}

/// `k` values for `N`: the configured list, or `0..=⌊δ_ε log N⌋`.
fn k_values(ctx: &Context, n: usize) -> Vec<usize> {
    match &ctx.config.grid.k {
        Some(k) => k.clone(),
        None => (0..=(ctx.config.delta() * (n as f64).ln()).floor() as usize).collect(),
    }
}

pub fn compute(ctx: &Context) -> Result<ForgettingReport, CliError> {
    let cfg = &ctx.config;
    let ns = cfg.n_grid(powers_of_two(4, 13));
    let k_max = ns.iter().flat_map(|&n| k_values(ctx, n)).max().unwrap_or(0);
    let model = cfg.model(k_max)?;
    // The lower bound is only stated for the flip model with constant potentials.
    let with_bound = cfg.uniform_potentials();

    let profiles = ctx.par_map(&ns, |&n| {
        let ks = k_values(ctx, n);
        let top = ks.iter().copied().max().unwrap_or(0);
        forgetting_tv_profile(&model, n, top).map(|p| (n, ks, p))
    });

    let mut records = Vec::new();
    let mut violations = 0usize;
    let mut rows = 0usize;
    for profile in profiles {
        let (n, ks, tv) = profile?;
        for k in ks {
            let mut r = ResultRecord::new(cfg, "forgetting_tv", tv[k]).n(n).k(k);
            if with_bound {
                let lb = forgetting_lower_bound(cfg.model.epsilon, n, k);
                if tv[k] < lb - 1e-12 {
                    violations += 1;
                }
                rows += 1;
                r = r.bound(lb);
            }
            records.push(r);
        }
    }

    let checks = if with_bound {
        vec![Check::new("forgetting_lower_bound", violations == 0, format!("{violations} of {rows} rows below the bound"))]
    } else {
        vec![Check::skip("forgetting_lower_bound", "only defined for g0 = g1")]
    };
    Ok(ForgettingReport { records, checks })
}

pub fn run(ctx: &Context) -> Result<Status, CliError> {
    let report = compute(ctx)?;
    let path = ctx.csv_path(CSV_NAME);
    write_csv(&path, &report.records)?;
    for c in &report.checks {
        println!("{c}");
    }
    println!("wrote {} rows to {}", report.records.len(), path.display());
    Ok(Status::from_checks(&report.checks))
}
