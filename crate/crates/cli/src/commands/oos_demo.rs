//! Retrospective processing of a delayed measurement on stored particle
//! systems, with coupling-time diagnostics.

use smc_forget::oos::{coupling_diagnostic, likelihood_informativeness, process_oos, CouplingDiagnostic, OosRecord};
use smc_forget::{DelayedMeasurementScenario, DiscreteFkModel, Scheme, SmcError};

use super::Status;
use crate::config::ScenarioSection;
use crate::error::CliError;
use crate::output::{write_csv, ResultRecord};
use crate::runner::Context;

pub const CSV_NAME: &str = "oos_demo.csv";
pub const DEFAULT_REPLICATES: usize = 200;
pub const DEFAULT_N: [usize; 4] = [16, 64, 256, 1024];

/// Diagnostics for one late-measurement likelihood.
pub struct LikelihoodResult {
    pub likelihood: [f64; 2],
    /// `TV(Ψ_{G₀′}(η₀), η₀)`.
    pub informativeness: f64,
    pub diagnostic: CouplingDiagnostic,
}

impl LikelihoodResult {
    /// Tag used in experiment names, e.g. `lik=0.1:1`.
    pub fn tag(&self) -> String {
        format!("lik={}:{}", self.likelihood[0], self.likelihood[1])
    }
}

pub struct OosReport {
    pub scheme: Scheme,
    pub replicates: usize,
    pub results: Vec<LikelihoodResult>,
}

fn scenario(ctx: &Context) -> Result<&ScenarioSection, CliError> {
    ctx.config.scenario.as_ref().ok_or_else(|| CliError::Config("oos-demo needs a [scenario] section".into()))
}

pub fn compute(ctx: &Context) -> Result<OosReport, CliError> {
    let cfg = &ctx.config;
    let sc = scenario(ctx)?;
    let scheme: Scheme = sc.scheme.parse().map_err(|e: SmcError| CliError::Config(e.to_string()))?;
    let ns = cfg.n_grid(DEFAULT_N.to_vec());
    let replicates = cfg.replicates(DEFAULT_REPLICATES);
    let base = cfg.model(sc.arrivals.iter().copied().max().unwrap_or(1))?;

    let mut results = Vec::new();
    for &likelihood in &sc.likelihoods {
        let mut records = Vec::new();
        for &n in &ns {
            for &arrival in &sc.arrivals {
                let sigmas = ctx.replicates(replicates, |_, rng| {
                    let s = DelayedMeasurementScenario::<DiscreteFkModel, DiscreteFkModel>::discrete(
                        &base,
                        &likelihood,
                        n,
                        arrival,
                        rng,
                    )?;
                    Ok::<_, SmcError>(process_oos(&s, scheme, rng)?.sigma)
                });
                for sigma in sigmas {
                    records.push(OosRecord { n_particles: n, arrival, sigma: sigma? });
                }
            }
        }
        results.push(LikelihoodResult {
            likelihood,
            informativeness: likelihood_informativeness(&base, &likelihood)?,
            diagnostic: coupling_diagnostic(&records)?,
        });
    }
    Ok(OosReport { scheme, replicates, results })
}

pub fn records(ctx: &Context, report: &OosReport) -> Vec<ResultRecord> {
    let cfg = &ctx.config;
    let (seed, reps) = (ctx.master_seed, report.replicates);
    let mut out = Vec::new();
    for res in &report.results {
        let tag = res.tag();
        let name = |what: &str| format!("oos_{what}[{tag}]");
        out.push(ResultRecord::new(cfg, name("informativeness_tv"), res.informativeness));
        for s in &res.diagnostic.summaries {
            // k carries the arrival step; histogram rows use it for σ.
            let row = |what: &str, v: f64| {
                ResultRecord::new(cfg, name(what), v).n(s.n_particles).scheme(report.scheme).replicates(reps, seed)
            };
            out.push(row("coupled_fraction", s.coupled_fraction).k(s.arrival));
            if let Some(m) = s.median_sigma {
                out.push(row("median_sigma", m).k(s.arrival));
            }
            out.push(row("uncoupled", s.uncoupled as f64).k(s.arrival));
            for (i, &count) in s.histogram.iter().enumerate() {
                out.push(row(&format!("sigma_count[arrival={}]", s.arrival), count as f64).k(i + 1));
            }
        }
        for &(n, d) in &res.diagnostic.safe_delay {
            if let Some(d) = d {
                out.push(
                    ResultRecord::new(cfg, name("safe_delay"), d as f64)
                        .n(n)
                        .k(d)
                        .scheme(report.scheme)
                        .replicates(reps, seed),
                );
            }
        }
    }
    out
}

pub fn run(ctx: &Context) -> Result<Status, CliError> {
    let report = compute(ctx)?;
    let recs = records(ctx, &report);
    let path = ctx.csv_path(CSV_NAME);
    write_csv(&path, &recs)?;
    for res in &report.results {
        println!("{} (informativeness {:.4}):", res.tag(), res.informativeness);
        for s in &res.diagnostic.summaries {
            let med = s.median_sigma.map_or("inf".to_string(), |m| format!("{m}"));
            println!(
                "  N = {:5} arrival = {:3}: coupled {:.3}, median sigma {med}",
                s.n_particles, s.arrival, s.coupled_fraction
            );
        }
        for (n, d) in &res.diagnostic.safe_delay {
            match d {
                Some(d) => println!("  N = {n:5}: suggested safe delay {d}"),
                None => println!("  N = {n:5}: no tested delay qualifies"),
            }
        }
    }
    println!("wrote {} rows to {}", recs.len(), path.display());
    Ok(Status::Success)
}
