//! Exact checks of the stated bounds on the configured model.

use std::fmt::Write as _;

use smc_forget::exact::{
    default_q_grid, exact_poc_tv_grid, forgetting_lower_bound, forgetting_tv_profile, monotone_bound_check,
    monotone_bound_value,
};
use smc_forget::fkmodel::ideal_contraction_tv;
use smc_forget::inequalities::run_inequality_suite;
use smc_forget::rng::replicate_stream;
use smc_forget::{DiscretePmf, StabilityConstants};

use super::{Check, Status};
use crate::config::powers_of_two;
use crate::error::CliError;
use crate::runner::Context;

pub const REPORT_NAME: &str = "verify_bounds.txt";
/// Largest particle count any check here will evaluate exactly.
pub const DESK_MAX_N: usize = 4096;
const SLACK: f64 = 1e-12;
const CONTRACTION_STEPS: usize = 50;
const POC_TIMES: [usize; 2] = [4, 20];

pub struct VerifyReport {
    pub constants: StabilityConstants,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn status(&self) -> Status {
        Status::from_checks(&self.checks)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let c = &self.constants;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "constants: beta = {:.6e}, c_lp2 = {:.6e}, c = {:.6e}, c' = {:.6e}, N_min = {:.0}, eps_easy = {:.6e}, C_poc = {:.6e}",
            c.beta, c.c_lp2, c.c_thm, c.cprime_thm, c.n_min, c.eps_easy, c.poc_c
        );
        for check in &self.checks {
            let _ = writeln!(s, "{check}");
        }
        let _ = writeln!(s, "{}", if self.status() == Status::Success { "ALL CHECKS PASSED" } else { "CHECKS FAILED" });
        s
    }
}

/// Counts violations of `value ≤ bound + SLACK` and tracks the worst excess.
#[derive(Default)]
struct Tally {
    cases: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn upper(&mut self, value: f64, bound: f64) {
        self.cases += 1;
        let excess = value - bound;
        if excess > SLACK {
            self.violations += 1;
        }
        self.worst = self.worst.max(excess);
    }

    fn lower(&mut self, value: f64, bound: f64) {
        self.upper(bound, value);
    }

    fn check(&self, name: &str) -> Check {
        Check::new(
            name,
            self.violations == 0,
            format!("{} of {} cases violated, max excess {:.3e}", self.violations, self.cases, self.worst),
        )
    }
}

pub fn compute(ctx: &Context) -> Result<VerifyReport, CliError> {
    let cfg = &ctx.config;
    let scale = cfg.checks.bound_scale;
    let model = cfg.model(CONTRACTION_STEPS.max(cfg.checks.small_k_max).max(64))?;
    let constants = model.stability_constants()?;
    let mut checks = Vec::new();

    // Small-N bound (1 − ε_easy^N)^k.
    let ns: Vec<usize> = (1..=cfg.checks.small_n_max).collect();
    let k_max = cfg.checks.small_k_max;
    let profiles = ctx.par_map(&ns, |&n| forgetting_tv_profile(&model, n, k_max));
    let mut t = Tally::default();
    for (&n, prof) in ns.iter().zip(profiles) {
        let prof = prof?;
        for k in 1..=k_max {
            t.upper(prof[k], scale * constants.small_n_bound(n, k));
        }
    }
    checks.push(t.check("small_n_bound"));

    // Forgetting lower bound, flip model with constant potentials only.
    if cfg.uniform_potentials() {
        let ns = powers_of_two(4, 10);
        let delta = cfg.delta();
        let profiles = ctx.par_map(&ns, |&n| {
            let top = (delta * (n as f64).ln()).floor() as usize;
            cfg.model(top).and_then(|m| Ok(forgetting_tv_profile(&m, n, top)?))
        });
        let mut t = Tally::default();
        for (&n, prof) in ns.iter().zip(profiles) {
            for (k, v) in prof?.into_iter().enumerate() {
                t.lower(v, forgetting_lower_bound(cfg.model.epsilon, n, k));
            }
        }
        checks.push(t.check("forgetting_lower_bound"));
    } else {
        checks.push(Check::skip("forgetting_lower_bound", "only defined for g0 = g1"));
    }

    // Ideal filter contraction from the two Dirac initial laws.
    let (x, y) = (DiscretePmf::dirac(2, 0)?, DiscretePmf::dirac(2, 1)?);
    let mut t = Tally::default();
    for k in 0..=CONTRACTION_STEPS {
        t.upper(ideal_contraction_tv(&model, k, &x, &y)?, scale * constants.beta.powi(k as i32));
    }
    checks.push(t.check("ideal_contraction"));

    // N ↦ (1 − (1 − c'/N)^{2N})^{1/2} non-increasing above c'.
    let n_min = constants.n_min as usize;
    let grid: Vec<usize> = (0..=24).map(|e| n_min << e).collect();
    checks.push(Check::new(
        "monotone_bound",
        monotone_bound_check(constants.cprime_thm, &grid)?,
        format!("b = c' = {:.6e} on N = N_min * 2^e, e = 0..=24", constants.cprime_thm),
    ));

    // Randomised inequality suite.
    let mut rng = replicate_stream(ctx.master_seed, 0);
    for r in run_inequality_suite(cfg.checks.cases, &mut rng)? {
        checks.push(Check::new(
            format!("inequality_{}", r.name),
            r.passed(),
            format!("{} of {} cases violated, max excess {:.3e}", r.violations, r.cases, r.max_excess),
        ));
    }

    // Propagation of chaos min(1, √(2Cq/N)).
    let jobs: Vec<(usize, usize)> =
        powers_of_two(6, 10).into_iter().flat_map(|n| POC_TIMES.map(|k| (n, k))).collect();
    let poc_model = cfg.model(POC_TIMES[1])?;
    let results = ctx.par_map(&jobs, |&(n, k)| exact_poc_tv_grid(&poc_model, n, &default_q_grid(n), k));
    let mut t = Tally::default();
    for (&(n, _), tvs) in jobs.iter().zip(results) {
        for (q, tv) in default_q_grid(n).into_iter().zip(tvs?) {
            t.upper(tv, scale * constants.poc_bound(n, q));
        }
    }
    checks.push(t.check("poc_upper_bound"));

    // Large-N forgetting bound: only N ≥ c' is covered.
    if constants.cprime_thm > DESK_MAX_N as f64 {
        checks.push(Check::skip(
            "large_n_forgetting_regime",
            format!(
                "out of range: requires N >= c' = {:.3e}, beyond the largest exact grid N = {DESK_MAX_N}; not desk-feasible, not asserted",
                constants.cprime_thm
            ),
        ));
    } else {
        let ns: Vec<usize> =
            powers_of_two(0, DESK_MAX_N.trailing_zeros()).into_iter().filter(|&n| n as f64 >= constants.cprime_thm).collect();
        let ks: Vec<usize> = ns.iter().map(|&n| (constants.c_thm * (n as f64).ln()).ceil() as usize).collect();
        let big = cfg.model(ks.iter().copied().max().unwrap_or(0))?;
        let jobs: Vec<(usize, usize)> = ns.into_iter().zip(ks).collect();
        let results = ctx.par_map(&jobs, |&(n, k)| forgetting_tv_profile(&big, n, k));
        let mut t = Tally::default();
        for (&(n, k), prof) in jobs.iter().zip(results) {
            t.upper(prof?[k], scale * monotone_bound_value(constants.cprime_thm, n as f64));
        }
        checks.push(t.check("large_n_forgetting_regime"));
    }

    Ok(VerifyReport { constants, checks })
}

pub fn run(ctx: &Context) -> Result<Status, CliError> {
    let report = compute(ctx)?;
    let text = report.render();
    print!("{text}");
    std::fs::create_dir_all(&ctx.out_dir)?;
    std::fs::write(ctx.out_dir.join(REPORT_NAME), &text)?;
    Ok(report.status())
}
