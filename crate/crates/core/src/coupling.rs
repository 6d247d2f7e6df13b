//! Maximal couplings of particle filter predictive laws.
//!
//! Two filters sharing dynamics are advanced jointly. Given the current
//! systems, the next-step predictive laws are
//! `μ(x) = Σ_j W^j M_{k+1}(X^j, x)` and `μ̃` likewise, and either
//!
//! * each particle pair is drawn from a maximal coupling of `(μ, μ̃)`,
//!   independently over `i` (*individual* scheme), or
//! * the whole vectors are drawn from a maximal coupling of the product
//!   laws `(μ^{⊗N}, μ̃^{⊗N})` (*state* scheme).
//!
//! Finite-state models couple the exact mixture pmfs; other models go
//! through the rejection sampler [`cond_max_couple`] with mixture densities.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Result, SmcError};
use crate::fkmodel::FeynmanKac;
use crate::measures::{cond_max_couple_discrete, max_couple_slices, DiscretePmf};
use crate::smc::{pf_step, selection_weights, Categorical, ParticleSystem};

/// Iteration cap of the rejection loop in [`cond_max_couple`].
pub const MAX_REJECTION_ITERATIONS: u64 = 10_000_000;

/// Default cap on coupled steps.
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// Given `x ~ μ`, returns `y ~ ν` such that `(x, y)` is a maximal coupling.
///
/// Densities are passed as log-densities with respect to a common dominating
/// measure, so that product laws over many particles do not underflow.
/// Keeps `x` with probability `1 ∧ ν(x)/μ(x)`; otherwise proposes `y ~ ν`
/// until one is accepted with probability `1 − (1 ∧ μ(y)/ν(y))`.
pub fn cond_max_couple<T, R, F, G, S>(x: T, ln_mu: F, ln_nu: G, mut sample_nu: S, rng: &mut R) -> Result<T>
where
    R: Rng + ?Sized,
    F: Fn(&T) -> f64,
    G: Fn(&T) -> f64,
    S: FnMut(&mut R) -> T,
{
    let log_ratio = ln_nu(&x) - ln_mu(&x);
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        return Ok(x);
    }
    for _ in 0..MAX_REJECTION_ITERATIONS {
        let y = sample_nu(rng);
        let log_ratio = ln_mu(&y) - ln_nu(&y);
        if log_ratio < 0.0 && rng.random::<f64>().ln() >= log_ratio {
            return Ok(y);
        }
    }
    Err(SmcError::Nontermination { iterations: MAX_REJECTION_ITERATIONS })
}

/// The predictive law `Σ_j W^j M_{k+1}(X^j, ·)` of a particle system.
pub struct PredictiveLaw<'a, M: FeynmanKac> {
    model: &'a M,
    time: usize,
    parents: &'a [M::State],
    weights: Vec<f64>,
    selection: Categorical,
    pmf: Option<DiscretePmf>,
}

impl<'a, M: FeynmanKac> PredictiveLaw<'a, M> {
    pub fn new(model: &'a M, sys: &'a ParticleSystem<M::State>) -> Result<Self> {
        if sys.time >= model.horizon() {
            return Err(SmcError::Domain(format!("time {} at or beyond horizon {}", sys.time, model.horizon())));
        }
        let raw = selection_weights(model, sys);
        let selection = Categorical::new(&raw)?;
        let total = selection.total();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let time = sys.time + 1;
        let pmf = model.predictive_pmf(time, &sys.particles, &weights);
        Ok(PredictiveLaw { model, time, parents: &sys.particles, weights, selection, pmf })
    }

    /// Time index of the law's draws.
    pub fn time(&self) -> usize {
        self.time
    }

    pub fn pmf(&self) -> Option<&DiscretePmf> {
        self.pmf.as_ref()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> M::State {
        if let Some(pmf) = &self.pmf {
            if let Some(x) = self.model.state_from_index(pmf.sample(rng)) {
                return x;
            }
        }
        let a = self.selection.sample(rng);
        self.model.sample_mutation(self.time, &self.parents[a], rng)
    }

    pub fn density(&self, x: &M::State) -> f64 {
        if let (Some(pmf), Some(i)) = (&self.pmf, self.model.state_index(x)) {
            return pmf.prob(i);
        }
        self.parents
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * self.model.mutation_density(self.time, p, x))
            .sum()
    }

    pub fn ln_density(&self, x: &M::State) -> f64 {
        self.density(x).ln()
    }

    /// `Σ_i ln μ(x_i)` for a particle vector.
    pub fn ln_product_density(&self, xs: &[M::State]) -> f64 {
        xs.iter().map(|x| self.ln_density(x)).sum()
    }

    pub fn sample_product<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<M::State> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    fn indices(&self, xs: &[M::State]) -> Option<Vec<usize>> {
        xs.iter().map(|x| self.model.state_index(x)).collect()
    }
}

/// Draws `N` pairs independently from maximal couplings of `(μ, μ̃)`.
pub fn couple_individual<MA, MB, R>(
    law_a: &PredictiveLaw<'_, MA>,
    law_b: &PredictiveLaw<'_, MB>,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<MA::State>, Vec<MA::State>)>
where
    MA: FeynmanKac,
    MB: FeynmanKac<State = MA::State>,
    R: Rng + ?Sized,
{
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    if let (Some(pa), Some(pb)) = (law_a.pmf(), law_b.pmf()) {
        if pa.len() == pb.len() {
            for _ in 0..n {
                let (i, j) = max_couple_slices(pa.probs(), pb.probs(), rng);
                match (law_a.model.state_from_index(i), law_b.model.state_from_index(j)) {
                    (Some(x), Some(y)) => {
                        xs.push(x);
                        ys.push(y);
                    }
                    _ => return Err(SmcError::Domain("state index out of range".into())),
                }
            }
            return Ok((xs, ys));
        }
    }
    for _ in 0..n {
        let x = law_a.sample(rng);
        let y = cond_max_couple(x.clone(), |z| law_a.ln_density(z), |z| law_b.ln_density(z), |r| law_b.sample(r), rng)?;
        xs.push(x);
        ys.push(y);
    }
    Ok((xs, ys))
}

/// Draws the two particle vectors from a maximal coupling of the product
/// laws `(μ^{⊗N}, μ̃^{⊗N})`.
pub fn couple_state<MA, MB, R>(
    law_a: &PredictiveLaw<'_, MA>,
    law_b: &PredictiveLaw<'_, MB>,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<MA::State>, Vec<MA::State>)>
where
    MA: FeynmanKac,
    MB: FeynmanKac<State = MA::State>,
    R: Rng + ?Sized,
{
    let xs = law_a.sample_product(n, rng);
    let ys = cond_couple_state(&xs, law_a, law_b, rng)?;
    Ok((xs, ys))
}

/// Given `given ~ law_given^{⊗N}`, draws a vector `~ law_target^{⊗N}`
/// particle by particle from maximal couplings.
pub fn cond_couple_individual<MA, MB, R>(
    given: &[MA::State],
    law_given: &PredictiveLaw<'_, MA>,
    law_target: &PredictiveLaw<'_, MB>,
    rng: &mut R,
) -> Result<Vec<MA::State>>
where
    MA: FeynmanKac,
    MB: FeynmanKac<State = MA::State>,
    R: Rng + ?Sized,
{
    if let (Some(pg), Some(pt), Some(idx)) = (law_given.pmf(), law_target.pmf(), law_given.indices(given)) {
        return idx
            .into_iter()
            .map(|i| {
                let j = cond_max_couple_discrete(i, pg, pt, rng)?;
                law_target
                    .model
                    .state_from_index(j)
                    .ok_or_else(|| SmcError::Domain("state index out of range".into()))
            })
            .collect();
    }
    given
        .iter()
        .map(|x| {
            cond_max_couple(
                x.clone(),
                |z| law_given.ln_density(z),
                |z| law_target.ln_density(z),
                |r| law_target.sample(r),
                rng,
            )
        })
        .collect()
}

/// Given `given ~ law_given^{⊗N}`, draws a vector `~ law_target^{⊗N}` from a
/// maximal coupling of the product laws.
pub fn cond_couple_state<MA, MB, R>(
    given: &[MA::State],
    law_given: &PredictiveLaw<'_, MA>,
    law_target: &PredictiveLaw<'_, MB>,
    rng: &mut R,
) -> Result<Vec<MA::State>>
where
    MA: FeynmanKac,
    MB: FeynmanKac<State = MA::State>,
    R: Rng + ?Sized,
{
    let n = given.len();
    cond_max_couple(
        given.to_vec(),
        |xs| law_given.ln_product_density(xs),
        |xs| law_target.ln_product_density(xs),
        |r| law_target.sample_product(n, r),
        rng,
    )
}

/// Which coupling a single step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Individual,
    State,
}

/// Coupling scheme over successive steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Individual,
    State,
    /// State and individual steps in turn, starting with the state step
    /// when `state_first`.
    Alternating { state_first: bool },
}

impl Scheme {
    /// Kind of the `step`-th coupled step (0-based).
    pub fn kind_at(&self, step: usize) -> StepKind {
        match *self {
            Scheme::Individual => StepKind::Individual,
            Scheme::State => StepKind::State,
            Scheme::Alternating { state_first } => {
                if (step % 2 == 0) == state_first {
                    StepKind::State
                } else {
                    StepKind::Individual
                }
            }
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Individual => "individual",
            Scheme::State => "state",
            Scheme::Alternating { state_first: true } => "alternating",
            Scheme::Alternating { state_first: false } => "alternating-individual-first",
        })
    }
}

impl FromStr for Scheme {
    type Err = SmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "individual" => Ok(Scheme::Individual),
            "state" => Ok(Scheme::State),
            "alternating" | "alternating-state-first" => Ok(Scheme::Alternating { state_first: true }),
            "alternating-individual-first" => Ok(Scheme::Alternating { state_first: false }),
            other => Err(SmcError::Domain(format!("unknown coupling scheme '{other}'"))),
        }
    }
}

/// Two particle systems advanced jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledFilterPair<S> {
    pub a: ParticleSystem<S>,
    pub b: ParticleSystem<S>,
    pub coupled: bool,
    /// First time at which the particle vectors coincided.
    pub sigma: Option<usize>,
}

impl<S: PartialEq> CoupledFilterPair<S> {
    pub fn new(a: ParticleSystem<S>, b: ParticleSystem<S>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(SmcError::Dimension { expected: a.len(), found: b.len() });
        }
        if a.time != b.time {
            return Err(SmcError::Domain(format!("time indices differ: {} vs {}", a.time, b.time)));
        }
        let coupled = a.particles == b.particles;
        let sigma = coupled.then_some(a.time);
        Ok(CoupledFilterPair { a, b, coupled, sigma })
    }

    pub fn time(&self) -> usize {
        self.a.time
    }

    fn record(a: ParticleSystem<S>, b: ParticleSystem<S>, prev_coupled: bool, prev_sigma: Option<usize>) -> Self {
        let equal = a.particles == b.particles;
        debug_assert!(!prev_coupled || equal, "coupled trajectories diverged");
        let sigma = prev_sigma.or_else(|| equal.then_some(a.time));
        CoupledFilterPair { a, b, coupled: prev_coupled || equal, sigma }
    }
}

/// One coupled step of two filters whose models may differ (they must share
/// the state space).
pub fn coupled_step_between<MA, MB, R>(
    pair: &CoupledFilterPair<MA::State>,
    model_a: &MA,
    model_b: &MB,
    kind: StepKind,
    rng: &mut R,
) -> Result<CoupledFilterPair<MA::State>>
where
    MA: FeynmanKac,
    MB: FeynmanKac<State = MA::State>,
    R: Rng + ?Sized,
{
    let law_a = PredictiveLaw::new(model_a, &pair.a)?;
    let law_b = PredictiveLaw::new(model_b, &pair.b)?;
    let n = pair.a.len();
    let (xs, ys) = match kind {
        StepKind::Individual => couple_individual(&law_a, &law_b, n, rng)?,
        StepKind::State => couple_state(&law_a, &law_b, n, rng)?,
    };
    let time = law_a.time();
    Ok(CoupledFilterPair::record(
        ParticleSystem { particles: xs, time },
        ParticleSystem { particles: ys, time },
        pair.coupled,
        pair.sigma,
    ))
}

fn coupled_step<M: FeynmanKac, R: Rng + ?Sized>(
    pair: &CoupledFilterPair<M::State>,
    model: &M,
    kind: StepKind,
    rng: &mut R,
) -> Result<CoupledFilterPair<M::State>> {
    if pair.coupled {
        let next = pf_step(&pair.a, model, rng)?;
        return Ok(CoupledFilterPair { b: next.clone(), a: next, coupled: true, sigma: pair.sigma });
    }
    coupled_step_between(pair, model, model, kind, rng)
}

/// Coupled step drawing each particle pair from an independent maximal
/// coupling of the two predictive laws.
pub fn coupled_step_individual<M: FeynmanKac, R: Rng + ?Sized>(
    pair: &CoupledFilterPair<M::State>,
    model: &M,
    rng: &mut R,
) -> Result<CoupledFilterPair<M::State>> {
    coupled_step(pair, model, StepKind::Individual, rng)
}

/// Coupled step drawing both particle vectors from a maximal coupling of
/// the product predictive laws.
pub fn coupled_step_state<M: FeynmanKac, R: Rng + ?Sized>(
    pair: &CoupledFilterPair<M::State>,
    model: &M,
    rng: &mut R,
) -> Result<CoupledFilterPair<M::State>> {
    coupled_step(pair, model, StepKind::State, rng)
}

/// Result of a coupling-time run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingOutcome {
    Coupled { sigma: usize },
    Timeout { steps: usize },
}

impl CouplingOutcome {
    pub fn sigma(&self) -> Option<usize> {
        match self {
            CouplingOutcome::Coupled { sigma } => Some(*sigma),
            CouplingOutcome::Timeout { .. } => None,
        }
    }
}

/// Runs coupled steps from `(init_a, init_b)` until the particle vectors
/// coincide or `max_steps` steps have been taken.
pub fn coupling_time<M: FeynmanKac, R: Rng + ?Sized>(
    model: &M,
    init_a: ParticleSystem<M::State>,
    init_b: ParticleSystem<M::State>,
    scheme: Scheme,
    max_steps: usize,
    rng: &mut R,
) -> Result<CouplingOutcome> {
    let mut pair = CoupledFilterPair::new(init_a, init_b)?;
    if let Some(sigma) = pair.sigma {
        return Ok(CouplingOutcome::Coupled { sigma });
    }
    let start = pair.time();
    if start + max_steps > model.horizon() {
        return Err(SmcError::Domain(format!(
            "{max_steps} coupled steps from time {start} exceed horizon {}",
            model.horizon()
        )));
    }
    for step in 0..max_steps {
        pair = coupled_step(&pair, model, scheme.kind_at(step), rng)?;
        if let Some(sigma) = pair.sigma {
            return Ok(CouplingOutcome::Coupled { sigma });
        }
    }
    Ok(CouplingOutcome::Timeout { steps: max_steps })
}
