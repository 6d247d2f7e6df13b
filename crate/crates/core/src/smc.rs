//! Particle filter and conditional particle filter engines with multinomial
//! resampling.

use rand::Rng;

use crate::error::{Result, SmcError};
use crate::fkmodel::FeynmanKac;

/// Categorical law over `0..n` sampled by inverse CDF: one uniform and a
/// binary search over the cumulative weights per draw.
#[derive(Debug, Clone)]
pub struct Categorical {
    cumulative: Vec<f64>,
}

impl Categorical {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(SmcError::DegenerateWeights);
            }
            acc += w;
            cumulative.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(SmcError::DegenerateWeights);
        }
        debug_assert!(acc >= 1e-300, "selection weights sum to {acc}");
        Ok(Categorical { cumulative })
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probability(&self, i: usize) -> f64 {
        let lo = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - lo) / self.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.total();
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// The `N` particles of a filter at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem<S> {
    pub particles: Vec<S>,
    pub time: usize,
}

impl<S> ParticleSystem<S> {
    pub fn new(particles: Vec<S>, time: usize) -> Result<Self> {
        if particles.is_empty() {
            return Err(SmcError::Domain("particle count must be at least 1".into()));
        }
        Ok(ParticleSystem { particles, time })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

impl ParticleSystem<usize> {
    /// Number of particles in state 1.
    pub fn count_ones(&self) -> usize {
        self.particles.iter().filter(|&&x| x == 1).count()
    }
}

/// Frozen path `x*_{0:T−1}` of the conditional particle filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath<S> {
    pub states: Vec<S>,
}

impl<S> ReferencePath<S> {
    pub fn new<M: FeynmanKac<State = S>>(model: &M, states: Vec<S>) -> Result<Self> {
        if states.len() != model.horizon() {
            return Err(SmcError::Dimension { expected: model.horizon(), found: states.len() });
        }
        Ok(ReferencePath { states })
    }
}

/// `N` i.i.d. draws from `η₀`.
pub fn initialise<M: FeynmanKac, R: Rng + ?Sized>(model: &M, n: usize, rng: &mut R) -> Result<ParticleSystem<M::State>> {
    ParticleSystem::new((0..n).map(|_| model.sample_initial(rng)).collect(), 0)
}

fn check_step<M: FeynmanKac, S>(model: &M, sys: &ParticleSystem<S>) -> Result<()> {
    if sys.time >= model.horizon() {
        return Err(SmcError::Domain(format!("time {} at or beyond horizon {}", sys.time, model.horizon())));
    }
    Ok(())
}

#[cfg(debug_assertions)]
fn debug_check_potentials<M: FeynmanKac>(model: &M, weights: &[f64]) {
    if let Some(b) = model.bounds() {
        let slack = 1e-12 * b.g_hi;
        debug_assert!(
            weights.iter().all(|&w| w >= b.g_lo - slack && w <= b.g_hi + slack),
            "potential outside declared bounds [{}, {}]",
            b.g_lo,
            b.g_hi
        );
    }
}

#[cfg(not(debug_assertions))]
fn debug_check_potentials<M: FeynmanKac>(_model: &M, _weights: &[f64]) {}

/// Selection weights `W_k^i ∝ G_k(X_k^i)` at the system's time.
pub fn selection_weights<M: FeynmanKac>(model: &M, sys: &ParticleSystem<M::State>) -> Vec<f64> {
    let mut w = Vec::with_capacity(sys.len());
    model.potentials(sys.time, &sys.particles, &mut w);
    debug_check_potentials(model, &w);
    w
}

/// One particle filter step: multinomial selection with probabilities
/// proportional to `G_k`, then mutation through `M_{k+1}`.
pub fn pf_step<M: FeynmanKac, R: Rng + ?Sized>(
    sys: &ParticleSystem<M::State>,
    model: &M,
    rng: &mut R,
) -> Result<ParticleSystem<M::State>> {
    check_step(model, sys)?;
    let selection = Categorical::new(&selection_weights(model, sys))?;
    let next = sys.time + 1;
    let particles = (0..sys.len())
        .map(|_| {
            let a = selection.sample(rng);
            model.sample_mutation(next, &sys.particles[a], rng)
        })
        .collect();
    Ok(ParticleSystem { particles, time: next })
}

/// Runs the particle filter for `steps` steps; element `k` of the result is
/// the system at time `k`.
pub fn run_pf<M: FeynmanKac, R: Rng + ?Sized>(
    model: &M,
    n: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<ParticleSystem<M::State>>> {
    if steps > model.horizon() {
        return Err(SmcError::Domain(format!("{steps} steps beyond horizon {}", model.horizon())));
    }
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(initialise(model, n, rng)?);
    for _ in 0..steps {
        let next = pf_step(traj.last().expect("non-empty"), model, rng)?;
        traj.push(next);
    }
    Ok(traj)
}

/// `η_k^N(φ)`: the plain particle average.
pub fn predictive_estimate<S>(sys: &ParticleSystem<S>, phi: impl Fn(&S) -> f64) -> f64 {
    sys.particles.iter().map(phi).sum::<f64>() / sys.len() as f64
}

/// `π_k^N(φ)`: the potential-weighted particle average.
pub fn filter_estimate<M: FeynmanKac>(
    sys: &ParticleSystem<M::State>,
    model: &M,
    phi: impl Fn(&M::State) -> f64,
) -> Result<f64> {
    let w = selection_weights(model, sys);
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(SmcError::DegenerateWeights);
    }
    Ok(sys.particles.iter().zip(&w).map(|(x, g)| g * phi(x)).sum::<f64>() / total)
}

/// One conditional particle filter step: ancestors are drawn from
/// `{0, …, N}` with weights `(G_k(x*_k), G_k(X_k^1), …, G_k(X_k^N))`, index
/// 0 standing for the reference state. The reference itself is not part of
/// the output.
pub fn cpf_step<M: FeynmanKac, R: Rng + ?Sized>(
    sys: &ParticleSystem<M::State>,
    model: &M,
    reference: &M::State,
    rng: &mut R,
) -> Result<ParticleSystem<M::State>> {
    check_step(model, sys)?;
    let mut w = Vec::with_capacity(sys.len() + 1);
    w.push(model.potential(sys.time, reference));
    w.extend(selection_weights(model, sys));
    let selection = Categorical::new(&w)?;
    let next = sys.time + 1;
    let particles = (0..sys.len())
        .map(|_| {
            let parent = match selection.sample(rng) {
                0 => reference,
                a => &sys.particles[a - 1],
            };
            model.sample_mutation(next, parent, rng)
        })
        .collect();
    Ok(ParticleSystem { particles, time: next })
}

/// Runs the conditional particle filter for `steps` steps against a fixed
/// reference path.
pub fn run_cpf<M: FeynmanKac, R: Rng + ?Sized>(
    model: &M,
    n: usize,
    reference: &ReferencePath<M::State>,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<ParticleSystem<M::State>>> {
    if steps > model.horizon() {
        return Err(SmcError::Domain(format!("{steps} steps beyond horizon {}", model.horizon())));
    }
    if reference.states.len() < steps {
        return Err(SmcError::Dimension { expected: steps, found: reference.states.len() });
    }
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(initialise(model, n, rng)?);
    for k in 0..steps {
        let next = cpf_step(traj.last().expect("non-empty"), model, &reference.states[k], rng)?;
        traj.push(next);
    }
    Ok(traj)
}

/// `π̂_k^N(φ)`: the `(N+1)`-point weighted average over the particles and
/// the reference state `x*_k`.
pub fn cpf_filter_estimate<M: FeynmanKac>(
    sys: &ParticleSystem<M::State>,
    model: &M,
    reference: &M::State,
    phi: impl Fn(&M::State) -> f64,
) -> Result<f64> {
    let w = selection_weights(model, sys);
    let g_ref = model.potential(sys.time, reference);
    let total = w.iter().sum::<f64>() + g_ref;
    if !(total > 0.0) || !total.is_finite() {
        return Err(SmcError::DegenerateWeights);
    }
    let num = sys.particles.iter().zip(&w).map(|(x, g)| g * phi(x)).sum::<f64>() + g_ref * phi(reference);
    Ok(num / total)
}
