//! Feynman–Kac models `(η₀, M_k, G_k)`.
//!
//! [`FeynmanKac`] is the interface the particle engines consume: samplers and
//! densities for the initial law and the mutation kernels, and the potential
//! functions. [`DiscreteFkModel`] is the finite-state specialisation with
//! explicit matrices; on it the selection map `Ψ_k` and the prediction map
//! `Φ_{k+1}` are applied exactly.
//!
//! Time conventions: potentials `G_k` are indexed from `k = 0`, mutations
//! `M_k` from `k = 1`, and a model with horizon `T` supports the particle
//! filter steps `k = 0, …, T−1` (each using `G_k` and `M_{k+1}`).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dims, Result, SmcError};
use crate::measures::{sample_unnormalised, tv_distance, DiscretePmf};

/// Uniform bounds on mutation densities and potentials: every `M_k(x, y)`
/// lies in `[m_lo, m_hi]` and every `G_k(x)` in `[g_lo, g_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingBounds {
    pub m_lo: f64,
    pub m_hi: f64,
    pub g_lo: f64,
    pub g_hi: f64,
}

impl MixingBounds {
    pub fn new(m_lo: f64, m_hi: f64, g_lo: f64, g_hi: f64) -> Result<Self> {
        let ok = |lo: f64, hi: f64| lo > 0.0 && lo <= hi && hi.is_finite();
        if !ok(m_lo, m_hi) || !ok(g_lo, g_hi) {
            return Err(SmcError::InvalidModel(format!(
                "mixing bounds need 0 < lo <= hi < inf, got M in [{m_lo}, {m_hi}], G in [{g_lo}, {g_hi}]"
            )));
        }
        Ok(MixingBounds { m_lo, m_hi, g_lo, g_hi })
    }

    /// `M̄/M̲`
    pub fn m_ratio(&self) -> f64 {
        self.m_hi / self.m_lo
    }

    /// `Ḡ/G̲`
    pub fn g_ratio(&self) -> f64 {
        self.g_hi / self.g_lo
    }

    /// Contraction rate `β = 1 − (M̲/M̄)²` of the ideal prediction maps.
    pub fn beta(&self) -> f64 {
        let r = self.m_lo / self.m_hi;
        1.0 - r * r
    }
}

/// Stability constants implied by [`MixingBounds`].
///
/// The `L^p` constant is only provided for `p = 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    /// Ideal-filter contraction rate `1 − (M̲/M̄)²`.
    pub beta: f64,
    /// Time-uniform `L²` error constant `2 (M̄/M̲)³ Ḡ/G̲`.
    pub c_lp2: f64,
    /// Multiplier of `log N` in the forgetting-time bound.
    pub c_thm: f64,
    /// Particle count threshold `(9/2)(M̄/M̲)⁸(Ḡ/G̲)⁴` of the forgetting bound.
    pub cprime_thm: f64,
    /// `⌊cprime_thm⌋ + 1`.
    pub n_min: f64,
    /// `(M̲/M̄)²`, the per-particle overlap in the small-`N` bound.
    pub eps_easy: f64,
    /// Propagation-of-chaos constant `c_lp2² (M̄/M̲)² (Ḡ/G̲)² / 8`.
    pub poc_c: f64,
    /// `1 / log((1−2ε)⁻²)` for the symmetric binary flip model with constant
    /// potentials; `None` otherwise.
    pub delta_eps: Option<f64>,
}

impl StabilityConstants {
    pub fn from_bounds(bounds: &MixingBounds, flip_epsilon: Option<f64>) -> Self {
        let m = bounds.m_ratio();
        let g = bounds.g_ratio();
        let beta = bounds.beta();
        let c_lp2 = 2.0 * m.powi(3) * g;
        let c_thm = 1.0 / (2.0 * (1.0 / beta).ln()) + 1.0 / std::f64::consts::LN_2;
        let cprime_thm = 4.5 * m.powi(8) * g.powi(4);
        let c1 = m * m * g * g / 8.0;
        StabilityConstants {
            beta,
            c_lp2,
            c_thm,
            cprime_thm,
            n_min: cprime_thm.floor() + 1.0,
            eps_easy: 1.0 - beta,
            poc_c: c_lp2 * c_lp2 * c1,
            delta_eps: flip_epsilon.map(forgetting_time_scale),
        }
    }

    /// Small-`N` forgetting bound `(1 − ε_easy^N)^k`.
    pub fn small_n_bound(&self, n: usize, k: usize) -> f64 {
        (1.0 - self.eps_easy.powi(n as i32)).powi(k as i32)
    }

    /// Propagation-of-chaos bound `min(1, √(2 C q / N))`.
    pub fn poc_bound(&self, n: usize, q: usize) -> f64 {
        (2.0 * self.poc_c * q as f64 / n as f64).sqrt().min(1.0)
    }
}

/// `δ_ε = 1 / log((1 − 2ε)⁻²)`.
pub fn forgetting_time_scale(epsilon: f64) -> f64 {
    1.0 / (-2.0 * (1.0 - 2.0 * epsilon).ln())
}

/// A Feynman–Kac model as consumed by the particle engines.
pub trait FeynmanKac {
    type State: Clone + PartialEq + std::fmt::Debug;

    /// Number of prediction steps `T` the model defines.
    fn horizon(&self) -> usize;

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn initial_density(&self, x: &Self::State) -> f64;

    /// Draws from `M_k(from, ·)`, `k ≥ 1`.
    fn sample_mutation<R: Rng + ?Sized>(&self, k: usize, from: &Self::State, rng: &mut R) -> Self::State;

    /// Density of `M_k(from, ·)` at `to` w.r.t. the model's dominating measure.
    fn mutation_density(&self, k: usize, from: &Self::State, to: &Self::State) -> f64;

    /// `G_k(x)`, `k ≥ 0`.
    fn potential(&self, k: usize, x: &Self::State) -> f64;

    /// Fills `out` with `G_k` evaluated at each particle.
    fn potentials(&self, k: usize, particles: &[Self::State], out: &mut Vec<f64>) {
        out.clear();
        out.extend(particles.iter().map(|x| self.potential(k, x)));
    }

    /// Declared strong-mixing bounds, if the model satisfies them.
    fn bounds(&self) -> Option<MixingBounds> {
        None
    }

    /// For finite state spaces: the exact law `Σ_j W^j M_k(X^j, ·)` as a pmf
    /// over state indices.
    fn predictive_pmf(&self, _k: usize, _parents: &[Self::State], _weights: &[f64]) -> Option<DiscretePmf> {
        None
    }

    /// For finite state spaces: the index of a state.
    fn state_index(&self, _x: &Self::State) -> Option<usize> {
        None
    }

    /// For finite state spaces: the state with a given index.
    fn state_from_index(&self, _i: usize) -> Option<Self::State> {
        None
    }
}

/// Row-stochastic square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    /// Rows must be non-negative and sum to 1 within `1e-12`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(SmcError::InvalidModel("empty transition matrix".into()));
        }
        let mut entries = Vec::with_capacity(size * size);
        for (i, row) in rows.into_iter().enumerate() {
            check_dims(size, row.len())?;
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(SmcError::InvalidModel(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(SmcError::InvalidModel(format!("row {i} sums to {sum}")));
            }
            entries.extend(row);
        }
        Ok(StochasticMatrix { size, entries })
    }

    pub fn identity(size: usize) -> Self {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1.0;
        }
        StochasticMatrix { size, entries }
    }

    /// The symmetric binary kernel that flips the state with probability `ε`.
    pub fn binary_flip(epsilon: f64) -> Result<Self> {
        Self::from_rows(vec![vec![1.0 - epsilon, epsilon], vec![epsilon, 1.0 - epsilon]])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// Row vector times matrix.
    pub fn left_apply(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for (i, &w) in mu.iter().enumerate() {
            if w != 0.0 {
                for (o, m) in out.iter_mut().zip(self.row(i)) {
                    *o += w * m;
                }
            }
        }
        out
    }

    fn entry_range(&self) -> (f64, f64) {
        self.entries
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// A time-indexed family with a default value and a few per-step overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    default: T,
    overrides: Vec<(usize, T)>,
}

impl<T> Schedule<T> {
    pub fn constant(value: T) -> Self {
        Schedule { default: value, overrides: Vec::new() }
    }

    /// Values at steps `first, first+1, …`; later steps repeat the last one.
    pub fn from_sequence(first: usize, values: Vec<T>) -> Result<Self>
    where
        T: Clone,
    {
        let last = values
            .last()
            .cloned()
            .ok_or_else(|| SmcError::InvalidModel("empty schedule".into()))?;
        let mut s = Schedule::constant(last);
        for (i, v) in values.into_iter().enumerate() {
            s.set(first + i, v);
        }
        Ok(s)
    }

    pub fn at(&self, k: usize) -> &T {
        self.overrides
            .iter()
            .find(|(i, _)| *i == k)
            .map(|(_, v)| v)
            .unwrap_or(&self.default)
    }

    pub fn set(&mut self, k: usize, value: T) {
        match self.overrides.iter_mut().find(|(i, _)| *i == k) {
            Some(slot) => slot.1 = value,
            None => self.overrides.push((k, value)),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        std::iter::once(&self.default).chain(self.overrides.iter().map(|(_, v)| v))
    }
}

/// Finite-state Feynman–Kac model with explicit matrices. States are the
/// indices `0..S`; the dominating measure is counting measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFkModel {
    states: usize,
    initial: DiscretePmf,
    mutations: Schedule<StochasticMatrix>,
    potentials: Schedule<Vec<f64>>,
    horizon: usize,
}

impl DiscreteFkModel {
    pub fn new(
        initial: DiscretePmf,
        mutations: Schedule<StochasticMatrix>,
        potentials: Schedule<Vec<f64>>,
        horizon: usize,
    ) -> Result<Self> {
        let states = initial.len();
        for m in mutations.values() {
            check_dims(states, m.size())?;
        }
        for g in potentials.values() {
            check_dims(states, g.len())?;
            if g.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(SmcError::InvalidModel("potentials must be positive and finite".into()));
            }
        }
        if horizon == 0 {
            return Err(SmcError::InvalidModel("horizon must be positive".into()));
        }
        Ok(DiscreteFkModel { states, initial, mutations, potentials, horizon })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn initial(&self) -> &DiscretePmf {
        &self.initial
    }

    /// `M_k`, `k ≥ 1`.
    pub fn mutation(&self, k: usize) -> &StochasticMatrix {
        self.mutations.at(k)
    }

    /// `G_k`, `k ≥ 0`.
    pub fn potential_vector(&self, k: usize) -> &[f64] {
        self.potentials.at(k)
    }

    pub fn with_initial(mut self, initial: DiscretePmf) -> Result<Self> {
        check_dims(self.states, initial.len())?;
        self.initial = initial;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(SmcError::InvalidModel("horizon must be positive".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    /// Replaces `G_k` by `g`.
    pub fn with_potential_at(mut self, k: usize, g: Vec<f64>) -> Result<Self> {
        check_dims(self.states, g.len())?;
        if g.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(SmcError::InvalidModel("potentials must be positive and finite".into()));
        }
        self.potentials.set(k, g);
        Ok(self)
    }

    /// Multiplies `G_0` pointwise by a late-arriving likelihood.
    pub fn with_delayed_potential(&self, likelihood: &[f64]) -> Result<Self> {
        check_dims(self.states, likelihood.len())?;
        let g: Vec<f64> = self.potential_vector(0).iter().zip(likelihood).map(|(a, b)| a * b).collect();
        self.clone().with_potential_at(0, g)
    }

    /// Entry-wise bounds over every matrix and potential in the schedule.
    pub fn mixing_bounds(&self) -> MixingBounds {
        let (m_lo, m_hi) = self
            .mutations
            .values()
            .map(StochasticMatrix::entry_range)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)));
        let (g_lo, g_hi) = self
            .potentials
            .values()
            .flat_map(|g| g.iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        MixingBounds { m_lo, m_hi, g_lo, g_hi }
    }

    /// `Some(ε)` when every kernel is the binary flip with the same `ε` and
    /// every potential is constant in the state.
    pub fn flip_epsilon(&self) -> Option<f64> {
        if self.states != 2 {
            return None;
        }
        let eps = self.mutations.at(1).get(0, 1);
        let all_flip = self.mutations.values().all(|m| {
            m.get(0, 1) == eps && m.get(1, 0) == eps && m.get(0, 0) == 1.0 - eps && m.get(1, 1) == 1.0 - eps
        });
        let flat = self.potentials.values().all(|g| g[0] == g[1]);
        (all_flip && flat).then_some(eps)
    }

    /// Stability constants for this model's entry-wise bounds. Positive
    /// entries are required for the bounds to be meaningful.
    pub fn stability_constants(&self) -> Result<StabilityConstants> {
        let b = self.mixing_bounds();
        let b = MixingBounds::new(b.m_lo, b.m_hi, b.g_lo, b.g_hi)?;
        Ok(StabilityConstants::from_bounds(&b, self.flip_epsilon()))
    }

    /// `(η_k, π_k)` for `k = 0..=n`.
    pub fn ideal_recursion(&self, n: usize) -> Result<Vec<(DiscretePmf, DiscretePmf)>> {
        ideal_recursion(self, n)
    }
}

impl FeynmanKac for DiscreteFkModel {
    type State = usize;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.initial.sample(rng)
    }

    fn initial_density(&self, x: &usize) -> f64 {
        self.initial.prob(*x)
    }

    fn sample_mutation<R: Rng + ?Sized>(&self, k: usize, from: &usize, rng: &mut R) -> usize {
        sample_unnormalised(self.mutation(k).row(*from), 1.0, rng)
    }

    fn mutation_density(&self, k: usize, from: &usize, to: &usize) -> f64 {
        self.mutation(k).get(*from, *to)
    }

    fn potential(&self, k: usize, x: &usize) -> f64 {
        self.potential_vector(k)[*x]
    }

    fn potentials(&self, k: usize, particles: &[usize], out: &mut Vec<f64>) {
        let g = self.potential_vector(k);
        out.clear();
        out.extend(particles.iter().map(|&x| g[x]));
    }

    fn bounds(&self) -> Option<MixingBounds> {
        let b = self.mixing_bounds();
        MixingBounds::new(b.m_lo, b.m_hi, b.g_lo, b.g_hi).ok()
    }

    fn predictive_pmf(&self, k: usize, parents: &[usize], weights: &[f64]) -> Option<DiscretePmf> {
        let mut selected = vec![0.0; self.states];
        for (&x, &w) in parents.iter().zip(weights) {
            selected[x] += w;
        }
        DiscretePmf::new(self.mutation(k).left_apply(&selected)).ok()
    }

    fn state_index(&self, x: &usize) -> Option<usize> {
        Some(*x)
    }

    fn state_from_index(&self, i: usize) -> Option<usize> {
        (i < self.states).then_some(i)
    }
}

/// The two-state model with flip probability `ε` and potentials `(g0, g1)`
/// at every time; `η₀ = Bernoulli(1/2)` unless replaced via
/// [`DiscreteFkModel::with_initial`].
pub fn binary_model(epsilon: f64, g0: f64, g1: f64, horizon: usize) -> Result<DiscreteFkModel> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(SmcError::InvalidModel(format!("flip probability {epsilon} outside (0, 1/2)")));
    }
    if !(g0 > 0.0 && g1 > 0.0 && g0.is_finite() && g1.is_finite()) {
        return Err(SmcError::InvalidModel(format!("potentials ({g0}, {g1}) must be positive")));
    }
    DiscreteFkModel::new(
        DiscretePmf::bernoulli(0.5)?,
        Schedule::constant(StochasticMatrix::binary_flip(epsilon)?),
        Schedule::constant(vec![g0, g1]),
        horizon,
    )
}

/// `Ψ(μ) ∝ g · μ`.
pub fn psi_update(mu: &DiscretePmf, g: &[f64]) -> Result<DiscretePmf> {
    check_dims(mu.len(), g.len())?;
    let weighted: Vec<f64> = mu.probs().iter().zip(g).map(|(m, w)| m * w).collect();
    let total: f64 = weighted.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(SmcError::DegenerateWeights);
    }
    DiscretePmf::new(weighted)
}

/// `Φ(μ) = Ψ(μ) M`.
pub fn phi_step(mu: &DiscretePmf, g: &[f64], m: &StochasticMatrix) -> Result<DiscretePmf> {
    check_dims(mu.len(), m.size())?;
    let selected = psi_update(mu, g)?;
    DiscretePmf::new(m.left_apply(selected.probs()))
}

/// Predictors `η_k = Φ_k(η_{k−1})` and filters `π_k = Ψ_k(η_k)` for
/// `k = 0..=n`.
pub fn ideal_recursion(model: &DiscreteFkModel, n: usize) -> Result<Vec<(DiscretePmf, DiscretePmf)>> {
    if n > model.horizon() {
        return Err(SmcError::Domain(format!("n = {n} beyond horizon {}", model.horizon())));
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut eta = model.initial().clone();
    for k in 0..=n {
        if k > 0 {
            eta = phi_step(&eta, model.potential_vector(k - 1), model.mutation(k))?;
        }
        let pi = psi_update(&eta, model.potential_vector(k))?;
        out.push((eta.clone(), pi));
    }
    Ok(out)
}

/// `Φ_{0,k}(μ)`.
pub fn propagate(model: &DiscreteFkModel, k: usize, mu: &DiscretePmf) -> Result<DiscretePmf> {
    let mut eta = mu.clone();
    for t in 1..=k {
        eta = phi_step(&eta, model.potential_vector(t - 1), model.mutation(t))?;
    }
    Ok(eta)
}

/// `‖Φ_{0,k}(μ) − Φ_{0,k}(ν)‖_TV`; compare with `β^k`.
pub fn ideal_contraction_tv(model: &DiscreteFkModel, k: usize, mu: &DiscretePmf, nu: &DiscretePmf) -> Result<f64> {
    tv_distance(&propagate(model, k, mu)?, &propagate(model, k, nu)?)
}

/// Linear-Gaussian state-space model on the real line:
/// `X_0 ~ N(0, σ₀²)`, `X_k = ρ X_{k−1} + σ ξ_k`, and
/// `G_k(x) = exp(−(y_k − x)² / (2τ²))` for observations `y_k`
/// (steps past the last observation reuse it).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStateSpaceModel {
    pub initial_sd: f64,
    pub rho: f64,
    pub transition_sd: f64,
    pub observation_sd: f64,
    pub observations: Vec<f64>,
}

impl GaussianStateSpaceModel {
    pub fn new(initial_sd: f64, rho: f64, transition_sd: f64, observation_sd: f64, observations: Vec<f64>) -> Result<Self> {
        if !(initial_sd > 0.0 && transition_sd > 0.0 && observation_sd > 0.0) || observations.is_empty() {
            return Err(SmcError::InvalidModel("standard deviations must be positive and observations non-empty".into()));
        }
        Ok(GaussianStateSpaceModel { initial_sd, rho, transition_sd, observation_sd, observations })
    }

    fn observation(&self, k: usize) -> f64 {
        self.observations[k.min(self.observations.len() - 1)]
    }
}

fn normal_density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

impl FeynmanKac for GaussianStateSpaceModel {
    type State = f64;

    fn horizon(&self) -> usize {
        self.observations.len()
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(0.0, self.initial_sd).expect("validated sd").sample(rng)
    }

    fn initial_density(&self, x: &f64) -> f64 {
        normal_density(*x, 0.0, self.initial_sd)
    }

    fn sample_mutation<R: Rng + ?Sized>(&self, _k: usize, from: &f64, rng: &mut R) -> f64 {
        Normal::new(self.rho * from, self.transition_sd).expect("validated sd").sample(rng)
    }

    fn mutation_density(&self, _k: usize, from: &f64, to: &f64) -> f64 {
        normal_density(*to, self.rho * from, self.transition_sd)
    }

    fn potential(&self, k: usize, x: &f64) -> f64 {
        let z = (self.observation(k) - x) / self.observation_sd;
        (-0.5 * z * z).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::tv_distance;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn psi_examples() {
        let mu = DiscretePmf::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(psi_update(&mu, &[2.0, 2.0]).unwrap(), mu);
        let half = DiscretePmf::uniform(2).unwrap();
        let out = psi_update(&half, &[0.1, 1.0]).unwrap();
        assert!(approx(out.prob(0), 1.0 / 11.0, 1e-15));
        assert!(approx(out.prob(1), 10.0 / 11.0, 1e-15));
        let d0 = DiscretePmf::dirac(2, 0).unwrap();
        assert_eq!(psi_update(&d0, &[0.5, 3.0]).unwrap(), d0);
        assert_eq!(psi_update(&d0, &[0.0, 3.0]), Err(SmcError::DegenerateWeights));
    }

    #[test]
    fn phi_examples() {
        let flip = StochasticMatrix::binary_flip(0.1).unwrap();
        let d0 = DiscretePmf::dirac(2, 0).unwrap();
        let out = phi_step(&d0, &[1.0, 1.0], &flip).unwrap();
        assert!(approx(out.prob(0), 0.9, 1e-15) && approx(out.prob(1), 0.1, 1e-15));

        let mu = DiscretePmf::new(vec![0.2, 0.5, 0.3]).unwrap();
        let same = phi_step(&mu, &[4.0; 3], &StochasticMatrix::identity(3)).unwrap();
        for s in 0..3 {
            assert!(approx(same.prob(s), mu.prob(s), 1e-15));
        }

        let half = DiscretePmf::uniform(2).unwrap();
        let out = phi_step(&half, &[0.1, 1.0], &flip).unwrap();
        assert!(approx(out.prob(1), 9.1 / 11.0, 1e-15));
    }

    #[test]
    fn recursion_examples() {
        let model = binary_model(0.1, 1.0, 1.0, 20).unwrap();
        for (eta, pi) in model.ideal_recursion(20).unwrap() {
            assert!(approx(eta.prob(0), 0.5, 1e-15));
            assert_eq!(eta, pi);
        }
        let model = model.with_initial(DiscretePmf::dirac(2, 0).unwrap()).unwrap();
        let rec = model.ideal_recursion(2).unwrap();
        assert!(approx(rec[1].0.prob(0), 0.9, 1e-15));
        assert!(approx(rec[2].0.prob(0), 0.82, 1e-15));
        assert!(approx(rec[2].0.prob(1), 0.18, 1e-15));
        assert!(model.ideal_recursion(21).is_err());
    }

    #[test]
    fn recursion_uses_g_of_previous_step() {
        let model = binary_model(0.1, 0.1, 1.0, 5).unwrap();
        let rec = model.ideal_recursion(1).unwrap();
        assert!(approx(rec[1].0.prob(1), 9.1 / 11.0, 1e-15));
        // π_0 = Ψ_0(η_0)
        assert!(approx(rec[0].1.prob(1), 10.0 / 11.0, 1e-15));
    }

    #[test]
    fn binary_model_construction() {
        let m = binary_model(0.1, 1.0, 1.0, 3).unwrap();
        assert_eq!(m.flip_epsilon(), Some(0.1));
        for i in 0..2 {
            assert!(approx(m.mutation(1).row(i).iter().sum::<f64>(), 1.0, 1e-15));
        }
        let fig = binary_model(0.1, 0.1, 1.0, 3).unwrap();
        assert_eq!(fig.flip_epsilon(), None);
        assert_eq!(fig.potential_vector(7), &[0.1, 1.0]);
        assert!(binary_model(0.5, 1.0, 1.0, 3).is_err());
        assert!(binary_model(0.0, 1.0, 1.0, 3).is_err());
        assert!(binary_model(0.1, 0.0, 1.0, 3).is_err());
        assert!(binary_model(0.1, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(StochasticMatrix::from_rows(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(StochasticMatrix::from_rows(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(StochasticMatrix::from_rows(vec![vec![1.0], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn contraction_examples() {
        let model = binary_model(0.1, 1.0, 1.0, 50).unwrap();
        let d0 = DiscretePmf::dirac(2, 0).unwrap();
        let d1 = DiscretePmf::dirac(2, 1).unwrap();
        assert_eq!(ideal_contraction_tv(&model, 5, &d0, &d0).unwrap(), 0.0);
        assert_eq!(ideal_contraction_tv(&model, 0, &d0, &d1).unwrap(), tv_distance(&d0, &d1).unwrap());
        let tv1 = ideal_contraction_tv(&model, 1, &d0, &d1).unwrap();
        assert!(approx(tv1, 0.8, 1e-15));
        let beta = model.mixing_bounds().beta();
        assert!(approx(beta, 80.0 / 81.0, 1e-15));
        assert!(tv1 <= beta);
    }

    #[test]
    fn constants_for_flip_model() {
        let c = binary_model(0.1, 1.0, 1.0, 3).unwrap().stability_constants().unwrap();
        assert!(approx(c.beta, 80.0 / 81.0, 1e-15));
        assert!(approx(c.eps_easy, 1.0 / 81.0, 1e-15));
        assert!(approx(c.delta_eps.unwrap(), 2.2407, 1e-4));
        assert!(approx(c.delta_eps.unwrap(), 1.0 / (1.0 / 0.64f64).ln(), 1e-14));
        assert!(approx(c.cprime_thm, 4.5 * 9f64.powi(8), 1e-6));
        assert!(approx(c.cprime_thm / 1.94e8, 1.0, 2e-3));
        assert_eq!(c.n_min, 193_710_245.0);
        assert!(approx(c.c_lp2, 1458.0, 1e-9));

        let b = MixingBounds::new(0.5, 0.5, 1.0, 1.0).unwrap();
        let c = StabilityConstants::from_bounds(&b, None);
        assert_eq!(c.beta, 0.0);
        assert!(approx(c.c_thm, 1.0 / std::f64::consts::LN_2, 1e-15));
        assert!(MixingBounds::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn delayed_potential_multiplies_g0_only() {
        let base = binary_model(0.1, 1.0, 1.0, 10).unwrap();
        let corrected = base.with_delayed_potential(&[0.1, 1.0]).unwrap();
        assert_eq!(corrected.potential_vector(0), &[0.1, 1.0]);
        assert_eq!(corrected.potential_vector(1), &[1.0, 1.0]);
        assert_eq!(corrected.flip_epsilon(), None);
    }

    #[test]
    fn predictive_pmf_is_weighted_mixture() {
        let model = binary_model(0.1, 1.0, 1.0, 10).unwrap();
        let pmf = model.predictive_pmf(1, &[0, 1, 1], &[0.5, 0.25, 0.25]).unwrap();
        assert!(approx(pmf.prob(1), 0.5 * 0.1 + 0.5 * 0.9, 1e-15));
    }
}
