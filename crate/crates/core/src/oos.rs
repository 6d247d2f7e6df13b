//! Retrospective processing of a delayed measurement with coupled filters.
//!
//! A filter has been run on the *base* model, whose time-0 potential
//! ignores a measurement that only arrives at step `k+1`. The *corrected*
//! model includes it. Instead of re-running from scratch, the corrected
//! particle system is rebuilt step by step, each vector `X⃗_t` drawn
//! conditionally on the stored `X̃⃗_t` from a maximal coupling of the two
//! predictive laws. Once `X⃗_σ = X̃⃗_σ` the two filters share all later
//! dynamics, so the stored suffix is already a valid corrected run.

use rand::Rng;

use crate::coupling::{cond_couple_individual, cond_couple_state, PredictiveLaw, Scheme, StepKind};
use crate::error::{Result, SmcError};
use crate::fkmodel::{psi_update, DiscreteFkModel, FeynmanKac};
use crate::measures::tv_distance;
use crate::smc::{initialise, pf_step, ParticleSystem};
use crate::stats::quantile_sorted;

/// A stored base-model run and the model that should have produced it.
#[derive(Debug, Clone)]
pub struct DelayedMeasurementScenario<B, C>
where
    B: FeynmanKac,
{
    base: B,
    corrected: C,
    stored: Vec<ParticleSystem<B::State>>,
}

impl<B, C> DelayedMeasurementScenario<B, C>
where
    B: FeynmanKac,
    C: FeynmanKac<State = B::State>,
{
    /// `stored` holds `X̃⃗_0, …, X̃⃗_{k+1}`; the measurement arrives at
    /// `stored.len() − 1`. Both models must agree on everything except the
    /// time-0 potential, which the caller is responsible for.
    pub fn new(base: B, corrected: C, stored: Vec<ParticleSystem<B::State>>) -> Result<Self> {
        if stored.len() < 2 {
            return Err(SmcError::Domain("stored trajectory must reach at least time 1".into()));
        }
        let n = stored[0].len();
        for (t, s) in stored.iter().enumerate() {
            if s.time != t {
                return Err(SmcError::Domain(format!("stored system {t} has time index {}", s.time)));
            }
            if s.len() != n {
                return Err(SmcError::Dimension { expected: n, found: s.len() });
            }
        }
        let arrival = stored.len() - 1;
        if arrival > base.horizon().min(corrected.horizon()) {
            return Err(SmcError::Domain(format!("arrival step {arrival} beyond model horizon")));
        }
        Ok(DelayedMeasurementScenario { base, corrected, stored })
    }

    /// Runs the base filter from scratch for `arrival` steps and stores it.
    pub fn simulate<R: Rng + ?Sized>(base: B, corrected: C, n: usize, arrival: usize, rng: &mut R) -> Result<Self> {
        if arrival == 0 {
            return Err(SmcError::Domain("arrival step must be at least 1".into()));
        }
        let mut stored = Vec::with_capacity(arrival + 1);
        stored.push(initialise(&base, n, rng)?);
        for _ in 0..arrival {
            let next = pf_step(stored.last().expect("nonempty"), &base, rng)?;
            stored.push(next);
        }
        Self::new(base, corrected, stored)
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn corrected(&self) -> &C {
        &self.corrected
    }

    pub fn stored(&self) -> &[ParticleSystem<B::State>] {
        &self.stored
    }

    /// Step `k+1` at which the late measurement becomes available.
    pub fn arrival(&self) -> usize {
        self.stored.len() - 1
    }

    pub fn n_particles(&self) -> usize {
        self.stored[0].len()
    }
}

impl<C> DelayedMeasurementScenario<DiscreteFkModel, C> {
    /// Base model with a constant-one time-0 potential and a stored run.
    pub fn discrete<R: Rng + ?Sized>(
        base: &DiscreteFkModel,
        likelihood: &[f64],
        n: usize,
        arrival: usize,
        rng: &mut R,
    ) -> Result<DelayedMeasurementScenario<DiscreteFkModel, DiscreteFkModel>> {
        let base = base.clone().with_potential_at(0, vec![1.0; base.states()])?;
        let corrected = base.with_delayed_potential(likelihood)?;
        DelayedMeasurementScenario::simulate(base, corrected, n, arrival, rng)
    }
}

/// Result of retrospective processing.
#[derive(Debug, Clone, PartialEq)]
pub struct OosOutcome<S> {
    /// Corrected systems `X⃗_0, …, X⃗_t`, ending at `σ` when coupled and at
    /// the arrival step otherwise.
    pub trajectory: Vec<ParticleSystem<S>>,
    pub sigma: Option<usize>,
    pub coupled: bool,
}

impl<S: Clone> OosOutcome<S> {
    /// The corrected system at the arrival step, taken from the stored run
    /// when the filters coupled before it.
    pub fn system_at_arrival(&self, stored: &[ParticleSystem<S>]) -> ParticleSystem<S> {
        if self.coupled {
            stored.last().expect("nonempty").clone()
        } else {
            self.trajectory.last().expect("nonempty").clone()
        }
    }
}

/// Rebuilds the corrected filter conditionally on the stored run until the
/// two coincide or the arrival step is reached.
pub fn process_oos<B, C, R>(
    scenario: &DelayedMeasurementScenario<B, C>,
    scheme: Scheme,
    rng: &mut R,
) -> Result<OosOutcome<B::State>>
where
    B: FeynmanKac,
    C: FeynmanKac<State = B::State>,
    R: Rng + ?Sized,
{
    let stored = &scenario.stored;
    let mut trajectory = vec![stored[0].clone()];
    for t in 1..=scenario.arrival() {
        let prev = trajectory.last().expect("nonempty");
        let law_tilde = PredictiveLaw::new(&scenario.base, &stored[t - 1])?;
        let law = PredictiveLaw::new(&scenario.corrected, prev)?;
        let given = &stored[t].particles;
        let particles = match scheme.kind_at(t - 1) {
            StepKind::State => cond_couple_state(given, &law_tilde, &law, rng)?,
            StepKind::Individual => cond_couple_individual(given, &law_tilde, &law, rng)?,
        };
        let equal = particles == *given;
        trajectory.push(ParticleSystem { particles, time: t });
        if equal {
            return Ok(OosOutcome { trajectory, sigma: Some(t), coupled: true });
        }
    }
    Ok(OosOutcome { trajectory, sigma: None, coupled: false })
}

/// `TV(Ψ_{G₀′}(η₀), η₀)`: how much the late measurement moves the initial
/// law.
pub fn likelihood_informativeness(model: &DiscreteFkModel, likelihood: &[f64]) -> Result<f64> {
    tv_distance(&psi_update(model.initial(), likelihood)?, model.initial())
}

/// One processed scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OosRecord {
    pub n_particles: usize,
    pub arrival: usize,
    pub sigma: Option<usize>,
}

/// Summary of the records sharing `(N, arrival)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OosSummary {
    pub n_particles: usize,
    pub arrival: usize,
    pub replicates: usize,
    /// `None` when at least half the runs did not couple.
    pub median_sigma: Option<f64>,
    pub coupled_fraction: f64,
    /// `histogram[s − 1]` counts `σ = s` for `s = 1..=arrival`; every bin is
    /// present, including empty ones.
    pub histogram: Vec<u64>,
    pub uncoupled: u64,
}

/// Per-`N` diagnostics over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingDiagnostic {
    pub summaries: Vec<OosSummary>,
    /// `(N, d)`: the smallest delay `d` at which at least 99% of the runs
    /// that could have coupled by `d` did so; `None` if no delay qualifies.
    pub safe_delay: Vec<(usize, Option<usize>)>,
}

/// Target coupling frequency for the suggested safe delay.
pub const SAFE_DELAY_FREQUENCY: f64 = 0.99;

/// Aggregates processed scenarios by `(N, arrival)`, in increasing order.
pub fn coupling_diagnostic(records: &[OosRecord]) -> Result<CouplingDiagnostic> {
    if records.is_empty() {
        return Err(SmcError::Domain("empty batch".into()));
    }
    let mut keys: Vec<(usize, usize)> = records.iter().map(|r| (r.n_particles, r.arrival)).collect();
    keys.sort_unstable();
    keys.dedup();

    let summaries = keys
        .iter()
        .map(|&(n, arrival)| {
            let group: Vec<&OosRecord> =
                records.iter().filter(|r| r.n_particles == n && r.arrival == arrival).collect();
            let mut histogram = vec![0u64; arrival];
            let mut uncoupled = 0u64;
            // Uncoupled runs sort last as +∞.
            let mut sigmas: Vec<f64> = Vec::with_capacity(group.len());
            for r in &group {
                match r.sigma {
                    Some(s) if (1..=arrival).contains(&s) => {
                        histogram[s - 1] += 1;
                        sigmas.push(s as f64);
                    }
                    _ => {
                        uncoupled += 1;
                        sigmas.push(f64::INFINITY);
                    }
                }
            }
            sigmas.sort_by(f64::total_cmp);
            let med = quantile_sorted(&sigmas, 0.5);
            OosSummary {
                n_particles: n,
                arrival,
                replicates: group.len(),
                median_sigma: med.is_finite().then_some(med),
                coupled_fraction: (group.len() as u64 - uncoupled) as f64 / group.len() as f64,
                histogram,
                uncoupled,
            }
        })
        .collect();

    let mut ns: Vec<usize> = keys.iter().map(|k| k.0).collect();
    ns.dedup();
    let safe_delay = ns
        .into_iter()
        .map(|n| {
            let group: Vec<&OosRecord> = records.iter().filter(|r| r.n_particles == n).collect();
            let max_arrival = group.iter().map(|r| r.arrival).max().unwrap_or(0);
            let d = (1..=max_arrival).find(|&d| {
                let eligible: Vec<_> = group.iter().filter(|r| r.arrival >= d).collect();
                let hits = eligible.iter().filter(|r| r.sigma.is_some_and(|s| s <= d)).count();
                !eligible.is_empty() && hits as f64 >= SAFE_DELAY_FREQUENCY * eligible.len() as f64
            });
            (n, d)
        })
        .collect();
    Ok(CouplingDiagnostic { summaries, safe_delay })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fkmodel::binary_model;
    use crate::rng::stream_from_seed;

    type Scenario = DelayedMeasurementScenario<DiscreteFkModel, DiscreteFkModel>;

    fn scenario(likelihood: &[f64], n: usize, arrival: usize, seed: u64) -> Scenario {
        let base = binary_model(0.1, 1.0, 1.0, 64).unwrap();
        let mut rng = stream_from_seed(seed);
        Scenario::discrete(&base, likelihood, n, arrival, &mut rng).unwrap()
    }

    #[test]
    fn uninformative_measurement_couples_at_one() {
        for scheme in [Scheme::State, Scheme::Individual, Scheme::Alternating { state_first: true }] {
            for seed in 0..20 {
                let s = scenario(&[0.7, 0.7], 16, 5, seed);
                let mut rng = stream_from_seed(100 + seed);
                let out = process_oos(&s, scheme, &mut rng).unwrap();
                assert_eq!(out.sigma, Some(1));
                assert!(out.coupled);
                assert_eq!(out.trajectory.len(), 2);
                assert_eq!(out.system_at_arrival(s.stored()), *s.stored().last().unwrap());
            }
        }
    }

    #[test]
    fn extreme_measurement_with_short_delay_does_not_couple() {
        let s = scenario(&[1e-6, 1.0], 64, 1, 3);
        let mut rng = stream_from_seed(4);
        let out = process_oos(&s, Scheme::State, &mut rng).unwrap();
        assert!(!out.coupled);
        assert_eq!(out.sigma, None);
        assert_eq!(out.trajectory.len(), 2);
        assert_eq!(out.system_at_arrival(s.stored()), out.trajectory[1]);
    }

    #[test]
    fn scenario_validation() {
        let base = binary_model(0.1, 1.0, 1.0, 4).unwrap();
        let mut rng = stream_from_seed(5);
        assert!(Scenario::discrete(&base, &[0.5, 1.0], 8, 0, &mut rng).is_err());
        assert!(Scenario::discrete(&base, &[0.5, 1.0], 8, 5, &mut rng).is_err());
        assert!(Scenario::discrete(&base, &[0.5, 1.0, 2.0], 8, 2, &mut rng).is_err());
        assert!(Scenario::discrete(&base, &[0.0, 1.0], 8, 2, &mut rng).is_err());
        let s = Scenario::discrete(&base, &[0.5, 1.0], 8, 3, &mut rng).unwrap();
        assert_eq!((s.arrival(), s.n_particles()), (3, 8));
        assert_eq!(s.corrected().potential_vector(0), &[0.5, 1.0]);
        assert_eq!(s.base().potential_vector(0), &[1.0, 1.0]);
    }

    #[test]
    fn informativeness() {
        let m = binary_model(0.1, 1.0, 1.0, 4).unwrap();
        assert_eq!(likelihood_informativeness(&m, &[2.0, 2.0]).unwrap(), 0.0);
        let v = likelihood_informativeness(&m, &[0.1, 1.0]).unwrap();
        assert!((v - (10.0 / 11.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn diagnostic_summaries() {
        let rec = |n, arrival, sigma| OosRecord { n_particles: n, arrival, sigma };
        let records = vec![
            rec(8, 3, Some(1)),
            rec(8, 3, Some(1)),
            rec(8, 3, Some(3)),
            rec(8, 3, None),
            rec(16, 2, Some(2)),
            rec(16, 2, None),
            rec(16, 2, None),
        ];
        let d = coupling_diagnostic(&records).unwrap();
        assert_eq!(d.summaries.len(), 2);
        let a = &d.summaries[0];
        assert_eq!((a.n_particles, a.arrival, a.replicates), (8, 3, 4));
        assert_eq!(a.histogram, vec![2, 0, 1]);
        assert_eq!(a.uncoupled, 1);
        assert_eq!(a.median_sigma, Some(2.0));
        assert_eq!(a.coupled_fraction, 0.75);
        let b = &d.summaries[1];
        assert_eq!(b.median_sigma, None);
        assert_eq!(b.histogram, vec![0, 1]);
        assert_eq!(d.safe_delay, vec![(8, None), (16, None)]);

        let all_one: Vec<_> = (0..10).map(|_| rec(4, 2, Some(1))).collect();
        let d = coupling_diagnostic(&all_one).unwrap();
        assert_eq!(d.summaries[0].coupled_fraction, 1.0);
        assert_eq!(d.summaries[0].histogram, vec![10, 0]);
        assert_eq!(d.safe_delay, vec![(4, Some(1))]);
        assert!(coupling_diagnostic(&[]).is_err());
    }
}
