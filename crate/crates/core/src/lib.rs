//! Sequential Monte Carlo on Feynman–Kac models, with exact finite-state
//! oracles for filter forgetting and propagation of chaos.
//!
//! * [`fkmodel`]: models `(η₀, M_k, G_k)`, the finite-state specialisation
//!   and stability constants.
//! * [`smc`]: particle filter and conditional particle filter.
//! * [`coupling`]: maximal couplings and coupled particle filters.
//! * [`exact`]: count-chain oracles for two-state models.
//! * [`oos`]: retrospective processing of delayed measurements.
//! * [`measures`], [`inequalities`], [`stats`], [`rng`]: supporting pieces.

pub mod coupling;
pub mod error;
pub mod exact;
pub mod fkmodel;
pub mod inequalities;
pub mod measures;
pub mod oos;
pub mod rng;
pub mod smc;
pub mod stats;

pub use coupling::{
    cond_max_couple, coupled_step_individual, coupled_step_state, coupling_time, CoupledFilterPair, CouplingOutcome,
    PredictiveLaw, Scheme, StepKind,
};
pub use error::{Result, SmcError};
pub use exact::{
    count_transition_row, evolve_counts, exact_forgetting_tv, exact_moments, exact_poc_tv, monotone_bound_check,
    verify_small_n_bound, CountChainDistribution, CountMoments,
};
pub use fkmodel::{
    binary_model, DiscreteFkModel, FeynmanKac, GaussianStateSpaceModel, MixingBounds, Schedule, StabilityConstants,
    StochasticMatrix,
};
pub use measures::{hellinger_sq, max_couple_discrete, tv_distance, DiscretePmf};
pub use oos::{coupling_diagnostic, process_oos, CouplingDiagnostic, DelayedMeasurementScenario, OosOutcome, OosRecord};
pub use rng::{replicate_seed, replicate_stream, RandomStream};
pub use smc::{cpf_step, pf_step, run_cpf, run_pf, Categorical, ParticleSystem, ReferencePath};
