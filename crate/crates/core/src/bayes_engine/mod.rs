//! Priors, OLS initialization, the blocked Metropolis–Hastings sampler and
//! chain diagnostics.

mod diagnostics;
mod ols;
mod proposal;
mod sampler;

pub use diagnostics::{diagnostics, CoordinateSummary, Diagnostics, MIN_DRAWS};
pub use ols::{ols_init, plotting_position_quantile, quantile_pairs, OlsFit};
pub use proposal::{DirichletStep, MultivariateT, RandomWalk};
pub use sampler::{
    accept, chain_rng, initial_eta, log_acceptance_ratio, run_chain, run_mh, AcceptanceRecord, ChainSetup,
    FlatLikelihood, InducedLikelihood, Likelihood, PosteriorDraws, PriorSpec, SamplerConfig,
    DEFAULT_BETA_VARIANCE, DIRICHLET_FLOOR,
};
