use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::proposal::{DirichletStep, MultivariateT, RandomWalk};
use super::ols::{ols_init, OlsFit};
use crate::density_families::{fit_mle, CaseDensity, EtaPrior, FamilyKind};
use crate::error::{Error, Result};
use crate::induced_density::{ConstraintAudit, ModelSpec, TwoSampleData};

pub const DEFAULT_BETA_VARIANCE: f64 = 100.0;
/// Additive Dirichlet parameter keeping proposals off the simplex boundary.
pub const DIRICHLET_FLOOR: f64 = 0.05;
/// Smallest initial mixture weight; EM can drive weights to exact zero.
const INITIAL_WEIGHT_FLOOR: f64 = 1e-8;

/// Independent priors: β ~ N(mean, σ²I) and η ~ `eta_prior`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub beta_mean: Vec<f64>,
    pub beta_variance_scale: f64,
    pub eta_prior: EtaPrior,
}

impl PriorSpec {
    pub fn new(beta_mean: Vec<f64>, eta_prior: EtaPrior) -> Self {
        Self {
            beta_mean,
            beta_variance_scale: DEFAULT_BETA_VARIANCE,
            eta_prior,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_variance_scale > 0.0 && self.beta_variance_scale.is_finite()) {
            return Err(Error::input("beta prior variance must be positive"));
        }
        self.eta_prior.validate()
    }

    pub fn ln_beta(&self, beta: &[f64]) -> f64 {
        let ss: f64 = beta
            .iter()
            .zip(&self.beta_mean)
            .map(|(b, m)| (b - m).powi(2))
            .sum();
        -0.5 * ss / self.beta_variance_scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Post-burn-in iterations.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Degrees of freedom of the multivariate-t β proposal.
    pub proposal_df: f64,
    /// Concentration of the Dirichlet proposal for mixture weights.
    pub dirichlet_concentration: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 5_000,
            thin: 1,
            proposal_df: 3.0,
            dirichlet_concentration: 50.0,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::input("iterations must be positive"));
        }
        if self.thin == 0 {
            return Err(Error::input("thinning stride must be at least 1"));
        }
        if !(self.proposal_df > 0.0) {
            return Err(Error::input("proposal degrees of freedom must be positive"));
        }
        if !(self.dirichlet_concentration > 0.0) {
            return Err(Error::input("Dirichlet concentration must be positive"));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.iterations.div_ceil(self.thin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRecord {
    pub block: String,
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptanceRecord {
    fn new(block: &str) -> Self {
        Self {
            block: block.into(),
            proposed: 0,
            accepted: 0,
        }
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
    }
}

/// Retained draws, one row per retained iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub beta_names: Vec<String>,
    pub eta_names: Vec<String>,
    pub beta: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub acceptance: Vec<AcceptanceRecord>,
    pub initial_beta: Vec<f64>,
    pub config: SamplerConfig,
    pub warnings: Vec<String>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn beta_column(&self, j: usize) -> Vec<f64> {
        self.beta.iter().map(|r| r[j]).collect()
    }

    pub fn eta_column(&self, j: usize) -> Vec<f64> {
        self.eta.iter().map(|r| r[j]).collect()
    }

    pub fn beta_mean(&self) -> Vec<f64> {
        let m = self.len() as f64;
        let k = self.beta_names.len();
        (0..k).map(|j| self.beta.iter().map(|r| r[j]).sum::<f64>() / m).collect()
    }

    /// The case density of retained draw `m`.
    pub fn eta_at(&self, kind: FamilyKind, m: usize) -> Result<CaseDensity> {
        CaseDensity::from_params(kind, &self.eta[m])
    }

    /// Every `stride`-th row, as in-loop thinning would have kept.
    pub fn thinned(&self, stride: usize) -> Self {
        let pick = |rows: &Vec<Vec<f64>>| rows.iter().step_by(stride).cloned().collect();
        let mut out = self.clone();
        out.beta = pick(&self.beta);
        out.eta = pick(&self.eta);
        out.config.thin = self.config.thin * stride;
        out
    }
}

/// Likelihood used by the sampler, split so the case part can be cached
/// during β updates.
pub trait Likelihood: Sync {
    fn cases(&self, spec: &ModelSpec, y1: &[f64]) -> f64;
    fn controls(&self, spec: &ModelSpec, audit: &ConstraintAudit, beta: &[f64], y2: &[f64]) -> f64;
}

/// The induced two-sample likelihood.
#[derive(Clone, Copy, Debug, Default)]
pub struct InducedLikelihood;

impl Likelihood for InducedLikelihood {
    fn cases(&self, spec: &ModelSpec, y1: &[f64]) -> f64 {
        spec.log_likelihood_cases(y1)
    }

    fn controls(&self, spec: &ModelSpec, audit: &ConstraintAudit, beta: &[f64], y2: &[f64]) -> f64 {
        spec.log_likelihood_controls(audit, beta, y2)
    }
}

/// A constant likelihood; the chain then targets the prior.
#[derive(Clone, Copy, Debug, Default)]
pub struct FlatLikelihood;

impl Likelihood for FlatLikelihood {
    fn cases(&self, _: &ModelSpec, _: &[f64]) -> f64 {
        0.0
    }

    fn controls(&self, _: &ModelSpec, _: &ConstraintAudit, _: &[f64], _: &[f64]) -> f64 {
        0.0
    }
}

/// ln of the Metropolis–Hastings ratio for moving from the current state to
/// a proposal, with `ln_q_*` the proposal log densities of each state.
pub fn log_acceptance_ratio(
    current_target: f64,
    proposed_target: f64,
    ln_q_current: f64,
    ln_q_proposed: f64,
) -> f64 {
    if proposed_target == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if current_target == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    (proposed_target - current_target) + (ln_q_current - ln_q_proposed)
}

/// Accepts when ln u < ratio; a ratio of at least zero always accepts.
pub fn accept(log_ratio: f64, u: f64) -> bool {
    log_ratio >= 0.0 || (log_ratio > f64::NEG_INFINITY && u.ln() < log_ratio)
}

/// Coordinates in which the η random walk operates: logs of positive
/// parameters, the log-normal location left as is. Mixture weights are
/// handled by a separate Dirichlet move.
fn to_free(eta: &CaseDensity) -> Vec<f64> {
    match eta {
        CaseDensity::Uniform { theta } => vec![theta.ln()],
        CaseDensity::LogNormal { mu, sigma } => vec![*mu, sigma.ln()],
        CaseDensity::Pareto { shape, scale } => vec![shape.ln(), scale.ln()],
        CaseDensity::Gamma { shape, rate } => vec![shape.ln(), rate.ln()],
        CaseDensity::GammaScaleMixture { rate, .. } => vec![rate.ln()],
    }
}

fn from_free(current: &CaseDensity, u: &[f64]) -> Result<CaseDensity> {
    match current {
        CaseDensity::Uniform { .. } => CaseDensity::uniform(u[0].exp()),
        CaseDensity::LogNormal { .. } => CaseDensity::log_normal(u[0], u[1].exp()),
        CaseDensity::Pareto { .. } => CaseDensity::pareto(u[0].exp(), u[1].exp()),
        CaseDensity::Gamma { .. } => CaseDensity::gamma(u[0].exp(), u[1].exp()),
        CaseDensity::GammaScaleMixture { weights, .. } => CaseDensity::gsm(weights.clone(), u[0].exp()),
    }
}

/// ln |∂η/∂u| for the free coordinates.
fn ln_jacobian(eta: &CaseDensity, u: &[f64]) -> f64 {
    match eta {
        CaseDensity::LogNormal { .. } => u[1],
        _ => u.iter().sum(),
    }
}

/// Random-walk covariance from the curvature of the case-sample
/// log-likelihood at η̂, shrunk by n₁/(n₁+n₂) for the information the
/// control sample adds and scaled by 2.4²/d.
fn eta_walk_covariance(eta: &CaseDensity, y1: &[f64], n2: usize) -> Vec<Vec<f64>> {
    let u0 = to_free(eta);
    let d = u0.len();
    let n1 = y1.len() as f64;
    let shrink = n1 / (n1 + n2 as f64) * 2.4 * 2.4 / d as f64;
    let fallback = |sd: f64| -> Vec<Vec<f64>> {
        (0..d)
            .map(|i| (0..d).map(|j| if i == j { sd * sd * shrink } else { 0.0 }).collect())
            .collect()
    };
    if let CaseDensity::Uniform { .. } = eta {
        // log θ − log max(y₁) is roughly exponential with rate n₁
        return fallback(1.0 / n1);
    }
    let ll = |u: &[f64]| -> f64 {
        match from_free(eta, u) {
            Ok(f) => y1.iter().map(|&y| f.ln_pdf(y)).sum(),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let h = 1e-4;
    let mut hess = nalgebra::DMatrix::<f64>::zeros(d, d);
    let at = |di: &[(usize, f64)]| {
        let mut u = u0.clone();
        for &(i, s) in di {
            u[i] += s;
        }
        ll(&u)
    };
    let f0 = ll(&u0);
    for i in 0..d {
        hess[(i, i)] = (at(&[(i, h)]) - 2.0 * f0 + at(&[(i, -h)])) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                + at(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let neg = -hess;
    match neg.clone().cholesky() {
        Some(c) if neg.iter().all(|v| v.is_finite()) => {
            let inv = c.inverse() * shrink;
            (0..d).map(|i| (0..d).map(|j| inv[(i, j)]).collect()).collect()
        }
        _ => fallback(0.05),
    }
}

/// Starting η: the case-sample maximum-likelihood fit, with mixture weights
/// kept strictly inside the simplex.
pub fn initial_eta(kind: FamilyKind, y1: &[f64]) -> Result<CaseDensity> {
    let fit = fit_mle(kind, y1)?;
    Ok(match fit {
        CaseDensity::GammaScaleMixture { weights, rate } => {
            let floored: Vec<f64> = weights.iter().map(|w| w.max(INITIAL_WEIGHT_FLOOR)).collect();
            let total: f64 = floored.iter().sum();
            CaseDensity::gsm(floored.into_iter().map(|w| w / total).collect(), rate)?
        }
        other => other,
    })
}

/// Seeded generator for chain `stream` under a master seed.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Starting point and β proposal for a chain.
#[derive(Clone, Debug)]
pub struct ChainSetup {
    pub initial_beta: Vec<f64>,
    pub proposal: MultivariateT,
}

impl ChainSetup {
    pub fn from_ols(fit: &OlsFit, proposal_df: f64) -> Result<Self> {
        Ok(Self {
            initial_beta: fit.beta_hat.clone(),
            proposal: MultivariateT::new(fit.beta_hat.clone(), &fit.proposal_scale, proposal_df)?,
        })
    }
}

/// Blocked Metropolis–Hastings: an independence multivariate-t move for β
/// and random-walk (plus Dirichlet, for mixtures) moves for η. `spec.f1`
/// is the starting η; β starts at the OLS estimate.
pub fn run_mh(
    spec: &ModelSpec,
    data: &TwoSampleData,
    priors: &PriorSpec,
    config: &SamplerConfig,
) -> Result<PosteriorDraws> {
    config.validate()?;
    let fit = ols_init(data, spec.link, &spec.basis)?;
    let setup = ChainSetup::from_ols(&fit, config.proposal_df)?;
    run_chain(spec, data, priors, config, &setup, &InducedLikelihood, &mut chain_rng(config.seed, 0))
}

struct EtaState {
    spec: ModelSpec,
    audit: ConstraintAudit,
    cases: f64,
    ln_prior: f64,
}

impl EtaState {
    fn new(
        base: &ModelSpec,
        eta: CaseDensity,
        y1: &[f64],
        priors: &PriorSpec,
        lik: &dyn Likelihood,
    ) -> Option<Self> {
        let ln_prior = priors.eta_prior.ln_density(&eta);
        if ln_prior == f64::NEG_INFINITY {
            return None;
        }
        let audit = ConstraintAudit::new(&eta).ok()?;
        let spec = base.with_f1(eta);
        let cases = lik.cases(&spec, y1);
        if !(cases > f64::NEG_INFINITY) {
            return None;
        }
        Some(Self {
            spec,
            audit,
            cases,
            ln_prior,
        })
    }
}

/// The sampler with an explicit starting point, proposal, likelihood and
/// generator.
pub fn run_chain<R: Rng>(
    spec: &ModelSpec,
    data: &TwoSampleData,
    priors: &PriorSpec,
    config: &SamplerConfig,
    setup: &ChainSetup,
    lik: &dyn Likelihood,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    config.validate()?;
    priors.validate()?;
    let k = spec.basis.ncols();
    if setup.initial_beta.len() != k || setup.proposal.dim() != k || priors.beta_mean.len() != k {
        return Err(Error::input("β dimension mismatch between basis, prior and proposal"));
    }
    if priors.eta_prior.kind() != spec.f1.kind() {
        return Err(Error::input("η prior family differs from the case density family"));
    }
    let (y1, y2) = (data.y1(), data.y2());

    let mut eta_state = EtaState::new(spec, spec.f1.clone(), y1, priors, lik).ok_or_else(|| {
        Error::Infeasible("initial case-density parameters have zero prior or likelihood".into())
    })?;
    let mut beta = setup.initial_beta.clone();
    let mut controls = lik.controls(&eta_state.spec, &eta_state.audit, &beta, y2);
    if controls == f64::NEG_INFINITY {
        return Err(Error::Infeasible(
            "the initial coefficients violate the density constraint or leave a control observation \
             outside the implied support"
                .into(),
        ));
    }
    let mut ln_prior_beta = priors.ln_beta(&beta);
    let mut ln_q_beta = setup.proposal.ln_density(&beta);

    let walk = RandomWalk::new(&eta_walk_covariance(&eta_state.spec.f1, y1, y2.len()))?;
    let is_mixture = matches!(spec.f1, CaseDensity::GammaScaleMixture { .. });
    let dirichlet = DirichletStep {
        concentration: config.dirichlet_concentration,
        floor: DIRICHLET_FLOOR,
    };

    let mut acc_beta = AcceptanceRecord::new("beta");
    let mut acc_eta = AcceptanceRecord::new(if is_mixture { "eta:rate" } else { "eta" });
    let mut acc_weights = AcceptanceRecord::new("eta:weights");

    let retained = config.retained();
    let mut beta_rows = Vec::with_capacity(retained);
    let mut eta_rows = Vec::with_capacity(retained);
    let total = config.burn_in + config.iterations;

    for it in 0..total {
        // β block, η fixed
        let prop = setup.proposal.sample(rng);
        let u: f64 = rng.random();
        let prop_prior = priors.ln_beta(&prop);
        let prop_controls = lik.controls(&eta_state.spec, &eta_state.audit, &prop, y2);
        let prop_q = setup.proposal.ln_density(&prop);
        let ratio = log_acceptance_ratio(
            controls + ln_prior_beta,
            prop_controls + prop_prior,
            ln_q_beta,
            prop_q,
        );
        let ok = accept(ratio, u);
        acc_beta.record(ok);
        if ok {
            beta = prop;
            controls = prop_controls;
            ln_prior_beta = prop_prior;
            ln_q_beta = prop_q;
        }

        // η random walk, β fixed
        let u_cur = to_free(&eta_state.spec.f1);
        let u_prop = walk.step(&u_cur, rng);
        let u: f64 = rng.random();
        let mut ok = false;
        if let Ok(eta_prop) = from_free(&eta_state.spec.f1, &u_prop) {
            if let Some(cand) = EtaState::new(spec, eta_prop, y1, priors, lik) {
                let cand_controls = lik.controls(&cand.spec, &cand.audit, &beta, y2);
                let cur = eta_state.cases + controls + eta_state.ln_prior + ln_jacobian(&eta_state.spec.f1, &u_cur);
                let new = cand.cases + cand_controls + cand.ln_prior + ln_jacobian(&cand.spec.f1, &u_prop);
                if accept(log_acceptance_ratio(cur, new, 0.0, 0.0), u) {
                    eta_state = cand;
                    controls = cand_controls;
                    ok = true;
                }
            }
        }
        acc_eta.record(ok);

        // mixture weights, Dirichlet centred at the current weights
        if let CaseDensity::GammaScaleMixture { weights, rate } = &eta_state.spec.f1 {
            let (weights, rate) = (weights.clone(), *rate);
            let w_prop = dirichlet.sample(&weights, rng);
            let u: f64 = rng.random();
            let mut ok = false;
            if let Ok(eta_prop) = CaseDensity::gsm(w_prop.clone(), rate) {
                if let Some(cand) = EtaState::new(spec, eta_prop, y1, priors, lik) {
                    let cand_controls = lik.controls(&cand.spec, &cand.audit, &beta, y2);
                    let ratio = log_acceptance_ratio(
                        eta_state.cases + controls + eta_state.ln_prior,
                        cand.cases + cand_controls + cand.ln_prior,
                        dirichlet.ln_density(&weights, &w_prop),
                        dirichlet.ln_density(&w_prop, &weights),
                    );
                    if accept(ratio, u) {
                        eta_state = cand;
                        controls = cand_controls;
                        ok = true;
                    }
                }
            }
            acc_weights.record(ok);
        }

        if it >= config.burn_in && (it - config.burn_in) % config.thin == 0 {
            beta_rows.push(beta.clone());
            eta_rows.push(eta_state.spec.f1.params());
        }
    }

    let mut warnings = Vec::new();
    if acc_beta.accepted == 0 {
        warnings.push(format!(
            "degenerate chain: none of {} coefficient proposals was accepted",
            acc_beta.proposed
        ));
    }
    let mut acceptance = vec![acc_beta, acc_eta];
    if is_mixture {
        acceptance.push(acc_weights);
    }
    Ok(PosteriorDraws {
        beta_names: (0..k).map(|j| format!("beta{j}")).collect(),
        eta_names: spec.f1.param_names(),
        beta: beta_rows,
        eta: eta_rows,
        acceptance,
        initial_beta: setup.initial_beta.clone(),
        config: config.clone(),
        warnings,
    })
}
