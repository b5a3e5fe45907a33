//! Model assembly shared by the command line and the simulation study:
//! basis dimension, starting values, priors and the chain.

use serde::{Deserialize, Serialize};

use crate::bayes_engine::{initial_eta, ols_init, run_mh, OlsFit, PosteriorDraws, PriorSpec, SamplerConfig};
use crate::density_families::{EtaPrior, FamilyKind};
use crate::df_selection::{basis_for, select_df, DfSelection};
use crate::error::Result;
use crate::induced_density::{ModelSpec, TwoSampleData};
use crate::quantile_core::{BasisFamily, LinkFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DfChoice {
    Fixed(usize),
    Auto { max: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelChoice {
    pub family: FamilyKind,
    pub link: LinkFunction,
    pub basis: BasisFamily,
    pub df: DfChoice,
    /// Defaults to the family's reference prior.
    pub eta_prior: Option<EtaPrior>,
}

impl ModelChoice {
    pub fn new(family: FamilyKind, link: LinkFunction, basis: BasisFamily, df: DfChoice) -> Self {
        Self {
            family,
            link,
            basis,
            df,
            eta_prior: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FittedModel {
    /// Model at the starting η.
    pub spec: ModelSpec,
    pub ols: OlsFit,
    pub selection: Option<DfSelection>,
    pub draws: PosteriorDraws,
}

/// Resolves the basis dimension and starting model without sampling.
pub fn prepare(data: &TwoSampleData, choice: &ModelChoice) -> Result<(ModelSpec, OlsFit, Option<DfSelection>)> {
    let (df, selection) = match choice.df {
        DfChoice::Fixed(df) => (df, None),
        DfChoice::Auto { max } => {
            let sel = select_df(data, choice.family, choice.link, choice.basis, max)?;
            (sel.chosen, Some(sel))
        }
    };
    let basis = basis_for(data, choice.basis, df)?;
    let ols = ols_init(data, choice.link, &basis)?;
    let spec = ModelSpec::new(initial_eta(choice.family, data.y1())?, choice.link, basis)?;
    Ok((spec, ols, selection))
}

pub fn fit_model(data: &TwoSampleData, choice: &ModelChoice, config: &SamplerConfig) -> Result<FittedModel> {
    let (spec, ols, selection) = prepare(data, choice)?;
    let eta_prior = choice
        .eta_prior
        .clone()
        .unwrap_or_else(|| EtaPrior::default_for(choice.family));
    let priors = PriorSpec::new(ols.beta_hat.clone(), eta_prior);
    let draws = run_mh(&spec, data, &priors, config)?;
    Ok(FittedModel {
        spec,
        ols,
        selection,
        draws,
    })
}
