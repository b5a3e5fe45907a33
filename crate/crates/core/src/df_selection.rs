//! Choice of the basis dimension λ by an empirical L1 discrepancy between
//! the model-implied control density and a kernel estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes_engine::{initial_eta, ols_init};
use crate::density_families::{FamilyKind, KernelDensityEstimate};
use crate::error::{Error, Result};
use crate::induced_density::{ConstraintAudit, ModelSpec, TwoSampleData};
use crate::quantile_core::{BasisFamily, LinkFunction, SmootherBasis};

pub const DEFAULT_DF_MAX: usize = 10;

/// The basis used for a two-sample fit; spline boundary knots sit at the
/// outermost plotting positions of the smaller sample.
pub fn basis_for(data: &TwoSampleData, family: BasisFamily, df: usize) -> Result<SmootherBasis> {
    SmootherBasis::for_sample(family, df, data.n1().min(data.n2()))
}

/// Σⱼ |f₂(Q₂(pⱼ)) − reference(yⱼ)| over the solved percentiles of `y2`;
/// `reference[j]` is the comparison density at `y2[j]`. Infeasible β gives
/// +∞.
pub fn l1_discrepancy(spec: &ModelSpec, beta: &[f64], y2: &[f64], reference: &[f64]) -> f64 {
    debug_assert_eq!(y2.len(), reference.len());
    let Ok(audit) = ConstraintAudit::new(&spec.f1) else {
        return f64::INFINITY;
    };
    if !audit.admits(spec, beta) {
        return f64::INFINITY;
    }
    match spec.solve_points(beta, y2) {
        Ok(points) => points
            .iter()
            .zip(reference)
            .map(|(pt, r)| (pt.density - r).abs())
            .sum(),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfCandidate {
    pub df: usize,
    /// +∞ when the candidate is infeasible.
    #[serde(with = "infinite_as_null")]
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfSelection {
    pub chosen: usize,
    pub candidates: Vec<DfCandidate>,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// D⁰(λ) at the OLS β̂ and the case-sample η̂, against precomputed
/// reference densities at y₂.
pub fn candidate_discrepancy(
    data: &TwoSampleData,
    kind: FamilyKind,
    link: LinkFunction,
    basis_family: BasisFamily,
    df: usize,
    reference: &[f64],
) -> f64 {
    let run = || -> Result<f64> {
        let basis = basis_for(data, basis_family, df)?;
        let fit = ols_init(data, link, &basis)?;
        let spec = ModelSpec::new(initial_eta(kind, data.y1())?, link, basis)?;
        Ok(l1_discrepancy(&spec, &fit.beta_hat, data.y2(), reference))
    };
    run().unwrap_or(f64::INFINITY)
}

/// argmin of D⁰ over λ ∈ {1, …, df_max}, ties to the smaller λ.
pub fn select_df(
    data: &TwoSampleData,
    kind: FamilyKind,
    link: LinkFunction,
    basis_family: BasisFamily,
    df_max: usize,
) -> Result<DfSelection> {
    if df_max == 0 {
        return Err(Error::input("the largest candidate df must be at least 1"));
    }
    if !basis_family.has_free_df() {
        return Err(Error::input(format!(
            "basis '{}' has a fixed dimension; df selection does not apply",
            basis_family.name()
        )));
    }
    let kde = KernelDensityEstimate::silverman(data.y2().to_vec())?;
    let reference: Vec<f64> = data.y2().par_iter().map(|&y| kde.eval(y)).collect();
    let candidates: Vec<DfCandidate> = (1..=df_max)
        .into_par_iter()
        .map(|df| DfCandidate {
            df,
            discrepancy: candidate_discrepancy(data, kind, link, basis_family, df, &reference),
        })
        .collect();
    let chosen = argmin(&candidates).ok_or_else(|| {
        Error::Selection(format!("every candidate df in 1..={df_max} is infeasible"))
    })?;
    Ok(DfSelection { chosen, candidates })
}

/// Smallest df among the finite minima.
pub fn argmin(candidates: &[DfCandidate]) -> Option<usize> {
    candidates
        .iter()
        .filter(|c| c.discrepancy.is_finite())
        .fold(None::<&DfCandidate>, |best, c| match best {
            Some(b) if b.discrepancy < c.discrepancy || (b.discrepancy == c.discrepancy && b.df < c.df) => Some(b),
            _ => Some(c),
        })
        .map(|c| c.df)
}
