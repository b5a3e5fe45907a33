use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{CaseDensity, FamilyKind, GsmPriorDefaults};
use crate::error::{Error, Result};

/// Prior p(η | ζ_η) for the case-density parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum EtaPrior {
    /// θ ~ Pareto(shape, scale), conjugate for the uniform upper bound.
    Uniform { shape: f64, scale: f64 },
    /// μ ~ N(mean, sd²), σ² ~ InvGamma(shape, scale), independent.
    LogNormal {
        mu_mean: f64,
        mu_sd: f64,
        var_shape: f64,
        var_scale: f64,
    },
    /// shape ~ Gamma(a, b), scale ~ Gamma(a, b) (shape/rate pairs).
    Pareto {
        shape_prior: (f64, f64),
        scale_prior: (f64, f64),
    },
    /// shape ~ Gamma(a, b), rate ~ Gamma(a, b) (shape/rate pairs).
    Gamma {
        shape_prior: (f64, f64),
        rate_prior: (f64, f64),
    },
    /// θ ~ Gamma(alpha, delta), π ~ Dirichlet(1/J, …, 1/J).
    GammaScaleMixture { alpha: f64, delta: f64, components: usize },
}

fn ln_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
}

impl EtaPrior {
    /// Weakly informative defaults; the mixture uses the published
    /// hyperparameters.
    pub fn default_for(kind: FamilyKind) -> Self {
        match kind {
            FamilyKind::Uniform => EtaPrior::Uniform {
                shape: 1.0,
                scale: 1e-8,
            },
            FamilyKind::LogNormal => EtaPrior::LogNormal {
                mu_mean: 0.0,
                mu_sd: 100.0,
                var_shape: 1.0,
                var_scale: 1.0,
            },
            FamilyKind::Pareto => EtaPrior::Pareto {
                shape_prior: (1.0, 0.01),
                scale_prior: (1.0, 1e-6),
            },
            FamilyKind::Gamma => EtaPrior::Gamma {
                shape_prior: (1.0, 0.01),
                rate_prior: (1.0, 0.01),
            },
            FamilyKind::GammaScaleMixture { components } => {
                let d = GsmPriorDefaults::default();
                EtaPrior::GammaScaleMixture {
                    alpha: d.alpha,
                    delta: d.delta,
                    components,
                }
            }
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            EtaPrior::Uniform { .. } => FamilyKind::Uniform,
            EtaPrior::LogNormal { .. } => FamilyKind::LogNormal,
            EtaPrior::Pareto { .. } => FamilyKind::Pareto,
            EtaPrior::Gamma { .. } => FamilyKind::Gamma,
            EtaPrior::GammaScaleMixture { components, .. } => FamilyKind::GammaScaleMixture {
                components: *components,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            EtaPrior::Uniform { shape, scale } => *shape > 0.0 && *scale > 0.0,
            EtaPrior::LogNormal {
                mu_sd,
                var_shape,
                var_scale,
                ..
            } => *mu_sd > 0.0 && *var_shape > 0.0 && *var_scale > 0.0,
            EtaPrior::Pareto {
                shape_prior,
                scale_prior,
            } => shape_prior.0 > 0.0 && shape_prior.1 > 0.0 && scale_prior.0 > 0.0 && scale_prior.1 > 0.0,
            EtaPrior::Gamma {
                shape_prior,
                rate_prior,
            } => shape_prior.0 > 0.0 && shape_prior.1 > 0.0 && rate_prior.0 > 0.0 && rate_prior.1 > 0.0,
            EtaPrior::GammaScaleMixture {
                alpha,
                delta,
                components,
            } => *alpha > 0.0 && *delta > 0.0 && *components >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("invalid prior hyperparameters: {self:?}")))
        }
    }

    /// ln p(η), up to an additive constant for the Dirichlet part. Returns
    /// −∞ when the density and prior families disagree.
    pub fn ln_density(&self, eta: &CaseDensity) -> f64 {
        match (self, eta) {
            (EtaPrior::Uniform { shape, scale }, CaseDensity::Uniform { theta }) => {
                if theta < scale {
                    f64::NEG_INFINITY
                } else {
                    shape.ln() + shape * scale.ln() - (shape + 1.0) * theta.ln()
                }
            }
            (
                EtaPrior::LogNormal {
                    mu_mean,
                    mu_sd,
                    var_shape,
                    var_scale,
                },
                CaseDensity::LogNormal { mu, sigma },
            ) => {
                let z = (mu - mu_mean) / mu_sd;
                let var = sigma * sigma;
                let ln_mu = -0.5 * z * z - mu_sd.ln();
                let ln_var = var_shape * var_scale.ln() - ln_gamma(*var_shape)
                    - (var_shape + 1.0) * var.ln()
                    - var_scale / var;
                ln_mu + ln_var
            }
            (
                EtaPrior::Pareto {
                    shape_prior,
                    scale_prior,
                },
                CaseDensity::Pareto { shape, scale },
            ) => {
                ln_gamma_density(*shape, shape_prior.0, shape_prior.1)
                    + ln_gamma_density(*scale, scale_prior.0, scale_prior.1)
            }
            (
                EtaPrior::Gamma {
                    shape_prior,
                    rate_prior,
                },
                CaseDensity::Gamma { shape, rate },
            ) => {
                ln_gamma_density(*shape, shape_prior.0, shape_prior.1)
                    + ln_gamma_density(*rate, rate_prior.0, rate_prior.1)
            }
            (
                EtaPrior::GammaScaleMixture {
                    alpha,
                    delta,
                    components,
                },
                CaseDensity::GammaScaleMixture { weights, rate },
            ) if weights.len() == *components => {
                let conc = 1.0 / *components as f64;
                let dir: f64 = weights
                    .iter()
                    .map(|w| if *w > 0.0 { (conc - 1.0) * w.ln() } else { f64::NEG_INFINITY })
                    .sum();
                ln_gamma_density(*rate, *alpha, *delta) + dir
            }
            _ => f64::NEG_INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gsm_defaults() {
        let p = EtaPrior::default_for(FamilyKind::GammaScaleMixture { components: 40 });
        assert_eq!(
            p,
            EtaPrior::GammaScaleMixture {
                alpha: 845.0,
                delta: 1300.0,
                components: 40
            }
        );
        p.validate().unwrap();
    }

    #[test]
    fn mismatched_family_has_no_support() {
        let p = EtaPrior::default_for(FamilyKind::LogNormal);
        let eta = CaseDensity::gamma(2.0, 1.0).unwrap();
        assert_eq!(p.ln_density(&eta), f64::NEG_INFINITY);
    }

    #[test]
    fn gamma_rate_prior_peaks_near_mean() {
        let p = EtaPrior::default_for(FamilyKind::GammaScaleMixture { components: 2 });
        let w = vec![0.5, 0.5];
        let near = p.ln_density(&CaseDensity::gsm(w.clone(), 845.0 / 1300.0).unwrap());
        let far = p.ln_density(&CaseDensity::gsm(w, 2.0).unwrap());
        assert!(near > far);
    }

    #[test]
    fn lognormal_prior_is_finite_on_support() {
        let p = EtaPrior::default_for(FamilyKind::LogNormal);
        let v = p.ln_density(&CaseDensity::log_normal(7.0, 1.5).unwrap());
        assert!(v.is_finite());
    }
}
