use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, LogNormal as LogNormalDist, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quantile_core::{normal, Percentile};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const MAX_INVERSION_STEPS: usize = 200;

/// Distribution family of the case sample, without parameter values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum FamilyKind {
    Uniform,
    LogNormal,
    Pareto,
    Gamma,
    GammaScaleMixture { components: usize },
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Uniform => "uniform",
            FamilyKind::LogNormal => "lognormal",
            FamilyKind::Pareto => "pareto",
            FamilyKind::Gamma => "gamma",
            FamilyKind::GammaScaleMixture { .. } => "gsm",
        }
    }

    pub fn parse(name: &str, gsm_components: usize) -> std::result::Result<Self, String> {
        match name {
            "uniform" => Ok(FamilyKind::Uniform),
            "lognormal" | "log-normal" => Ok(FamilyKind::LogNormal),
            "pareto" => Ok(FamilyKind::Pareto),
            "gamma" => Ok(FamilyKind::Gamma),
            "gsm" | "gamma-scale-mixture" => Ok(FamilyKind::GammaScaleMixture {
                components: gsm_components,
            }),
            other => Err(format!(
                "unknown family '{other}' (expected uniform, lognormal, pareto, gamma or gsm)"
            )),
        }
    }

    /// Whether the quantile function has a closed form.
    pub fn closed_form_quantile(self) -> bool {
        matches!(self, FamilyKind::Uniform | FamilyKind::LogNormal | FamilyKind::Pareto)
    }
}

/// The parametric family for Y₁ together with its parameters η.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CaseDensity {
    /// Uniform on (0, θ].
    Uniform { theta: f64 },
    LogNormal { mu: f64, sigma: f64 },
    /// Pareto with tail index `shape` and support `[scale, ∞)`.
    Pareto { shape: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    /// Σ_j π_j Gamma(j, θ), j = 1..J, sharing one rate.
    GammaScaleMixture { weights: Vec<f64>, rate: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("{name} must be positive and finite, got {v}")))
    }
}

impl CaseDensity {
    pub fn uniform(theta: f64) -> Result<Self> {
        positive("uniform theta", theta)?;
        Ok(CaseDensity::Uniform { theta })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::input(format!("lognormal mu must be finite, got {mu}")));
        }
        positive("lognormal sigma", sigma)?;
        Ok(CaseDensity::LogNormal { mu, sigma })
    }

    pub fn pareto(shape: f64, scale: f64) -> Result<Self> {
        positive("pareto shape", shape)?;
        positive("pareto scale", scale)?;
        Ok(CaseDensity::Pareto { shape, scale })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        positive("gamma shape", shape)?;
        positive("gamma rate", rate)?;
        Ok(CaseDensity::Gamma { shape, rate })
    }

    pub fn gsm(weights: Vec<f64>, rate: f64) -> Result<Self> {
        positive("gsm rate", rate)?;
        if weights.is_empty() {
            return Err(Error::input("gsm needs at least one component"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::input("gsm weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::input(format!("gsm weights sum to {total}, not 1")));
        }
        Ok(CaseDensity::GammaScaleMixture { weights, rate })
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            CaseDensity::Uniform { .. } => FamilyKind::Uniform,
            CaseDensity::LogNormal { .. } => FamilyKind::LogNormal,
            CaseDensity::Pareto { .. } => FamilyKind::Pareto,
            CaseDensity::Gamma { .. } => FamilyKind::Gamma,
            CaseDensity::GammaScaleMixture { weights, .. } => FamilyKind::GammaScaleMixture {
                components: weights.len(),
            },
        }
    }

    /// η as a flat vector.
    pub fn params(&self) -> Vec<f64> {
        match self {
            CaseDensity::Uniform { theta } => vec![*theta],
            CaseDensity::LogNormal { mu, sigma } => vec![*mu, *sigma],
            CaseDensity::Pareto { shape, scale } => vec![*shape, *scale],
            CaseDensity::Gamma { shape, rate } => vec![*shape, *rate],
            CaseDensity::GammaScaleMixture { weights, rate } => {
                let mut v = Vec::with_capacity(weights.len() + 1);
                v.push(*rate);
                v.extend_from_slice(weights);
                v
            }
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            CaseDensity::Uniform { .. } => vec!["theta".into()],
            CaseDensity::LogNormal { .. } => vec!["mu".into(), "sigma".into()],
            CaseDensity::Pareto { .. } => vec!["shape".into(), "scale".into()],
            CaseDensity::Gamma { .. } => vec!["shape".into(), "rate".into()],
            CaseDensity::GammaScaleMixture { weights, .. } => std::iter::once("rate".to_string())
                .chain((1..=weights.len()).map(|j| format!("pi{j}")))
                .collect(),
        }
    }

    /// Rebuilds a density of the given kind from a flat η vector.
    pub fn from_params(kind: FamilyKind, params: &[f64]) -> Result<Self> {
        let want = match kind {
            FamilyKind::Uniform => 1,
            FamilyKind::GammaScaleMixture { components } => components + 1,
            _ => 2,
        };
        if params.len() != want {
            return Err(Error::input(format!(
                "{} expects {want} parameters, got {}",
                kind.name(),
                params.len()
            )));
        }
        match kind {
            FamilyKind::Uniform => Self::uniform(params[0]),
            FamilyKind::LogNormal => Self::log_normal(params[0], params[1]),
            FamilyKind::Pareto => Self::pareto(params[0], params[1]),
            FamilyKind::Gamma => Self::gamma(params[0], params[1]),
            FamilyKind::GammaScaleMixture { .. } => Self::gsm(params[1..].to_vec(), params[0]),
        }
    }

    /// Lower end of the support (the density is zero below it).
    pub fn support_min(&self) -> f64 {
        match self {
            CaseDensity::Pareto { scale, .. } => *scale,
            _ => 0.0,
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match self {
            CaseDensity::Uniform { theta } => {
                if y > 0.0 && y <= *theta {
                    1.0 / theta
                } else {
                    0.0
                }
            }
            _ => self.ln_pdf(y).exp(),
        }
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        if !(y > 0.0) || !y.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self {
            CaseDensity::Uniform { theta } => {
                if y <= *theta {
                    -theta.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            CaseDensity::LogNormal { mu, sigma } => {
                let ly = y.ln();
                let z = (ly - mu) / sigma;
                -0.5 * z * z - ly - sigma.ln() - normal::LN_SQRT_2PI
            }
            CaseDensity::Pareto { shape, scale } => {
                if y < *scale {
                    f64::NEG_INFINITY
                } else {
                    shape.ln() + shape * scale.ln() - (shape + 1.0) * y.ln()
                }
            }
            CaseDensity::Gamma { shape, rate } => {
                shape * rate.ln() + (shape - 1.0) * y.ln() - rate * y - ln_gamma(*shape)
            }
            CaseDensity::GammaScaleMixture { weights, rate } => {
                let x = rate * y;
                let lnx = x.ln();
                let mut ln_term = -x; // ln of e^{-x} x^k / k! at k = 0
                let mut max = f64::NEG_INFINITY;
                let mut terms = Vec::with_capacity(weights.len());
                for (k, w) in weights.iter().enumerate() {
                    if k > 0 {
                        ln_term += lnx - (k as f64).ln();
                    }
                    if *w > 0.0 {
                        let t = w.ln() + ln_term;
                        max = max.max(t);
                        terms.push(t);
                    }
                }
                if max == f64::NEG_INFINITY {
                    return max;
                }
                let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
                rate.ln() + max + s.ln()
            }
        }
    }

    /// (F(y), 1 − F(y)), each accurate in its own tail.
    pub fn cdf_tails(&self, y: f64) -> (f64, f64) {
        if !(y > self.support_min()) {
            return (0.0, 1.0);
        }
        if y == f64::INFINITY {
            return (1.0, 0.0);
        }
        match self {
            CaseDensity::Uniform { theta } => {
                if y >= *theta {
                    (1.0, 0.0)
                } else {
                    (y / theta, (theta - y) / theta)
                }
            }
            CaseDensity::LogNormal { mu, sigma } => {
                let z = (y.ln() - mu) / sigma;
                (normal::cdf(z), normal::sf(z))
            }
            CaseDensity::Pareto { shape, scale } => {
                let ln_s = shape * (scale / y).ln();
                (-ln_s.exp_m1(), ln_s.exp())
            }
            CaseDensity::Gamma { shape, rate } => {
                let x = rate * y;
                (gamma_lr(*shape, x), gamma_ur(*shape, x))
            }
            CaseDensity::GammaScaleMixture { weights, rate } => gsm_tails(weights, rate * y),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.cdf_tails(y).0
    }

    pub fn sf(&self, y: f64) -> f64 {
        self.cdf_tails(y).1
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.quantile_at(Percentile::new(p)?)
    }

    pub fn quantile_at(&self, p: Percentile) -> Result<f64> {
        self.quantile_near(p, None)
    }

    /// Quantile with an optional starting point for the numeric inversion
    /// used by the gamma families. Closed-form families ignore the hint.
    pub fn quantile_near(&self, p: Percentile, hint: Option<f64>) -> Result<f64> {
        match self {
            CaseDensity::Uniform { theta } => Ok(theta * p.value()),
            CaseDensity::LogNormal { mu, sigma } => Ok((mu + sigma * normal::quantile(p)).exp()),
            CaseDensity::Pareto { shape, scale } => Ok(scale * (-p.complement().ln() / shape).exp()),
            CaseDensity::Gamma { .. } | CaseDensity::GammaScaleMixture { .. } => self.invert_cdf(p, hint),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            CaseDensity::Uniform { theta } => 0.5 * theta,
            CaseDensity::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            CaseDensity::Pareto { shape, scale } => {
                if *shape > 1.0 {
                    shape * scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            CaseDensity::Gamma { shape, rate } => shape / rate,
            CaseDensity::GammaScaleMixture { weights, rate } => {
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * (k + 1) as f64)
                    .sum::<f64>()
                    / rate
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CaseDensity::Uniform { theta } => {
                // (0, θ]
                theta * (1.0 - rng.random::<f64>())
            }
            CaseDensity::LogNormal { mu, sigma } => LogNormalDist::new(*mu, *sigma)
                .expect("validated parameters")
                .sample(rng),
            CaseDensity::Pareto { shape, scale } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                scale * u.powf(-1.0 / shape)
            }
            CaseDensity::Gamma { shape, rate } => GammaDist::new(*shape, 1.0 / rate)
                .expect("validated parameters")
                .sample(rng),
            CaseDensity::GammaScaleMixture { weights, rate } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut shape = weights.len();
                for (k, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        shape = k + 1;
                        break;
                    }
                }
                GammaDist::new(shape as f64, 1.0 / rate)
                    .expect("validated parameters")
                    .sample(rng)
            }
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// Safeguarded Newton on whichever tail of the cdf is accurate at `p`.
    fn invert_cdf(&self, p: Percentile, hint: Option<f64>) -> Result<f64> {
        let upper = p.is_upper_half();
        let target = if upper { p.complement() } else { p.value() };
        // increasing in y, zero at the quantile
        let residual = |y: f64| {
            let (lo, hi) = self.cdf_tails(y);
            if upper {
                target - hi
            } else {
                lo - target
            }
        };

        let start = match hint {
            Some(h) if h > 0.0 && h.is_finite() => h,
            _ => self.mean().max(f64::MIN_POSITIVE),
        };
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        let mut y = start;
        for _ in 0..MAX_INVERSION_STEPS {
            let r = residual(y);
            if r == 0.0 {
                return Ok(y);
            }
            if r < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            if hi.is_finite() && (hi - lo) <= 4.0 * f64::EPSILON * hi {
                return Ok(0.5 * (lo + hi));
            }
            let dens = self.pdf(y);
            let newton = if dens > 0.0 { y - r / dens } else { f64::NAN };
            let next = if newton > lo && newton < hi {
                newton
            } else if hi.is_infinite() {
                2.0 * y
            } else if lo == 0.0 {
                0.5 * hi
            } else {
                0.5 * (lo + hi)
            };
            if (next - y).abs() <= 2.0 * f64::EPSILON * y {
                return Ok(next);
            }
            y = next;
        }
        Err(Error::numeric(format!(
            "quantile inversion did not converge at p = {} after {MAX_INVERSION_STEPS} steps",
            p.value()
        )))
    }
}

/// Lower and upper regularized incomplete gamma tails for integer shapes
/// j = 1..J at x, mixed with `weights`.
fn gsm_tails(weights: &[f64], x: f64) -> (f64, f64) {
    let lnx = x.ln();
    let mut ln_term = -x;
    let mut upper_j = 0.0; // Q(j, x) = e^{-x} Σ_{k<j} x^k / k!
    let mut lower = 0.0;
    let mut upper = 0.0;
    for (k, w) in weights.iter().enumerate() {
        if k > 0 {
            ln_term += lnx - (k as f64).ln();
        }
        upper_j += ln_term.exp();
        if *w == 0.0 {
            continue;
        }
        let j = k + 1;
        let lower_j = if upper_j <= 0.5 {
            1.0 - upper_j
        } else {
            // P(j, x) = e^{-x} Σ_{k ≥ j} x^k / k!
            let mut t = (ln_term + lnx - (j as f64).ln()).exp();
            let mut sum = 0.0;
            let mut m = j;
            while t > 0.0 && t > 1e-17 * sum {
                sum += t;
                m += 1;
                t *= x / m as f64;
                if m > j + 10_000 {
                    break;
                }
            }
            sum
        };
        lower += w * lower_j;
        upper += w * upper_j.min(1.0);
    }
    (lower, upper)
}

/// Conjugate prior metadata for the gamma scale mixture: θ ~ Gamma(α, δ)
/// (shape, rate) and π ~ Dirichlet(1/J, …, 1/J).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsmPriorDefaults {
    pub components: usize,
    pub alpha: f64,
    pub delta: f64,
}

impl Default for GsmPriorDefaults {
    fn default() -> Self {
        Self {
            components: 40,
            alpha: 845.0,
            delta: 1300.0,
        }
    }
}

/// Standard normal draw, re-exported for samplers in other modules.
pub(crate) fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
