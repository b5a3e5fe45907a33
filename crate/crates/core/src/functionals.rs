//! Posterior GQTE functionals from retained β draws: quantile, mean,
//! moment, variance, standard deviation, tailweight and inter-range ratio
//! differences.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes_engine::PosteriorDraws;
use crate::error::{Error, Result};
use crate::induced_density::{ModelSpec, TwoSampleData};
use crate::quantile_core::{plotting_positions, LinkFunction, PercentGrid, Percentile, SmootherBasis};
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GqteFunctional {
    Qte { grid: PercentGrid },
    Ate,
    Moment { order: u32 },
    VarianceDiff,
    SdDiff,
    Tailweight { grid: PercentGrid },
    InterRangeRatio { p: f64 },
}

impl GqteFunctional {
    pub fn moment(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::input("moment order must be at least 1"));
        }
        Ok(Self::Moment { order })
    }

    pub fn inter_range_ratio(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::input(format!("inter-range percentile must lie in (0, 0.5), got {p}")));
        }
        Ok(Self::InterRangeRatio { p })
    }

    /// Replaces the grid of gridded functionals.
    pub fn with_grid(self, grid: PercentGrid) -> Self {
        match self {
            Self::Qte { .. } => Self::Qte { grid },
            Self::Tailweight { .. } => Self::Tailweight { grid },
            other => other,
        }
    }

    pub fn grid(&self) -> Option<&PercentGrid> {
        match self {
            Self::Qte { grid } | Self::Tailweight { grid } => Some(grid),
            _ => None,
        }
    }
}

impl fmt::Display for GqteFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Qte { .. } => write!(f, "qte"),
            Self::Ate => write!(f, "ate"),
            Self::Moment { order } => write!(f, "moment:{order}"),
            Self::VarianceDiff => write!(f, "variance"),
            Self::SdDiff => write!(f, "sd"),
            Self::Tailweight { .. } => write!(f, "tailweight"),
            Self::InterRangeRatio { p } => write!(f, "ir:{p}"),
        }
    }
}

impl FromStr for GqteFunctional {
    type Err = Error;

    /// Parses `qte`, `ate`, `moment:r`, `variance`, `sd`, `tailweight` or
    /// `ir:p`. Gridded functionals get the default grid.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = || Error::input(format!("unknown functional '{s}'"));
        match (head.trim().to_ascii_lowercase().as_str(), arg) {
            ("qte", None) => Ok(Self::Qte {
                grid: PercentGrid::default(),
            }),
            ("ate", None) => Ok(Self::Ate),
            ("moment", Some(r)) => Self::moment(r.trim().parse().map_err(|_| bad())?),
            ("variance", None) => Ok(Self::VarianceDiff),
            ("sd", None) => Ok(Self::SdDiff),
            ("tailweight", None) => Ok(Self::Tailweight {
                grid: PercentGrid::default(),
            }),
            ("ir", Some(p)) => Self::inter_range_ratio(p.trim().parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

/// The two estimated quantile curves of one draw: Q̂₁ at the control
/// plotting positions and Q̂₂ at the case plotting positions.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileCurves {
    pub q1: Vec<(f64, f64)>,
    pub q2: Vec<(f64, f64)>,
}

fn ratios(link: LinkFunction, basis: &SmootherBasis, beta: &[f64], n: usize) -> Result<Vec<(f64, f64)>> {
    plotting_positions(n)
        .into_iter()
        .map(|p| {
            let (xb, _) = basis.predict(Percentile::new(p)?, beta);
            Ok((p, link.inverse(xb)))
        })
        .collect()
}

/// Q̂₁(p₂ᵢ) = y₂₍ᵢ₎ h⁻¹[X(p₂ᵢ)β] and Q̂₂(p₁ᵢ) = y₁₍ᵢ₎ / h⁻¹[X(p₁ᵢ)β].
pub fn per_draw_quantiles(beta: &[f64], data: &TwoSampleData, spec: &ModelSpec) -> Result<QuantileCurves> {
    if beta.len() != spec.basis.ncols() {
        return Err(Error::input("coefficient vector does not match the basis"));
    }
    let r2 = ratios(spec.link, &spec.basis, beta, data.n2())?;
    let r1 = ratios(spec.link, &spec.basis, beta, data.n1())?;
    Ok(QuantileCurves {
        q1: r2.iter().zip(data.y2()).map(|(&(p, r), y)| (p, y * r)).collect(),
        q2: r1.iter().zip(data.y1()).map(|(&(p, r), y)| (p, y / r)).collect(),
    })
}

/// Piecewise-linear interpolation in (p, Q), flat beyond the end points.
pub fn interpolate_quantile(pairs: &[(f64, f64)], p: f64) -> Result<f64> {
    let (first, last) = match (pairs.first(), pairs.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::input("cannot interpolate an empty quantile curve")),
    };
    if p <= first.0 {
        return Ok(first.1);
    }
    if p >= last.0 {
        return Ok(last.1);
    }
    let i = pairs.partition_point(|&(x, _)| x <= p);
    let (x0, y0) = pairs[i - 1];
    let (x1, y1) = pairs[i];
    if p == x0 {
        return Ok(y0);
    }
    Ok(y0 + (p - x0) / (x1 - x0) * (y1 - y0))
}

/// (mean of Q̂₁ʳ, mean of Q̂₂ʳ) over the plotting positions.
pub fn moment_terms(curves: &QuantileCurves, order: u32) -> (f64, f64) {
    let m = |pairs: &[(f64, f64)]| pairs.iter().map(|(_, q)| q.powi(order as i32)).sum::<f64>() / pairs.len() as f64;
    (m(&curves.q1), m(&curves.q2))
}

/// Variance difference as Δμ² − (μ₁² − μ₂²).
pub fn variance_difference(curves: &QuantileCurves) -> f64 {
    let (a1, a2) = moment_terms(curves, 1);
    let (s1, s2) = moment_terms(curves, 2);
    (s1 - s2) - (a1 * a1 - a2 * a2)
}

fn tailweight(spec: &ModelSpec, beta: &[f64], p: f64) -> Result<f64> {
    let (xb, dxb) = spec.basis.predict(Percentile::new(p)?, beta);
    match spec.link {
        LinkFunction::Log => Ok(dxb),
        LinkFunction::Identity => {
            if xb > 0.0 {
                Ok(dxb / xb)
            } else {
                Err(Error::domain(format!(
                    "tailweight undefined at p = {p}: linear predictor {xb} is not positive"
                )))
            }
        }
    }
}

/// The functional's value(s) for one β draw.
pub fn per_draw_value(
    functional: &GqteFunctional,
    beta: &[f64],
    data: &TwoSampleData,
    spec: &ModelSpec,
) -> Result<Vec<f64>> {
    if let GqteFunctional::Tailweight { grid } = functional {
        return grid.points().iter().map(|&p| tailweight(spec, beta, p)).collect();
    }
    let curves = per_draw_quantiles(beta, data, spec)?;
    let q = |pairs: &[(f64, f64)], p: f64| interpolate_quantile(pairs, p);
    Ok(match functional {
        GqteFunctional::Qte { grid } => grid
            .points()
            .iter()
            .map(|&p| Ok(q(&curves.q1, p)? - q(&curves.q2, p)?))
            .collect::<Result<_>>()?,
        GqteFunctional::Ate => {
            let (a, b) = moment_terms(&curves, 1);
            vec![a - b]
        }
        GqteFunctional::Moment { order } => {
            let (a, b) = moment_terms(&curves, *order);
            vec![a - b]
        }
        GqteFunctional::VarianceDiff => vec![variance_difference(&curves)],
        GqteFunctional::SdDiff => {
            let (a1, a2) = moment_terms(&curves, 1);
            let (s1, s2) = moment_terms(&curves, 2);
            vec![(s1 - a1 * a1).max(0.0).sqrt() - (s2 - a2 * a2).max(0.0).sqrt()]
        }
        GqteFunctional::InterRangeRatio { p } => {
            let hi = 1.0 - p;
            vec![q(&curves.q1, hi)? / q(&curves.q1, *p)? - q(&curves.q2, hi)? / q(&curves.q2, *p)?]
        }
        GqteFunctional::Tailweight { .. } => unreachable!("handled above"),
    })
}

/// Posterior mean and pointwise 95% band of a functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GqteEstimate {
    pub functional: String,
    /// Grid percentiles; empty for scalar functionals.
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
    pub draws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_draw: Option<Vec<Vec<f64>>>,
}

impl GqteEstimate {
    pub fn is_scalar(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.is_scalar() {
            out.push_str("functional,mean,lo95,hi95\n");
            out.push_str(&format!("{},{},{},{}\n", self.functional, self.mean[0], self.lo95[0], self.hi95[0]));
        } else {
            out.push_str("p,mean,lo95,hi95\n");
            for i in 0..self.grid.len() {
                out.push_str(&format!("{},{},{},{}\n", self.grid[i], self.mean[i], self.lo95[i], self.hi95[i]));
            }
        }
        out
    }
}

/// Rao-Blackwell estimate: the average of per-draw values with empirical
/// 2.5% and 97.5% percentiles.
pub fn estimate(
    functional: &GqteFunctional,
    draws: &PosteriorDraws,
    data: &TwoSampleData,
    spec: &ModelSpec,
) -> Result<GqteEstimate> {
    estimate_from_betas(functional, &draws.beta, data, spec, false)
}

pub fn estimate_from_betas(
    functional: &GqteFunctional,
    betas: &[Vec<f64>],
    data: &TwoSampleData,
    spec: &ModelSpec,
    keep_draws: bool,
) -> Result<GqteEstimate> {
    if betas.is_empty() {
        return Err(Error::input("no posterior draws to average"));
    }
    let values: Vec<Vec<f64>> = betas
        .par_iter()
        .map(|b| per_draw_value(functional, b, data, spec))
        .collect::<Result<_>>()?;
    let width = values[0].len();
    let m = values.len() as f64;
    let mut mean = Vec::with_capacity(width);
    let mut lo95 = Vec::with_capacity(width);
    let mut hi95 = Vec::with_capacity(width);
    let mut column = Vec::with_capacity(values.len());
    for j in 0..width {
        column.clear();
        column.extend(values.iter().map(|v| v[j]));
        mean.push(column.iter().sum::<f64>() / m);
        column.sort_by(f64::total_cmp);
        lo95.push(stats::quantile_sorted(&column, 0.025));
        hi95.push(stats::quantile_sorted(&column, 0.975));
    }
    Ok(GqteEstimate {
        functional: functional.to_string(),
        grid: functional.grid().map(|g| g.points().to_vec()).unwrap_or_default(),
        mean,
        lo95,
        hi95,
        draws: values.len(),
        per_draw: keep_draws.then_some(values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density_families::CaseDensity;
    use crate::quantile_core::{normal, BasisFamily};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(link: LinkFunction, family: BasisFamily, df: usize) -> ModelSpec {
        ModelSpec::new(
            CaseDensity::log_normal(0.0, 1.0).unwrap(),
            link,
            SmootherBasis::new(family, df).unwrap(),
        )
        .unwrap()
    }

    fn sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CaseDensity::log_normal(7.0, 1.5).unwrap().sample_n(n, &mut rng)
    }

    #[test]
    fn unit_ratio_returns_the_order_statistics() {
        let data = TwoSampleData::new(sample(30, 1), sample(50, 2)).unwrap();
        let s = spec(LinkFunction::Log, BasisFamily::NaturalCubicSpline, 3);
        let c = per_draw_quantiles(&[0.0; 4], &data, &s).unwrap();
        let q1: Vec<f64> = c.q1.iter().map(|t| t.1).collect();
        let q2: Vec<f64> = c.q2.iter().map(|t| t.1).collect();
        assert_eq!(q1, data.y2());
        assert_eq!(q2, data.y1());
        assert_eq!(c.q1[0].0, 1.0 / 51.0);
    }

    #[test]
    fn constant_identity_ratio_scales() {
        let data = TwoSampleData::new(vec![2.0, 4.0], vec![1.0, 3.0, 5.0]).unwrap();
        let s = spec(LinkFunction::Identity, BasisFamily::OrthonormalPolynomial, 0);
        let c = per_draw_quantiles(&[2.0], &data, &s).unwrap();
        assert_eq!(c.q1.iter().map(|t| t.1).collect::<Vec<_>>(), vec![2.0, 6.0, 10.0]);
        assert_eq!(c.q2.iter().map(|t| t.1).collect::<Vec<_>>(), vec![1.0, 2.0]);
    }

    #[test]
    fn interpolation_examples() {
        let pairs = [(0.25, 1.0), (0.75, 3.0)];
        assert_eq!(interpolate_quantile(&pairs, 0.5).unwrap(), 2.0);
        assert_eq!(interpolate_quantile(&pairs, 0.25).unwrap(), 1.0);
        assert_eq!(interpolate_quantile(&pairs, 0.75).unwrap(), 3.0);
        assert_eq!(interpolate_quantile(&pairs, 0.1).unwrap(), 1.0);
        assert_eq!(interpolate_quantile(&pairs, 0.9).unwrap(), 3.0);
        assert!(interpolate_quantile(&[], 0.5).is_err());
        let tab: Vec<(f64, f64)> = plotting_positions(999)
            .into_iter()
            .map(|p| (p, normal::quantile(Percentile::new(p).unwrap()).exp()))
            .collect();
        assert!((interpolate_quantile(&tab, 0.5).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn identical_samples_give_zero_effects() {
        let y = sample(200, 3);
        let data = TwoSampleData::new(y.clone(), y).unwrap();
        let s = spec(LinkFunction::Log, BasisFamily::NaturalCubicSpline, 4);
        let betas = vec![vec![0.0; 5]; 3];
        for f in ["ate", "qte", "ir:0.1", "variance", "sd", "moment:3", "tailweight"] {
            let est = estimate_from_betas(&f.parse().unwrap(), &betas, &data, &s, false).unwrap();
            assert!(est.mean.iter().all(|v| *v == 0.0), "{f}: {:?}", &est.mean[..1]);
        }
    }

    #[test]
    fn tailweight_examples() {
        let s = spec(LinkFunction::Log, BasisFamily::NormalQuantileAffine, 1);
        let v = tailweight(&s, &[0.5, 0.25], 0.5).unwrap();
        assert!((v - 0.25 * (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let id = spec(LinkFunction::Identity, BasisFamily::NormalQuantileAffine, 1);
        assert!(matches!(tailweight(&id, &[-1.0, 0.1], 0.5), Err(Error::Domain(_))));
        assert!(tailweight(&id, &[1.0, 0.1], 0.5).is_ok());
    }

    #[test]
    fn tailweight_matches_finite_difference() {
        for (link, beta) in [
            (LinkFunction::Log, vec![0.3, -0.2, 0.4, 0.1, -0.3]),
            (LinkFunction::Identity, vec![2.0, -0.2, 0.4, 0.1, -0.3]),
        ] {
            let s = spec(link, BasisFamily::NaturalCubicSpline, 4);
            for k in 1..=99 {
                let p = k as f64 / 100.0;
                let h = 1e-6;
                let lh = |p: f64| {
                    let (xb, _) = s.basis.predict(Percentile::new(p).unwrap(), &beta);
                    link.inverse(xb).ln()
                };
                let fd = (lh(p + h) - lh(p - h)) / (2.0 * h);
                assert!((tailweight(&s, &beta, p).unwrap() - fd).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("ate".parse::<GqteFunctional>().unwrap(), GqteFunctional::Ate);
        assert_eq!(
            "moment:3".parse::<GqteFunctional>().unwrap(),
            GqteFunctional::Moment { order: 3 }
        );
        assert_eq!(
            "ir:0.1".parse::<GqteFunctional>().unwrap(),
            GqteFunctional::InterRangeRatio { p: 0.1 }
        );
        for bad in ["", "median", "moment:0", "moment:x", "ir:0.5", "ir", "qte:3"] {
            assert!(bad.parse::<GqteFunctional>().is_err(), "{bad}");
        }
        for s in ["qte", "ate", "moment:2", "variance", "sd", "tailweight", "ir:0.25"] {
            assert_eq!(s.parse::<GqteFunctional>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn csv_schema() {
        let data = TwoSampleData::new(sample(20, 4), sample(25, 5)).unwrap();
        let s = spec(LinkFunction::Log, BasisFamily::NaturalCubicSpline, 2);
        let betas = vec![vec![0.1, 0.0, 0.2], vec![0.2, 0.1, 0.0]];
        let est = estimate_from_betas(&"qte".parse().unwrap(), &betas, &data, &s, false).unwrap();
        let csv = est.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "p,mean,lo95,hi95");
        assert_eq!(lines.len(), 100);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn cross_formula_identities(b in proptest::collection::vec(-0.5..0.5f64, 4), seed in 0u64..1000) {
            let data = TwoSampleData::new(sample(40, seed), sample(60, seed + 1)).unwrap();
            let s = spec(LinkFunction::Log, BasisFamily::NaturalCubicSpline, 3);
            let c = per_draw_quantiles(&b, &data, &s).unwrap();
            // ATE equals the first-moment difference
            let ate = per_draw_value(&GqteFunctional::Ate, &b, &data, &s).unwrap()[0];
            let m1 = per_draw_value(&GqteFunctional::Moment { order: 1 }, &b, &data, &s).unwrap()[0];
            prop_assert_eq!(ate, m1);
            // variance via the two per-group variances
            let var = |pairs: &[(f64, f64)]| {
                let n = pairs.len() as f64;
                let m = pairs.iter().map(|t| t.1).sum::<f64>() / n;
                pairs.iter().map(|t| t.1 * t.1).sum::<f64>() / n - m * m
            };
            let direct = var(&c.q1) - var(&c.q2);
            let via = per_draw_value(&GqteFunctional::VarianceDiff, &b, &data, &s).unwrap()[0];
            let scale = moment_terms(&c, 2).0.abs().max(moment_terms(&c, 2).1.abs());
            prop_assert!((direct - via).abs() <= 1e-10 * scale);
            let m2 = per_draw_value(&GqteFunctional::Moment { order: 2 }, &b, &data, &s).unwrap()[0];
            let (a1, a2) = moment_terms(&c, 1);
            prop_assert!((via - (m2 - (a1 * a1 - a2 * a2))).abs() <= 1e-10 * scale);
        }

        #[test]
        fn dominance_gives_non_negative_qte_band(shift in 0.0..1.0f64, seed in 0u64..1000) {
            let y = sample(50, seed);
            let data = TwoSampleData::new(y.clone(), y).unwrap();
            let s = spec(LinkFunction::Log, BasisFamily::OrthonormalPolynomial, 0);
            let betas = vec![vec![shift], vec![shift * 0.5], vec![shift * 0.25]];
            let est = estimate_from_betas(&"qte".parse().unwrap(), &betas, &data, &s, false).unwrap();
            prop_assert!(est.lo95.iter().all(|v| *v >= 0.0));
            for i in 0..est.grid.len() {
                prop_assert!(est.lo95[i] <= est.mean[i] && est.mean[i] <= est.hi95[i]);
            }
        }

        #[test]
        fn averaging_orders_agree(seed in 0u64..1000) {
            let data = TwoSampleData::new(sample(30, seed), sample(45, seed + 7)).unwrap();
            let s = spec(LinkFunction::Log, BasisFamily::NaturalCubicSpline, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let betas: Vec<Vec<f64>> = (0..25)
                .map(|_| (0..3).map(|_| crate::density_families::std_normal(&mut rng) * 0.2).collect())
                .collect();
            let est = estimate_from_betas(&GqteFunctional::Ate, &betas, &data, &s, true).unwrap();
            // mean of Q̂₁ averages minus mean of Q̂₂ averages
            let mut a = 0.0;
            let mut b = 0.0;
            for beta in &betas {
                let (x, y) = moment_terms(&per_draw_quantiles(beta, &data, &s).unwrap(), 1);
                a += x;
                b += y;
            }
            let other = (a - b) / betas.len() as f64;
            prop_assert!((est.mean[0] - other).abs() <= 1e-12 * (a.abs() + b.abs()) / betas.len() as f64);
        }
    }
}
