//! The control-sample density implied by a case density and a smooth
//! transformed quantile ratio, the percentile solver, and the joint
//! log-likelihood.

use serde::{Deserialize, Serialize};

use crate::density_families::CaseDensity;
use crate::error::{Error, Result};
use crate::quantile_core::{LinkFunction, Percentile, SmootherBasis};

/// Iterates are kept inside [ε, 1 − ε].
pub const PERCENTILE_CLAMP: f64 = 1e-10;
pub const SOLVER_TOLERANCE: f64 = 1e-8;
/// Convergence tolerance for an observation y: 1e-8 absolute, widened to
/// the rounding error of evaluating Q̂₂ near y when that is larger.
pub fn solver_tolerance(y: f64) -> f64 {
    SOLVER_TOLERANCE.max(8.0 * f64::EPSILON * y * y.ln().abs().max(1.0))
}

pub const SOLVER_MAX_ITER: usize = 500;
/// Denominators at or below this are treated as a singular density.
pub const SINGULAR_DENOMINATOR: f64 = 1e-12;
/// Number of interior points k/(N + 1) in the constraint audit grid.
pub const AUDIT_GRID_POINTS: usize = 199;

/// Two independent positive samples, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSamples")]
pub struct TwoSampleData {
    y1: Vec<f64>,
    y2: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSamples {
    y1: Vec<f64>,
    y2: Vec<f64>,
}

impl TryFrom<RawSamples> for TwoSampleData {
    type Error = Error;

    fn try_from(raw: RawSamples) -> Result<Self> {
        Self::new(raw.y1, raw.y2)
    }
}

fn check_sample(name: &str, ys: &mut [f64]) -> Result<()> {
    if ys.is_empty() {
        return Err(Error::input(format!("{name} is empty")));
    }
    if let Some((i, v)) = ys.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::input(format!(
            "{name}[{i}] = {v} is not a finite positive number"
        )));
    }
    ys.sort_by(f64::total_cmp);
    Ok(())
}

impl TwoSampleData {
    /// Validates and sorts both samples. Ties are allowed.
    pub fn new(mut y1: Vec<f64>, mut y2: Vec<f64>) -> Result<Self> {
        check_sample("y1", &mut y1)?;
        check_sample("y2", &mut y2)?;
        Ok(Self { y1, y2 })
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    pub fn y2(&self) -> &[f64] {
        &self.y2
    }

    pub fn n1(&self) -> usize {
        self.y1.len()
    }

    pub fn n2(&self) -> usize {
        self.y2.len()
    }

    /// Applies y ↦ y^e to both samples.
    pub fn powered(&self, e: f64) -> Result<Self> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::input(format!("power transform exponent must be positive, got {e}")));
        }
        Self::new(
            self.y1.iter().map(|y| y.powf(e)).collect(),
            self.y2.iter().map(|y| y.powf(e)).collect(),
        )
    }
}

/// The case density together with the link and basis of the quantile-ratio
/// model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub f1: CaseDensity,
    pub link: LinkFunction,
    pub basis: SmootherBasis,
}

/// Everything evaluated at one percentile.
#[derive(Clone, Copy, Debug)]
pub struct InducedPoint {
    pub p: Percentile,
    pub q1: f64,
    pub q2: f64,
    /// f₂(Q₂(p))
    pub density: f64,
    pub ln_density: f64,
}

/// Constraint data for one percentile that depends only on f₁.
#[derive(Clone, Copy, Debug)]
struct AuditPoint {
    p: Percentile,
    /// f₁(Q₁(p)) · Q₁(p)
    scale: f64,
}

/// The audit grid with f₁-dependent quantities cached, reusable across β
/// values while f₁ is fixed.
#[derive(Clone, Debug)]
pub struct ConstraintAudit {
    points: Vec<AuditPoint>,
}

impl ConstraintAudit {
    pub fn new(f1: &CaseDensity) -> Result<Self> {
        let mut points = Vec::with_capacity(AUDIT_GRID_POINTS);
        let mut hint = None;
        for k in 1..=AUDIT_GRID_POINTS {
            let p = Percentile::new(k as f64 / (AUDIT_GRID_POINTS + 1) as f64)?;
            let q1 = f1.quantile_near(p, hint)?;
            hint = Some(q1);
            points.push(AuditPoint {
                p,
                scale: (f1.ln_pdf(q1) + q1.ln()).exp(),
            });
        }
        Ok(Self { points })
    }

    pub fn percentiles(&self) -> impl Iterator<Item = Percentile> + '_ {
        self.points.iter().map(|a| a.p)
    }

    /// True when β satisfies the constraint at every grid point.
    pub fn admits(&self, spec: &ModelSpec, beta: &[f64]) -> bool {
        beta.len() == spec.basis.ncols()
            && self
                .points
                .iter()
                .all(|a| spec.constraint_holds(a.p, beta, a.scale))
    }
}

impl ModelSpec {
    pub fn new(f1: CaseDensity, link: LinkFunction, basis: SmootherBasis) -> Result<Self> {
        if f1.support_min() < 0.0 {
            return Err(Error::input(
                "the case density must live on the positive reals for a quantile ratio",
            ));
        }
        Ok(Self { f1, link, basis })
    }

    pub fn with_f1(&self, f1: CaseDensity) -> Self {
        Self {
            f1,
            link: self.link,
            basis: self.basis.clone(),
        }
    }

    fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.basis.ncols() {
            return Err(Error::input(format!(
                "coefficient vector has length {}, basis needs {}",
                beta.len(),
                self.basis.ncols()
            )));
        }
        Ok(())
    }

    /// (h⁻¹(Xβ), X'β · (h⁻¹)'(Xβ) / h⁻¹(Xβ)) at p; the second term is the
    /// derivative of log h⁻¹(Xβ) in p.
    #[inline]
    fn ratio_and_log_slope(&self, p: Percentile, beta: &[f64]) -> (f64, f64) {
        let (xb, dxb) = self.basis.predict(p, beta);
        let ratio = self.link.inverse(xb);
        let log_slope = match self.link {
            LinkFunction::Log => dxb,
            LinkFunction::Identity => dxb / xb,
        };
        (ratio, log_slope)
    }

    #[inline]
    fn constraint_holds(&self, p: Percentile, beta: &[f64], scale: f64) -> bool {
        let (xb, _) = self.basis.predict(p, beta);
        if !self.link.admits(xb) {
            return false;
        }
        let (_, log_slope) = self.ratio_and_log_slope(p, beta);
        scale * log_slope <= 1.0
    }

    /// Q₁(p) = Q₂(p) · h⁻¹(X(p)β).
    pub fn q1_from_q2(&self, beta: &[f64], q2: f64, p: Percentile) -> Result<f64> {
        self.check_beta(beta)?;
        let (xb, _) = self.basis.predict(p, beta);
        if !self.link.admits(xb) {
            return Err(Error::domain(format!(
                "linear predictor {xb} is outside the {} link's range",
                self.link.name()
            )));
        }
        Ok(q2 * self.link.inverse(xb))
    }

    /// Whether the implied control density is well defined at p.
    pub fn constraint_satisfied(&self, beta: &[f64], p: Percentile) -> bool {
        if beta.len() != self.basis.ncols() {
            return false;
        }
        let Ok(q1) = self.f1.quantile_at(p) else {
            return false;
        };
        let scale = (self.f1.ln_pdf(q1) + q1.ln()).exp();
        self.constraint_holds(p, beta, scale)
    }

    /// f₂(Q₂(p)) given Q₂(p) = `q2`.
    pub fn f2_density_quantile(&self, beta: &[f64], q2: f64, p: Percentile) -> Result<f64> {
        let q1 = self.q1_from_q2(beta, q2, p)?;
        Ok(self.induced(p, beta, q1)?.density)
    }

    fn induced(&self, p: Percentile, beta: &[f64], q1: f64) -> Result<InducedPoint> {
        let (xb, _) = self.basis.predict(p, beta);
        if !self.link.admits(xb) {
            return Err(Error::Singularity(format!(
                "linear predictor {xb} is outside the {} link's range at p = {}",
                self.link.name(),
                p.value()
            )));
        }
        let (ratio, log_slope) = self.ratio_and_log_slope(p, beta);
        let ln_f1 = self.f1.ln_pdf(q1);
        let denom = 1.0 - (ln_f1 + q1.ln()).exp() * log_slope;
        if !(denom > SINGULAR_DENOMINATOR) {
            return Err(Error::Singularity(format!(
                "induced density denominator {denom} at p = {}",
                p.value()
            )));
        }
        let ln_density = ln_f1 + ratio.ln() - denom.ln();
        Ok(InducedPoint {
            p,
            q1,
            q2: q1 / ratio,
            density: ln_density.exp(),
            ln_density,
        })
    }

    /// Evaluates Q̂₂ and f₂ at p. `hint` is a nearby Q₁ for numeric quantiles.
    pub fn eval_at(&self, beta: &[f64], p: Percentile, hint: Option<f64>) -> Result<InducedPoint> {
        self.check_beta(beta)?;
        let q1 = self.f1.quantile_near(p, hint)?;
        self.induced(p, beta, q1)
    }

    /// Q̂₂(p) = Q₁(p) / h⁻¹(X(p)β).
    pub fn q2_hat(&self, beta: &[f64], p: Percentile) -> Result<f64> {
        self.check_beta(beta)?;
        let q1 = self.f1.quantile_at(p)?;
        let (xb, _) = self.basis.predict(p, beta);
        if !self.link.admits(xb) {
            return Err(Error::domain(format!("linear predictor {xb} outside link range")));
        }
        Ok(q1 / self.link.inverse(xb))
    }

    /// Solves Q̂₂(p_j) = y₂(j) for each observation.
    pub fn solve_percentiles(&self, beta: &[f64], y2: &[f64]) -> Result<Vec<Percentile>> {
        Ok(self.solve_points(beta, y2)?.into_iter().map(|pt| pt.p).collect())
    }

    /// As [`Self::solve_percentiles`], keeping the evaluation at each root.
    pub fn solve_points(&self, beta: &[f64], y2: &[f64]) -> Result<Vec<InducedPoint>> {
        self.check_beta(beta)?;
        let n = y2.len();
        let mut out: Vec<InducedPoint> = Vec::with_capacity(n);
        for (j, &y) in y2.iter().enumerate() {
            let start = Percentile::new((j + 1) as f64 / (n + 1) as f64)?;
            // sorted input: the previous root bounds this one from below
            let floor = out.last().copied();
            out.push(self.solve_one(beta, y, j, start, floor)?);
        }
        Ok(out)
    }

    fn solve_one(
        &self,
        beta: &[f64],
        y: f64,
        index: usize,
        start: Percentile,
        floor: Option<InducedPoint>,
    ) -> Result<InducedPoint> {
        let tol = solver_tolerance(y);
        let fail = || Error::Convergence { index, value: y };
        let mut lo: Option<InducedPoint> = None;
        let mut hi: Option<InducedPoint> = None;
        if let Some(f) = floor {
            if (f.q2 - y).abs() < tol {
                return Ok(f);
            }
            if f.q2 < y {
                lo = Some(f);
            }
        }
        let mut p = start.clamped(PERCENTILE_CLAMP);
        if let Some(l) = lo {
            if p <= l.p {
                p = l.p;
            }
        }
        let mut hint = floor.map(|f| f.q1);
        for _ in 0..SOLVER_MAX_ITER {
            let pt = self.eval_at(beta, p, hint)?;
            hint = Some(pt.q1);
            let resid = y - pt.q2;
            if resid.abs() < tol {
                return Ok(pt);
            }
            if resid > 0.0 {
                lo = Some(pt);
            } else {
                hi = Some(pt);
            }
            let mut delta = resid * pt.density;
            let mut next = loop {
                match p.shifted(delta) {
                    Some(c) => break c,
                    None => delta *= 0.5,
                }
                if delta == 0.0 {
                    return Err(fail());
                }
            };
            next = next.clamped(PERCENTILE_CLAMP);
            let inside = lo.is_none_or(|l| next > l.p) && hi.is_none_or(|h| next < h.p);
            if !inside {
                next = match (lo, hi) {
                    (Some(l), Some(h)) => Percentile::midpoint(l.p, h.p),
                    // pinned against a clamp with the target beyond it
                    _ => return Err(fail()),
                };
            }
            if next == p {
                // bracket exhausted at floating-point resolution
                return Err(fail());
            }
            p = next;
        }
        Err(fail())
    }

    /// Σ log f₁(y₁ᵢ).
    pub fn log_likelihood_cases(&self, y1: &[f64]) -> f64 {
        y1.iter().map(|&y| self.f1.ln_pdf(y)).sum()
    }

    /// Σ log f₂(y₂ⱼ), or −∞ when β fails the constraint on the audit grid or
    /// at any solved percentile, or the solver fails.
    pub fn log_likelihood_controls(&self, audit: &ConstraintAudit, beta: &[f64], y2: &[f64]) -> f64 {
        if !audit.admits(self, beta) {
            return f64::NEG_INFINITY;
        }
        match self.solve_points(beta, y2) {
            // a solved point has a positive denominator by construction
            Ok(points) => points.iter().map(|pt| pt.ln_density).sum(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Joint log-likelihood of both samples.
    pub fn log_likelihood(&self, beta: &[f64], data: &TwoSampleData) -> f64 {
        let Ok(audit) = ConstraintAudit::new(&self.f1) else {
            return f64::NEG_INFINITY;
        };
        let cases = self.log_likelihood_cases(data.y1());
        if !cases.is_finite() {
            return f64::NEG_INFINITY;
        }
        cases + self.log_likelihood_controls(&audit, beta, data.y2())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile_core::{normal, BasisFamily};
    use proptest::prelude::*;

    fn case2(beta: &[f64]) -> (ModelSpec, Vec<f64>) {
        let basis = SmootherBasis::new(BasisFamily::NormalQuantileAffine, 1).unwrap();
        let spec = ModelSpec::new(
            CaseDensity::log_normal(7.5, 1.75).unwrap(),
            LinkFunction::Log,
            basis,
        )
        .unwrap();
        (spec, beta.to_vec())
    }

    fn case3(beta: &[f64]) -> (ModelSpec, Vec<f64>) {
        let basis = SmootherBasis::new(BasisFamily::LogSurvivalAffine, 1).unwrap();
        let spec = ModelSpec::new(CaseDensity::pareto(2.0, 1.0).unwrap(), LinkFunction::Log, basis).unwrap();
        (spec, beta.to_vec())
    }

    fn constant(f1: CaseDensity, link: LinkFunction) -> ModelSpec {
        let basis = SmootherBasis::new(BasisFamily::OrthonormalPolynomial, 0).unwrap();
        ModelSpec::new(f1, link, basis).unwrap()
    }

    fn pct(p: f64) -> Percentile {
        Percentile::new(p).unwrap()
    }

    fn grid99() -> Vec<Percentile> {
        (1..=99).map(|k| pct(k as f64 / 100.0)).collect()
    }

    #[test]
    fn q1_examples() {
        let (spec, _) = case2(&[0.0, 0.0]);
        assert_eq!(spec.q1_from_q2(&[0.0, 0.0], 3.7, pct(0.3)).unwrap(), 3.7);
        let unif = constant(CaseDensity::uniform(1.0).unwrap(), LinkFunction::Identity);
        assert!((unif.q1_from_q2(&[2.0], 0.3, pct(0.4)).unwrap() - 0.6).abs() < 1e-15);
        let q = spec.q1_from_q2(&[0.5, 0.25], 1.0, pct(0.5)).unwrap();
        assert!((q - 0.5f64.exp()).abs() < 1e-14);
        assert!(spec.q1_from_q2(&[0.5], 1.0, pct(0.5)).is_err());
    }

    #[test]
    fn constraint_examples() {
        let flat = constant(CaseDensity::gamma(2.0, 1.0).unwrap(), LinkFunction::Log);
        for b in [-50.0, 0.0, 50.0] {
            assert!(grid99().into_iter().all(|p| flat.constraint_satisfied(&[b], p)));
        }
        let fine = grid99();
        let dense: Vec<Percentile> = (1..10_000).map(|k| pct(k as f64 / 10_000.0)).collect();
        let basis = SmootherBasis::new(BasisFamily::NormalQuantileAffine, 1).unwrap();
        let spec = ModelSpec::new(CaseDensity::log_normal(7.0, 1.5).unwrap(), LinkFunction::Log, basis).unwrap();
        assert!(dense.iter().all(|&p| spec.constraint_satisfied(&[0.5, 1.4], p)));
        assert!(fine.iter().any(|&p| !spec.constraint_satisfied(&[0.5, 1.6], p)));
        let (spec, _) = case3(&[0.0, 0.0]);
        assert!(dense.iter().all(|&p| spec.constraint_satisfied(&[0.0, -0.4], p)));
        assert!(fine.iter().any(|&p| !spec.constraint_satisfied(&[0.0, -0.6], p)));
    }

    #[test]
    fn uniform_case_density() {
        let spec = constant(CaseDensity::uniform(1.0).unwrap(), LinkFunction::Identity);
        let d = spec.f2_density_quantile(&[2.0], 0.3, pct(0.6)).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
    }

    fn lognormal_oracle(beta: &[f64]) -> CaseDensity {
        CaseDensity::log_normal(7.5 - beta[0], 1.75 - beta[1]).unwrap()
    }

    fn pareto_oracle(beta: &[f64]) -> CaseDensity {
        CaseDensity::pareto(2.0 / (2.0 * beta[1] + 1.0), (-beta[0]).exp()).unwrap()
    }

    fn assert_matches_oracle(spec: &ModelSpec, beta: &[f64], oracle: &CaseDensity) {
        for p in grid99() {
            let q2 = spec.q2_hat(beta, p).unwrap();
            let want_q2 = oracle.quantile_at(p).unwrap();
            assert!((q2 / want_q2 - 1.0).abs() < 1e-12, "Q2 at {}", p.value());
            let got = spec.f2_density_quantile(beta, q2, p).unwrap();
            let want = oracle.pdf(q2);
            assert!(((got - want) / want).abs() < 1e-10, "f2 at {}: {got} vs {want}", p.value());
        }
    }

    #[test]
    fn closed_form_cases() {
        let (spec, beta) = case2(&[0.5, 0.25]);
        assert_matches_oracle(&spec, &beta, &lognormal_oracle(&beta));
        let (spec, beta) = case3(&[2f64.ln(), 0.0]);
        assert_matches_oracle(&spec, &beta, &CaseDensity::pareto(2.0, 0.5).unwrap());
    }

    #[test]
    fn beta_zero_collapses_to_case_density() {
        let families = [
            CaseDensity::log_normal(7.0, 1.5).unwrap(),
            CaseDensity::gamma(2.5, 0.01).unwrap(),
            CaseDensity::pareto(3.0, 2.0).unwrap(),
            CaseDensity::gsm(vec![0.3, 0.0, 0.7], 0.5).unwrap(),
        ];
        for f1 in families {
            let basis = SmootherBasis::new(BasisFamily::NaturalCubicSpline, 4).unwrap();
            let spec = ModelSpec::new(f1.clone(), LinkFunction::Log, basis).unwrap();
            let beta = [0.0; 5];
            for p in grid99() {
                let q = f1.quantile_at(p).unwrap();
                let got = spec.f2_density_quantile(&beta, q, p).unwrap();
                assert!(((got - f1.pdf(q)) / f1.pdf(q)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solver_examples() {
        let f1 = CaseDensity::log_normal(7.0, 1.5).unwrap();
        let spec = constant(f1, LinkFunction::Log);
        let p = spec.solve_percentiles(&[0.0], &[7f64.exp()]).unwrap();
        assert!((p[0].value() - 0.5).abs() < 1e-12);
        let spec = constant(CaseDensity::uniform(2.0).unwrap(), LinkFunction::Log);
        let p = spec.solve_percentiles(&[0.0], &[0.5]).unwrap();
        assert!((p[0].value() - 0.25).abs() < 1e-12);
    }

    fn lognormal_sample(mu: f64, sigma: f64, n: usize) -> Vec<f64> {
        // deterministic quantile sample reaching far into both tails
        let mut ys: Vec<f64> = (1..=n)
            .map(|i| {
                let u = (i as f64 - 0.5) / n as f64;
                (mu + sigma * normal::quantile(pct(u))).exp()
            })
            .collect();
        ys.push((mu + sigma * normal::quantile(Percentile::from_upper(1e-9).unwrap())).exp());
        ys
    }

    #[test]
    fn solver_matches_closed_form_cdf() {
        let (spec, beta) = case2(&[0.5, 0.25]);
        let y2 = lognormal_sample(7.0, 1.5, 500);
        let oracle = lognormal_oracle(&beta);
        let ps = spec.solve_percentiles(&beta, &y2).unwrap();
        for (p, y) in ps.iter().zip(&y2) {
            let want = oracle.cdf(*y);
            assert!((p.value() - want).abs() < 1e-7);
            let (_, s) = oracle.cdf_tails(*y);
            assert!(((p.complement() - s) / s).abs() < 1e-6);
            assert!((spec.q2_hat(&beta, *p).unwrap() - y).abs() < solver_tolerance(*y));
        }
    }

    #[test]
    fn solver_reports_unreachable_observation() {
        let spec = constant(CaseDensity::uniform(1.0).unwrap(), LinkFunction::Log);
        let err = spec.solve_percentiles(&[0.0], &[0.5, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Convergence { index: 1, .. }), "{err:?}");
    }

    #[test]
    fn likelihood_oracles() {
        let (spec, beta) = case2(&[0.5, 0.25]);
        let y1 = lognormal_sample(7.5, 1.75, 300);
        let y2 = lognormal_sample(7.0, 1.5, 300);
        let data = TwoSampleData::new(y1.clone(), y2.clone()).unwrap();
        let oracle = lognormal_oracle(&beta);
        let want: f64 = y1.iter().map(|y| spec.f1.ln_pdf(*y)).sum::<f64>()
            + y2.iter().map(|y| oracle.ln_pdf(*y)).sum::<f64>();
        let got = spec.log_likelihood(&beta, &data);
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");

        let zero = spec.log_likelihood(&[0.0, 0.0], &data);
        let want0: f64 = y1.iter().chain(&y2).map(|y| spec.f1.ln_pdf(*y)).sum();
        assert!((zero - want0).abs() < 1e-6);

        assert_eq!(spec.log_likelihood(&[0.5, 1.6], &data), f64::NEG_INFINITY);
    }

    #[test]
    fn ties_and_validation() {
        let d = TwoSampleData::new(vec![3.0, 1.0, 1.0], vec![2.0]).unwrap();
        assert_eq!(d.y1(), &[1.0, 1.0, 3.0]);
        assert!(TwoSampleData::new(vec![], vec![1.0]).is_err());
        assert!(TwoSampleData::new(vec![1.0], vec![0.0]).is_err());
        assert!(TwoSampleData::new(vec![f64::NAN], vec![1.0]).is_err());
        let (spec, beta) = case2(&[0.5, 0.25]);
        let ps = spec.solve_percentiles(&beta, &[900.0, 1000.0, 1000.0, 1100.0]).unwrap();
        assert_eq!(ps[1], ps[2]);
    }

    fn q2_slope(spec: &ModelSpec, beta: &[f64], p: f64) -> f64 {
        let h = 1e-6 * p.min(1.0 - p);
        (spec.q2_hat(beta, pct(p + h)).unwrap() - spec.q2_hat(beta, pct(p - h)).unwrap()) / (2.0 * h)
    }

    fn normalization(spec: &ModelSpec, beta: &[f64]) -> f64 {
        let n = 10_000;
        (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                let q2 = spec.q2_hat(beta, pct(p)).unwrap();
                spec.f2_density_quantile(beta, q2, pct(p)).unwrap() * q2_slope(spec, beta, p)
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn density_times_quantile_slope_is_one() {
        let basis = SmootherBasis::new(BasisFamily::NaturalCubicSpline, 3).unwrap();
        let spec = ModelSpec::new(CaseDensity::gamma(2.5, 0.002).unwrap(), LinkFunction::Log, basis).unwrap();
        let beta = [0.3, -0.2, 0.1, 0.05];
        assert!(ConstraintAudit::new(&spec.f1).unwrap().admits(&spec, &beta));
        assert!((normalization(&spec, &beta) - 1.0).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn case2_oracle_for_admissible_beta(b0 in -2.0..2.0f64, b1 in -1.0..1.5f64) {
            let (spec, beta) = case2(&[b0, b1]);
            assert_matches_oracle(&spec, &beta, &lognormal_oracle(&beta));
        }

        #[test]
        fn case3_oracle_for_admissible_beta(b0 in -2.0..2.0f64, b1 in -0.45..2.0f64) {
            let (spec, beta) = case3(&[b0, b1]);
            assert_matches_oracle(&spec, &beta, &pareto_oracle(&beta));
        }

        #[test]
        fn uniform_oracle_for_admissible_beta(b0 in 0.05..20.0f64, theta in 0.1..100.0f64) {
            let spec = constant(CaseDensity::uniform(theta).unwrap(), LinkFunction::Identity);
            for p in grid99() {
                let q2 = spec.q2_hat(&[b0], p).unwrap();
                prop_assert!((q2 - theta / b0 * p.value()).abs() < 1e-12 * q2.max(1.0));
                let d = spec.f2_density_quantile(&[b0], q2, p).unwrap();
                prop_assert!(((d - b0 / theta) * theta / b0).abs() < 1e-10);
            }
        }

        #[test]
        fn solved_percentiles_are_monotone(
            b0 in -1.0..1.0f64,
            b1 in -0.5..1.0f64,
            mut ys in proptest::collection::vec(50.0..1e5f64, 1..40),
        ) {
            ys.sort_by(f64::total_cmp);
            let (spec, beta) = case2(&[b0, b1]);
            let ps = spec.solve_percentiles(&beta, &ys).unwrap();
            for w in ps.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }

        #[test]
        fn normalization_holds_for_case2(b0 in -1.0..1.0f64, b1 in -0.5..1.0f64) {
            let (spec, beta) = case2(&[b0, b1]);
            prop_assert!((normalization(&spec, &beta) - 1.0).abs() < 1e-6);
        }
    }
}
