//! Smoothing bases X(p, λ) over the percentile scale.
//!
//! Every family produces a row of length λ + 1 whose first entry is the
//! constant 1. Derivatives with respect to `p` are closed form.

use serde::{Deserialize, Serialize};

use super::{normal, Percentile};
use crate::error::{Error, Result};

/// Number of reference points used to orthonormalize the polynomial basis.
pub const ORTHO_GRID_POINTS: usize = 1001;

/// Default spline boundary knots when the basis is not tied to a sample.
pub const DEFAULT_BOUNDARY: (f64, f64) = (0.005, 0.995);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisFamily {
    OrthonormalPolynomial,
    NaturalCubicSpline,
    /// [1, Φ⁻¹(p)]
    NormalQuantileAffine,
    /// [1, log(1 − p)]
    LogSurvivalAffine,
}

impl BasisFamily {
    /// Whether λ is a free tuning parameter for this family.
    pub fn has_free_df(self) -> bool {
        matches!(self, BasisFamily::OrthonormalPolynomial | BasisFamily::NaturalCubicSpline)
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::OrthonormalPolynomial => "polynomial",
            BasisFamily::NaturalCubicSpline => "spline",
            BasisFamily::NormalQuantileAffine => "normal-quantile",
            BasisFamily::LogSurvivalAffine => "log-survival",
        }
    }
}

impl std::str::FromStr for BasisFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "polynomial" | "poly" | "orthonormal-polynomial" => Ok(BasisFamily::OrthonormalPolynomial),
            "spline" | "ns" | "natural-cubic-spline" => Ok(BasisFamily::NaturalCubicSpline),
            "normal-quantile" | "normal-quantile-affine" => Ok(BasisFamily::NormalQuantileAffine),
            "log-survival" | "log-survival-affine" => Ok(BasisFamily::LogSurvivalAffine),
            other => Err(format!(
                "unknown basis '{other}' (expected polynomial, spline, normal-quantile or log-survival)"
            )),
        }
    }
}

/// Serializable description of a basis; enough to rebuild it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub family: BasisFamily,
    pub df: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_knots: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// Three-term recurrence coefficients of the orthonormal family in
    /// t = 2p − 1: `b[k+1] P_{k+1} = (t − a[k]) P_k − b[k] P_{k−1}`.
    Polynomial { a: Vec<f64>, b: Vec<f64> },
    /// Natural cubic spline knots, boundary knots first and last.
    Spline { knots: Vec<f64> },
    NormalQuantile,
    LogSurvival,
}

/// The design row X(p, λ) and its derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisConfig", into = "BasisConfig")]
pub struct SmootherBasis {
    family: BasisFamily,
    df: usize,
    kind: Kind,
}

impl SmootherBasis {
    pub fn new(family: BasisFamily, df: usize) -> Result<Self> {
        Self::from_config(BasisConfig {
            family,
            df,
            boundary_knots: None,
        })
    }

    /// A basis whose spline boundary knots sit at the outermost plotting
    /// positions of a sample of size `n`. Non-spline families ignore `n`.
    pub fn for_sample(family: BasisFamily, df: usize, n: usize) -> Result<Self> {
        let boundary_knots = match family {
            BasisFamily::NaturalCubicSpline if n >= 1 => {
                let d = (n + 1) as f64;
                Some((1.0 / d, n as f64 / d))
            }
            _ => None,
        };
        Self::from_config(BasisConfig {
            family,
            df,
            boundary_knots,
        })
    }

    pub fn from_config(config: BasisConfig) -> Result<Self> {
        let BasisConfig {
            family,
            df,
            boundary_knots,
        } = config;
        let kind = match family {
            BasisFamily::OrthonormalPolynomial => {
                let (a, b) = stieltjes_coefficients(df);
                Kind::Polynomial { a, b }
            }
            BasisFamily::NaturalCubicSpline => {
                let (lo, hi) = boundary_knots.unwrap_or(DEFAULT_BOUNDARY);
                if !(lo > 0.0 && hi < 1.0 && lo < hi) {
                    return Err(Error::input(format!("invalid spline boundary knots ({lo}, {hi})")));
                }
                let mut knots = Vec::with_capacity(df + 1);
                if df >= 1 {
                    knots.push(lo);
                    for k in 1..df {
                        let xi = k as f64 / df as f64;
                        if !(xi > lo && xi < hi) {
                            return Err(Error::input(format!(
                                "interior knot {xi} falls outside boundary knots ({lo}, {hi}); reduce df"
                            )));
                        }
                        knots.push(xi);
                    }
                    knots.push(hi);
                }
                Kind::Spline { knots }
            }
            BasisFamily::NormalQuantileAffine | BasisFamily::LogSurvivalAffine => {
                if df != 1 {
                    return Err(Error::input(format!(
                        "basis '{}' has exactly one non-constant column, got df = {df}",
                        family.name()
                    )));
                }
                if family == BasisFamily::NormalQuantileAffine {
                    Kind::NormalQuantile
                } else {
                    Kind::LogSurvival
                }
            }
        };
        Ok(Self { family, df, kind })
    }

    pub fn config(&self) -> BasisConfig {
        let boundary_knots = match &self.kind {
            Kind::Spline { knots } if !knots.is_empty() => Some((knots[0], knots[knots.len() - 1])),
            _ => None,
        };
        BasisConfig {
            family: self.family,
            df: self.df,
            boundary_knots,
        }
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    /// λ, the number of non-constant columns.
    pub fn df(&self) -> usize {
        self.df
    }

    /// λ + 1
    pub fn ncols(&self) -> usize {
        self.df + 1
    }

    /// X(p, λ).
    pub fn eval(&self, p: f64) -> Result<Vec<f64>> {
        let pct = Percentile::new(p)?;
        let mut row = vec![0.0; self.ncols()];
        self.fill(pct, &mut row, None);
        Ok(row)
    }

    /// X'(p, λ).
    pub fn deriv(&self, p: f64) -> Result<Vec<f64>> {
        let pct = Percentile::new(p)?;
        let mut row = vec![0.0; self.ncols()];
        let mut drow = vec![0.0; self.ncols()];
        self.fill(pct, &mut row, Some(&mut drow));
        Ok(drow)
    }

    pub fn eval_at(&self, p: Percentile) -> Vec<f64> {
        let mut row = vec![0.0; self.ncols()];
        self.fill(p, &mut row, None);
        row
    }

    pub fn deriv_at(&self, p: Percentile) -> Vec<f64> {
        let mut row = vec![0.0; self.ncols()];
        let mut drow = vec![0.0; self.ncols()];
        self.fill(p, &mut row, Some(&mut drow));
        drow
    }

    /// (X(p)β, X'(p)β) without allocating.
    pub fn predict(&self, p: Percentile, beta: &[f64]) -> (f64, f64) {
        debug_assert_eq!(beta.len(), self.ncols());
        match &self.kind {
            Kind::NormalQuantile => {
                let z = normal::quantile(p);
                (beta[0] + beta[1] * z, beta[1] / normal::pdf(z))
            }
            Kind::LogSurvival => {
                let s = p.complement();
                let log_s = if p.is_upper_half() { s.ln() } else { (-p.value()).ln_1p() };
                (beta[0] + beta[1] * log_s, -beta[1] / s)
            }
            Kind::Polynomial { a, b } => {
                let t = 2.0 * p.value() - 1.0;
                let (mut prev, mut cur) = (0.0, 1.0);
                let (mut dprev, mut dcur) = (0.0, 0.0);
                let mut value = beta[0];
                let mut slope = 0.0;
                for k in 0..self.df {
                    let next = ((t - a[k]) * cur - b[k] * prev) / b[k + 1];
                    let dnext = (cur + (t - a[k]) * dcur - b[k] * dprev) / b[k + 1];
                    prev = cur;
                    cur = next;
                    dprev = dcur;
                    dcur = dnext;
                    value += beta[k + 1] * cur;
                    slope += beta[k + 1] * dcur;
                }
                (value, 2.0 * slope)
            }
            Kind::Spline { knots } => {
                let x = p.value();
                let mut value = beta[0];
                let mut slope = 0.0;
                if self.df >= 1 {
                    value += beta[1] * x;
                    slope += beta[1];
                    let (last_d, last_dd) = spline_d(knots, knots.len() - 2, x);
                    for k in 0..knots.len().saturating_sub(2) {
                        let (d, dd) = spline_d(knots, k, x);
                        value += beta[k + 2] * (d - last_d);
                        slope += beta[k + 2] * (dd - last_dd);
                    }
                }
                (value, slope)
            }
        }
    }

    fn fill(&self, p: Percentile, row: &mut [f64], mut drow: Option<&mut [f64]>) {
        row[0] = 1.0;
        if let Some(d) = drow.as_deref_mut() {
            d[0] = 0.0;
        }
        match &self.kind {
            Kind::NormalQuantile => {
                let z = normal::quantile(p);
                row[1] = z;
                if let Some(d) = drow {
                    d[1] = 1.0 / normal::pdf(z);
                }
            }
            Kind::LogSurvival => {
                let s = p.complement();
                row[1] = if p.is_upper_half() { s.ln() } else { (-p.value()).ln_1p() };
                if let Some(d) = drow {
                    d[1] = -1.0 / s;
                }
            }
            Kind::Polynomial { a, b } => {
                let t = 2.0 * p.value() - 1.0;
                let (mut prev, mut cur) = (0.0, 1.0);
                let (mut dprev, mut dcur) = (0.0, 0.0);
                for k in 0..self.df {
                    let next = ((t - a[k]) * cur - b[k] * prev) / b[k + 1];
                    let dnext = (cur + (t - a[k]) * dcur - b[k] * dprev) / b[k + 1];
                    prev = cur;
                    cur = next;
                    dprev = dcur;
                    dcur = dnext;
                    row[k + 1] = cur;
                    if let Some(d) = drow.as_deref_mut() {
                        d[k + 1] = 2.0 * dcur;
                    }
                }
            }
            Kind::Spline { knots } => {
                if self.df == 0 {
                    return;
                }
                let x = p.value();
                row[1] = x;
                if let Some(d) = drow.as_deref_mut() {
                    d[1] = 1.0;
                }
                let (last_d, last_dd) = spline_d(knots, knots.len() - 2, x);
                for k in 0..knots.len().saturating_sub(2) {
                    let (d, dd) = spline_d(knots, k, x);
                    row[k + 2] = d - last_d;
                    if let Some(dr) = drow.as_deref_mut() {
                        dr[k + 2] = dd - last_dd;
                    }
                }
            }
        }
    }
}

impl TryFrom<BasisConfig> for SmootherBasis {
    type Error = Error;

    fn try_from(config: BasisConfig) -> Result<Self> {
        Self::from_config(config)
    }
}

impl From<SmootherBasis> for BasisConfig {
    fn from(basis: SmootherBasis) -> Self {
        basis.config()
    }
}

/// d_k(x) = [(x − ξ_k)³₊ − (x − ξ_K)³₊] / (ξ_K − ξ_k) and its derivative.
#[inline]
fn spline_d(knots: &[f64], k: usize, x: f64) -> (f64, f64) {
    let last = knots[knots.len() - 1];
    let xk = knots[k];
    let a = (x - xk).max(0.0);
    let b = (x - last).max(0.0);
    let denom = last - xk;
    ((a * a * a - b * b * b) / denom, 3.0 * (a * a - b * b) / denom)
}

/// Reference grid for orthonormalization: midpoints of 1001 equal cells.
pub fn ortho_reference_grid() -> Vec<f64> {
    let n = ORTHO_GRID_POINTS as f64;
    (0..ORTHO_GRID_POINTS).map(|i| (i as f64 + 0.5) / n).collect()
}

/// Gram–Schmidt on the Krylov sequence 1, t, t², … under the discrete
/// uniform measure, expressed through its three-term recurrence.
fn stieltjes_coefficients(df: usize) -> (Vec<f64>, Vec<f64>) {
    let ts: Vec<f64> = ortho_reference_grid().iter().map(|p| 2.0 * p - 1.0).collect();
    let n = ts.len() as f64;
    let inner = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() / n;

    let mut a = Vec::with_capacity(df);
    let mut b = vec![0.0; df + 1];
    b[0] = 1.0;
    let mut prev = vec![0.0; ts.len()];
    let mut cur = vec![1.0; ts.len()];
    let mut basis: Vec<Vec<f64>> = vec![cur.clone()];
    for k in 0..df {
        let tp: Vec<f64> = ts.iter().zip(&cur).map(|(t, c)| t * c).collect();
        let ak = inner(&tp, &cur);
        let mut next: Vec<f64> = (0..ts.len())
            .map(|i| tp[i] - ak * cur[i] - if k == 0 { 0.0 } else { b[k] * prev[i] })
            .collect();
        // second pass against every earlier column; keeps the recurrence
        // coefficients consistent with a fully orthogonal family
        for q in &basis {
            let c = inner(&next, q);
            for (x, y) in next.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
        let norm = inner(&next, &next).sqrt();
        for x in &mut next {
            *x /= norm;
        }
        a.push(ak);
        b[k + 1] = norm;
        basis.push(next.clone());
        prev = std::mem::replace(&mut cur, next);
    }
    (a, b)
}
