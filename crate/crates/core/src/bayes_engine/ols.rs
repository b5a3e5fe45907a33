use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::induced_density::TwoSampleData;
use crate::quantile_core::{plotting_positions, LinkFunction, Percentile, SmootherBasis};
use crate::stats;

/// Relative size of a triangular-factor diagonal below which the design is
/// declared rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares fit of the transformed quantile ratio on the basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub beta_hat: Vec<f64>,
    pub residual_variance: f64,
    /// s² (XᵀX)⁻¹, row-major.
    pub covariance: Vec<Vec<f64>>,
    /// Covariance inflated for the serial correlation of order-statistic
    /// residuals; the default β proposal scale.
    pub proposal_scale: Vec<Vec<f64>>,
    /// Number of (p, ratio) pairs used.
    pub pairs: usize,
}

/// Empirical quantile of an ascending sample at probability p, linear in
/// the plotting positions i/(n + 1) and flat beyond the extremes.
pub fn plotting_position_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p * (n + 1) as f64;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

/// The (pᵢ, y₁ quantile, y₂ quantile) pairs used for OLS: n = min(n₁, n₂),
/// pᵢ = i/(n + 1). The smaller sample contributes its order statistics and
/// the larger its empirical quantile at pᵢ; with n₁ = n₂ this is the plain
/// i-th order statistic pairing.
pub fn quantile_pairs(data: &TwoSampleData) -> Vec<(f64, f64, f64)> {
    let n = data.n1().min(data.n2());
    plotting_positions(n)
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let a = if data.n1() == n {
                data.y1()[i]
            } else {
                plotting_position_quantile(data.y1(), p)
            };
            let b = if data.n2() == n {
                data.y2()[i]
            } else {
                plotting_position_quantile(data.y2(), p)
            };
            (p, a, b)
        })
        .collect()
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Ordinary least squares of h(Q̃₁(pᵢ)/Q̃₂(pᵢ)) on X(pᵢ, λ) via QR.
pub fn ols_init(data: &TwoSampleData, link: LinkFunction, basis: &SmootherBasis) -> Result<OlsFit> {
    let pairs = quantile_pairs(data);
    let n = pairs.len();
    let k = basis.ncols();
    if n < k + 1 {
        return Err(Error::input(format!(
            "need at least {} paired observations for {k} coefficients, have {n}",
            k + 1
        )));
    }
    let mut x = DMatrix::<f64>::zeros(n, k);
    let mut y = DVector::<f64>::zeros(n);
    for (i, &(p, a, b)) in pairs.iter().enumerate() {
        let row = basis.eval_at(Percentile::new(p)?);
        for (j, v) in row.into_iter().enumerate() {
            x[(i, j)] = v;
        }
        y[i] = link.apply(a / b);
        if !y[i].is_finite() {
            return Err(Error::numeric(format!("transformed ratio at p = {p} is not finite")));
        }
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if !(max_diag > 0.0) || (0..k).any(|j| r[(j, j)].abs() <= RANK_TOLERANCE * max_diag) {
        return Err(Error::LinearAlgebra(format!(
            "design matrix with {k} columns at {n} percentiles is rank deficient"
        )));
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::LinearAlgebra("triangular solve failed".into()))?;
    let resid = &y - &x * &beta;
    let dof = (n - k) as f64;
    let s2 = resid.norm_squared() / dof;
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::LinearAlgebra("R factor is singular".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let cov = &xtx_inv * s2;
    // neighbouring order statistics share most of their information, so the
    // iid formula understates the spread by roughly n / ESS(residuals)
    let ess = stats::effective_sample_size(resid.as_slice()).clamp(1.0, n as f64);
    let inflation = n as f64 / ess;
    let proposal = &cov * inflation;
    Ok(OlsFit {
        beta_hat: beta.iter().copied().collect(),
        residual_variance: s2,
        covariance: to_rows(&cov),
        proposal_scale: to_rows(&proposal),
        pairs: n,
    })
}
