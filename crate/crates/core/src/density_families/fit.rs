//! Maximum-likelihood fits of the case density to a single sample.

use statrs::function::gamma::digamma;

use super::{CaseDensity, FamilyKind};
use crate::error::{Error, Result};

const EM_MAX_ITER: usize = 2000;
const EM_TOL: f64 = 1e-10;

/// Fits `kind` to `y` by maximum likelihood (EM for the mixture).
pub fn fit_mle(kind: FamilyKind, y: &[f64]) -> Result<CaseDensity> {
    if y.is_empty() {
        return Err(Error::input("cannot fit a density to an empty sample"));
    }
    if y.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::input("sample must be strictly positive"));
    }
    let n = y.len() as f64;
    match kind {
        FamilyKind::Uniform => {
            let max = y.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
            CaseDensity::uniform(max)
        }
        FamilyKind::LogNormal => {
            let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            let mu = logs.iter().sum::<f64>() / n;
            let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n;
            CaseDensity::log_normal(mu, var.sqrt().max(1e-8))
        }
        FamilyKind::Pareto => {
            let scale = y.iter().copied().fold(f64::INFINITY, f64::min);
            let s: f64 = y.iter().map(|v| (v / scale).ln()).sum();
            let shape = if s > 0.0 { n / s } else { 1e6 };
            CaseDensity::pareto(shape, scale)
        }
        FamilyKind::Gamma => {
            let (shape, rate) = gamma_mle(y)?;
            CaseDensity::gamma(shape, rate)
        }
        FamilyKind::GammaScaleMixture { components } => gsm_em(y, components),
    }
}

fn gamma_mle(y: &[f64]) -> Result<(f64, f64)> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mean_log = y.iter().map(|v| v.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_log;
    if !(s > 0.0) {
        // all observations equal
        return Ok((1e6, 1e6 / mean));
    }
    // ln k − ψ(k) = s is strictly decreasing in k; bracket and bisect on ln k
    let g = |k: f64| k.ln() - digamma(k) - s;
    let guess = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    let (mut lo, mut hi) = (guess / 2.0, guess * 2.0);
    while g(lo) < 0.0 {
        lo /= 2.0;
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::numeric("gamma shape MLE diverged"));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    let shape = (lo * hi).sqrt();
    Ok((shape, shape / mean))
}

/// EM for the gamma scale mixture with J fixed: responsibilities over
/// integer shapes, closed-form updates for π and the shared rate.
fn gsm_em(y: &[f64], components: usize) -> Result<CaseDensity> {
    if components == 0 {
        return Err(Error::input("gsm needs at least one component"));
    }
    let n = y.len() as f64;
    let sum_y: f64 = y.iter().sum();
    let mut weights = vec![1.0 / components as f64; components];
    let mut rate = 0.5 * (components as f64 + 1.0) * n / sum_y;
    let ln_fact: Vec<f64> = (0..components)
        .scan(0.0, |acc, k| {
            if k > 0 {
                *acc += (k as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    let mut last_ll = f64::NEG_INFINITY;
    let mut resp = vec![0.0; components];
    for _ in 0..EM_MAX_ITER {
        let mut counts = vec![0.0; components];
        let mut shape_mass = 0.0;
        let mut ll = 0.0;
        let ln_rate = rate.ln();
        for &yi in y {
            let x = rate * yi;
            let lnx = x.ln();
            let mut max = f64::NEG_INFINITY;
            for k in 0..components {
                // ln[π_j θ^j y^{j−1} e^{−θy} / (j−1)!], j = k + 1
                resp[k] = if weights[k] > 0.0 {
                    weights[k].ln() + ln_rate + k as f64 * lnx - x - ln_fact[k]
                } else {
                    f64::NEG_INFINITY
                };
                max = max.max(resp[k]);
            }
            let total: f64 = resp.iter().map(|r| (r - max).exp()).sum();
            ll += max + total.ln();
            for k in 0..components {
                let r = (resp[k] - max).exp() / total;
                counts[k] += r;
                shape_mass += r * (k + 1) as f64;
            }
        }
        weights = counts.iter().map(|c| c / n).collect();
        let norm: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= norm);
        rate = shape_mass / sum_y;
        if (ll - last_ll).abs() <= EM_TOL * ll.abs().max(1.0) {
            break;
        }
        last_ll = ll;
    }
    CaseDensity::gsm(weights, rate)
}
