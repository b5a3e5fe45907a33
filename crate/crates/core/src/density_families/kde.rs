use crate::error::{Error, Result};
use crate::quantile_core::normal;
use crate::stats;

/// Gaussian kernel density estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelDensityEstimate {
    sample: Vec<f64>,
    bandwidth: f64,
}

impl KernelDensityEstimate {
    pub fn new(sample: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::input("kernel density estimate needs a non-empty sample"));
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("kernel density sample contains non-finite values"));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::input(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { sample, bandwidth })
    }

    /// Bandwidth from Silverman's rule, 0.9 · min(sd, IQR/1.34) · n^(−1/5).
    pub fn silverman(sample: Vec<f64>) -> Result<Self> {
        let bw = silverman_bandwidth(&sample)?;
        Self::new(sample, bw)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, y: f64) -> f64 {
        let h = self.bandwidth;
        let s: f64 = self.sample.iter().map(|x| normal::pdf((y - x) / h)).sum();
        s / (self.sample.len() as f64 * h)
    }
}

pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::input("kernel density estimate needs a non-empty sample"));
    }
    let n = sample.len() as f64;
    let sd = stats::std_dev(sample);
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        // degenerate sample: fall back to a scale-relative width
        (false, false) => sorted[0].abs().max(1.0) * 1e-3,
    };
    Ok(0.9 * spread * n.powf(-0.2))
}
