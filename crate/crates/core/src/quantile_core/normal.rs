//! Standard normal density, distribution and quantile functions with
//! tail-accurate evaluation.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

use super::Percentile;

/// 1 / sqrt(2π)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// ln sqrt(2π)
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)`.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Φ(x) as a [`Percentile`] carrying both tails.
pub fn cdf_percentile(x: f64) -> Option<Percentile> {
    Percentile::from_tails(cdf(x), sf(x)).ok()
}

/// Φ⁻¹ evaluated on the accurate tail of `p`, polished by one Newton step
/// against the tail probability.
#[inline]
pub fn quantile(p: Percentile) -> f64 {
    if p.is_upper_half() {
        let s = p.complement();
        let z = SQRT_2 * erfc_inv(2.0 * s);
        polish(z, s)
    } else {
        let q = p.value();
        let z = SQRT_2 * erfc_inv(2.0 * q);
        -polish(z, q)
    }
}

// solves sf(z) = tail near z
fn polish(z: f64, tail: f64) -> f64 {
    let d = pdf(z);
    if !(d > 0.0) || !z.is_finite() {
        return z;
    }
    z + (sf(z) - tail) / d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_symmetry() {
        let half = Percentile::new(0.5).unwrap();
        assert_eq!(quantile(half), 0.0);
        for &p in &[1e-12, 1e-6, 0.01, 0.2, 0.4] {
            let lo = quantile(Percentile::new(p).unwrap());
            let hi = quantile(Percentile::from_upper(p).unwrap());
            assert!((lo + hi).abs() < 1e-12 * lo.abs().max(1.0));
        }
    }

    #[test]
    fn known_values() {
        let z975 = quantile(Percentile::new(0.975).unwrap());
        assert!((z975 - 1.959_963_984_540_054).abs() < 1e-13);
        assert!((cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert!((pdf(0.0) - INV_SQRT_2PI).abs() < 1e-16);
        assert!((LN_SQRT_2PI - (2.0 * std::f64::consts::PI).sqrt().ln()).abs() < 1e-15);
    }

    #[test]
    fn round_trip_in_far_tail() {
        let p = Percentile::from_upper(1e-15).unwrap();
        let z = quantile(p);
        let back = cdf_percentile(z).unwrap();
        assert!(((back.complement() - 1e-15) / 1e-15).abs() < 1e-12);
    }
}
