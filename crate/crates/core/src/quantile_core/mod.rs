//! Percentiles, smoothing bases, link functions and quantile calculus.

mod basis;
mod link;
pub mod normal;
mod percentile;

pub use basis::{
    ortho_reference_grid, BasisConfig, BasisFamily, SmootherBasis, DEFAULT_BOUNDARY, ORTHO_GRID_POINTS,
};
pub use link::LinkFunction;
pub use percentile::{plotting_positions, PercentGrid, Percentile};

use crate::density_families::CaseDensity;
use crate::error::{Error, Result};

/// Quantile density q(p) = 1 / f(Q(p)).
pub fn quantile_density(f: &CaseDensity, p: f64) -> Result<f64> {
    quantile_density_at(f, Percentile::new(p)?)
}

pub fn quantile_density_at(f: &CaseDensity, p: Percentile) -> Result<f64> {
    let q = f.quantile_at(p)?;
    let dens = f.pdf(q);
    if dens > 0.0 && dens.is_finite() {
        Ok(1.0 / dens)
    } else {
        Err(Error::Singularity(format!(
            "density is {dens} at Q({}) = {q}",
            p.value()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_density_examples() {
        let unif = CaseDensity::uniform(1.0).unwrap();
        for p in [0.1, 0.5, 0.9] {
            assert!((quantile_density(&unif, p).unwrap() - 1.0).abs() < 1e-15);
        }
        let exp1 = CaseDensity::gamma(1.0, 1.0).unwrap();
        assert!((quantile_density(&exp1, 0.5).unwrap() - 2.0).abs() < 1e-12);

        let ln = CaseDensity::log_normal(7.0, 1.5).unwrap();
        let median = 7f64.exp();
        let pdf_at_median = 1.0 / (median * 1.5 * (2.0 * std::f64::consts::PI).sqrt());
        let q = quantile_density(&ln, 0.5).unwrap();
        assert!((q * pdf_at_median - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_density_times_density_quantile_is_one() {
        let families = [
            CaseDensity::uniform(2.0).unwrap(),
            CaseDensity::log_normal(7.0, 1.5).unwrap(),
            CaseDensity::pareto(2.0, 1.0).unwrap(),
            CaseDensity::gamma(2.5, 0.01).unwrap(),
            CaseDensity::gsm(vec![0.2, 0.3, 0.1, 0.4], 0.5).unwrap(),
        ];
        for f in &families {
            for i in 1..=99 {
                let p = i as f64 / 100.0;
                let q = quantile_density(f, p).unwrap();
                let prod = q * f.pdf(f.quantile(p).unwrap());
                assert!((prod - 1.0).abs() < 1e-10, "{f:?} p={p}: {prod}");
            }
        }
    }

    #[test]
    fn zero_density_is_a_singularity() {
        let f = CaseDensity::log_normal(0.0, 3.0).unwrap();
        assert!(quantile_density(&f, 0.5).is_ok());
        // the density underflows this far into the tail
        let far = Percentile::from_upper(1e-300).unwrap();
        assert!(matches!(quantile_density_at(&f, far), Err(Error::Singularity(_))));
        assert!(matches!(quantile_density(&f, 1.5), Err(Error::Domain(_))));
    }
}
